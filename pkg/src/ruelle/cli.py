"""Command-line front end.

    python -m ruelle COMMAND (--gauss N | --schottky FILE | --config FILE) [options]

Every command writes a CSV or JSON result and a ``run.json`` with the
configuration, library versions and wall time into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import analysis, io, phase, pressure, transfer, zeta
from .ifs import BudgetExceeded, IfsError, IfsSystem, build_example_schottky, ifs_from_config
from .potentials import gkw_potential, gkw_roof, gkw_tau_prime, zero

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_NUMERICAL, EXIT_INCONCLUSIVE = 0, 2, 3, 4, 5

COMMANDS = ("pressure", "dimension", "spectrum", "trapped-set", "captivity", "gap-scan", "weyl",
            "zeta-zeros", "correlations")

FIGURES = {
    "dimension": "Hausdorff dimension of the Gauss trapped set against the number of branches",
    "trapped-set": "phase-space trapped set of the Gauss map with the band -2/(1+x) < xi < 0",
    "gap-scan": "largest stable resonance modulus against b, with the asymptotic line at gamma_plus",
    "weyl": "log-log fractal Weyl plot of the resonance count above the threshold",
    "spectrum": "resonances in log-polar coordinates (log|lambda|, arg lambda)",
    "pressure": "pressure curve beta -> P(beta) whose zero is the dimension",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    system: dict
    out: Path = Path("out")
    depth: int | None = None
    beta: float = 1.0
    a: float = 1.0
    b: float = 0.0
    b_grid: tuple[float, float, int] | None = None
    nodes: int | None = None
    threshold: float = analysis.WEYL_THRESHOLD
    max_period: int | None = None
    svg: bool = False
    workers: int = 1
    rect: tuple[float, float, float, float] | None = None
    nu_window: int = 2
    seed: int = 0
    max_orbits: int = 20_000_000
    max_matrix: int = analysis.MAX_MATRIX_DIM

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name, lo, hi in (("depth", 1, 40), ("max_period", 1, 30), ("nodes", 4, 5000)):
            v = getattr(self, name)
            if v is not None and not (lo <= v <= hi):
                raise ConfigError(f"--{name.replace('_', '-')} must lie in [{lo}, {hi}]")
        if not math.isfinite(self.beta) or not (0 <= self.beta <= 10):
            raise ConfigError("--beta must lie in [0, 10]")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ConfigError("--a and --b must be finite")
        if self.b_grid is not None:
            lo, hi, n = self.b_grid
            if not (hi > lo and n >= 2):
                raise ConfigError("--b-grid needs lo < hi and at least 2 steps")
        if self.workers < 1 or self.max_orbits < 1 or self.max_matrix < 1:
            raise ConfigError("workers and budgets must be positive")
        if self.nu_window < 0:
            raise ConfigError("--nu-window must be >= 0")

    def echo(self) -> dict:
        d = asdict(self)
        d["out"] = str(self.out)
        return d


def _grid(spec: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = spec.split(":")
        return float(lo), float(hi), int(n)
    except ValueError as exc:
        raise ConfigError(f"bad grid {spec!r}; expected lo:hi:steps") from exc


def _rect(spec: str) -> tuple[float, float, float, float]:
    try:
        vals = tuple(float(v) for v in spec.split(":"))
    except ValueError as exc:
        raise ConfigError(f"bad rectangle {spec!r}") from exc
    if len(vals) != 4:
        raise ConfigError("rectangle is re_min:re_max:im_min:im_max")
    return vals


def load_system(cfg: dict) -> IfsSystem:
    try:
        if cfg.get("kind") == "schottky" and cfg.get("builtin"):
            return build_example_schottky()
        return ifs_from_config(cfg)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed system config: {exc}") from exc


def _system_from_args(ns) -> dict:
    chosen = [x for x in (ns.gauss, ns.schottky, ns.config) if x is not None]
    if len(chosen) != 1:
        raise ConfigError("give exactly one of --gauss, --schottky, --config")
    if ns.gauss is not None:
        return {"kind": "gauss", "n_branches": ns.gauss}
    path = ns.schottky or ns.config
    if ns.schottky == "example":
        return {"kind": "schottky", "builtin": True}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if ns.schottky is not None:
        cfg.setdefault("kind", "schottky")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ruelle", description="Resonances, zeta functions and trapped sets of "
                                "expanding interval maps.")
    p.add_argument("command", choices=COMMANDS)
    src = p.add_argument_group("system")
    src.add_argument("--gauss", type=int, metavar="N", help="Gauss map restricted to N branches")
    src.add_argument("--schottky", metavar="FILE", help="Schottky generators (JSON), or 'example' for the "
                     "built-in three-funnel surface")
    src.add_argument("--config", metavar="FILE", help="system config (JSON)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--depth", type=int, help="orbit depth / box depth / correlation steps")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1.0, help="real part of s")
    p.add_argument("--b", type=float, default=0.0, help="imaginary part of s")
    p.add_argument("--b-grid", help="lo:hi:steps")
    p.add_argument("--nodes", type=int, help="collocation nodes per interval")
    p.add_argument("--threshold", type=float, default=analysis.WEYL_THRESHOLD, help="log-modulus threshold")
    p.add_argument("--max-period", type=int)
    p.add_argument("--svg", action="store_true", help="also write an SVG figure")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--rect", help="zero search rectangle re_min:re_max:im_min:im_max")
    p.add_argument("--nu-window", type=int, default=2, help="Fourier modes kept in correlations")
    p.add_argument("--seed", type=int, default=0, help="seed of the random test functions")
    p.add_argument("--max-orbits", type=int, default=20_000_000, help="budget on enumerated words")
    p.add_argument("--max-matrix", type=int, default=analysis.MAX_MATRIX_DIM, help="budget on matrix rows")
    return p


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=ns.command, system=_system_from_args(ns), out=Path(ns.out), depth=ns.depth, beta=ns.beta,
        a=ns.a, b=ns.b, b_grid=_grid(ns.b_grid) if ns.b_grid else None, nodes=ns.nodes, threshold=ns.threshold,
        max_period=ns.max_period, svg=ns.svg, workers=ns.workers, rect=_rect(ns.rect) if ns.rect else None,
        nu_window=ns.nu_window, seed=ns.seed, max_orbits=ns.max_orbits, max_matrix=ns.max_matrix)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# commands; each returns (exit status, summary dict, printed line)


def _pressure(ifs, cfg):
    depth = cfg.depth or 10
    est = pressure.pressure(ifs, cfg.beta, depth, budget=cfg.max_orbits, workers=cfg.workers)
    io.write_csv(cfg.out / "pressure.csv", ["beta", "pressure", "convergence_gap", "depth"],
                 [[est.beta, est.value, est.convergence_gap, est.orbit_depth]])
    if cfg.svg:
        betas = np.linspace(0.0, 1.0, 21)
        vals = [pressure.pressure(ifs, b, depth, budget=cfg.max_orbits, workers=cfg.workers).value for b in betas]
        io.SvgPlot(title="pressure P(beta)", xlabel="beta", ylabel="P").line(betas, vals, color="#1f77b4") \
            .line([0, 1], [0, 0], color="#555555", dash="4,3").save(cfg.out / "pressure.svg")
    return EXIT_OK, {"pressure": est.value, "gap": est.convergence_gap}, \
        f"P({cfg.beta:g}) = {est.value:.10f} (gap {est.convergence_gap:.2e})"


def _dimension(ifs, cfg):
    depth = cfg.depth or 10
    d = pressure.hausdorff_dimension(ifs, depth, workers=cfg.workers, budget=cfg.max_orbits)
    io.write_csv(cfg.out / "dimension.csv", ["dimension", "uncertainty", "depth", "pressure_at_root"],
                 [[d.value, d.uncertainty, d.depth, d.p_at_root]])
    return EXIT_OK, {"dimension": d.value, "uncertainty": d.uncertainty}, \
        f"dim_H K = {d.value:.6f} +/- {d.uncertainty:.1e}"


def _spectrum(ifs, cfg):
    params = transfer.SpectralParams(cfg.a, cfg.b)
    M = cfg.nodes or transfer.node_count(cfg.b, ifs.max_length)
    if (M + 8) * ifs.n > cfg.max_matrix:
        raise BudgetExceeded(f"matrix with {(M + 8) * ifs.n} rows exceeds --max-matrix {cfg.max_matrix}")
    rs = transfer.spectrum(ifs, params, M)
    ev = rs.eigenvalues
    with np.errstate(divide="ignore"):
        logm = np.log(np.abs(ev))
    io.write_csv(cfg.out / "spectrum.csv", ["N", "a", "b", "M", "re", "im", "modulus", "log_modulus", "arg", "stable"],
                 [[ifs.n, cfg.a, cfg.b, M, e.real, e.imag, abs(e), lm, np.angle(e), bool(st)]
                  for e, lm, st in zip(ev, logm, rs.stable)])
    if cfg.svg:
        st = rs.stable_eigenvalues
        io.SvgPlot(title=f"resonances at s = {cfg.a:g} + {cfg.b:g}i", xlabel="log|lambda|", ylabel="arg lambda") \
            .scatter(np.log(np.abs(st)), np.angle(st)).save(cfg.out / "spectrum.svg")
    top = rs.stable_eigenvalues[0] if rs.stable.any() else complex("nan")
    return EXIT_OK, {"n_stable": int(rs.stable.sum()), "M": M, "leading": top}, \
        f"{int(rs.stable.sum())} stable eigenvalues at M = {M}; leading {io.fmt(top)}"


def _trapped_set(ifs, cfg):
    tp = gkw_tau_prime(ifs)
    rows, xs, xis = [], [], []
    inside = total = 0
    for p in range(1, (cfg.max_period or 6) + 1):
        pts = phase.trapped_set_points(ifs, tp, p, cfg.max_orbits)
        for x, xi, w in zip(pts.x, pts.xi, pts.words):
            rows.append([p, x, xi, "".join(str(int(s) + 1) for s in w)])
        xs.append(pts.x)
        xis.append(pts.xi)
        if ifs.kind == "gauss":
            band = (pts.xi < 0) & (pts.xi > -2.0 / (1.0 + pts.x))
            inside += int(band.sum())
            total += len(pts)
    io.write_csv(cfg.out / "trapped_set.csv", ["period", "x", "xi", "word"], rows)
    if cfg.svg:
        plot = io.SvgPlot(title="trapped set in phase space", xlabel="x", ylabel="xi")
        plot.scatter(np.concatenate(xs), np.concatenate(xis), r=1.2)
        if ifs.kind == "gauss":
            g = np.linspace(ifs.bounds.min(), ifs.bounds.max(), 200)
            plot.line(g, -2.0 / (1.0 + g), dash="5,3").line(g, 0 * g, dash="5,3")
        plot.save(cfg.out / "trapped_set.svg")
    summary = {"points": len(rows)}
    line = f"{len(rows)} periodic phase points"
    if total:
        summary["band_fraction"] = inside / total
        line += f"; {inside}/{total} inside -2/(1+x) < xi < 0"
    return EXIT_OK, summary, line


def _captivity(ifs, cfg):
    tp = gkw_tau_prime(ifs)
    if cfg.depth is None:
        v = phase.find_captive_depth(ifs, tp, budget=cfg.max_orbits)
    else:
        v = phase.captivity_check_boxes(ifs, tp, cfg.depth, budget=cfg.max_orbits)
    cert = {"boxes": v.certificate()}
    if ifs.is_mobius:
        cert["mobius"] = phase.captivity_check_mobius(ifs).certificate()
    io.write_json(cfg.out / "captivity.json", cert)
    status = EXIT_INCONCLUSIVE if v.status == "inconclusive" else EXIT_OK
    return status, {"status": v.status, "depth": v.depth}, f"{v.status} at depth {v.depth} ({v.cells} cells)"


def _b_values(cfg, default, geometric=False):
    lo, hi, n = cfg.b_grid or default
    if geometric and lo > 0:
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def _gap_scan(ifs, cfg):
    prof = analysis.damping_gamma_plus(ifs, gkw_potential(ifs, cfg.a), cfg.max_period or 10, cfg.max_orbits)
    scan = analysis.spectral_radius_scan(ifs, cfg.a, _b_values(cfg, (0.0, 600.0, 7)), M=cfg.nodes,
                                         gamma_plus=prof.gamma_plus, workers=cfg.workers, max_dim=cfg.max_matrix)
    io.write_csv(cfg.out / "gap_scan.csv", ["b", "max_log_modulus", "gamma_plus"],
                 [[r.b, r.max_log_modulus, prof.gamma_plus] for r in scan.rows])
    for b in scan.skipped:
        print(f"skipped b = {b:g}: matrix budget exceeded", file=sys.stderr)
    if cfg.svg:
        io.SvgPlot(title="largest stable resonance", xlabel="log|lambda|", ylabel="b") \
            .scatter(scan.max_log_modulus, scan.b, r=3).vline(prof.gamma_plus).save(cfg.out / "gap_scan.svg")
    worst = float(np.max(scan.max_log_modulus[scan.b >= 100])) if np.any(scan.b >= 100) else math.nan
    return EXIT_OK, {"gamma_plus": prof.gamma_plus, "max_log_modulus_b_ge_100": worst,
                     "skipped": list(scan.skipped)}, \
        f"gamma_plus = {prof.gamma_plus:.6f}; max log|lambda| for b >= 100: {worst:.4f}"


def _weyl(ifs, cfg):
    b, counts = analysis.weyl_counts(ifs, cfg.a, _b_values(cfg, (50.0, 800.0, 12), geometric=True),
                                     cfg.threshold, workers=cfg.workers, max_dim=cfg.max_matrix)
    io.write_csv(cfg.out / "weyl.csv", ["b", "count"], zip(b, counts))
    fit = analysis.weyl_fit(b, counts)
    if cfg.svg:
        lb = np.log(b)
        io.SvgPlot(title="fractal Weyl law", xlabel="log b", ylabel="log N(b)").scatter(lb, np.log(counts), r=3) \
            .line(lb, fit.slope * lb + fit.intercept).save(cfg.out / "weyl.svg")
    return EXIT_OK, {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual}, \
        f"log N(b) = {fit.slope:.4f} log b + {fit.intercept:.4f} (rms {fit.residual:.3f})"


def _zeta_zeros(ifs, cfg):
    rect = cfg.rect or (0.0, 1.0, -5.0, 5.0)
    zs = zeta.zero_search(ifs, rect, n_max=cfg.max_period or 10)
    io.write_csv(cfg.out / "zeta_zeros.csv", ["re", "im", "modulus", "resonance_gap", "validated", "converged"],
                 [[z.s.real, z.s.imag, z.modulus, z.gap, z.validated, z.converged] for z in zs])
    return EXIT_OK, {"zeros": len(zs), "validated": sum(z.validated for z in zs)}, \
        f"{len(zs)} zeros in {rect}, {sum(z.validated for z in zs)} confirmed by the transfer spectrum"


def _correlations(ifs, cfg):
    u, v = analysis.random_fourier_pair(cfg.seed, cfg.nu_window)
    rep = analysis.correlation_check(ifs, zero, gkw_roof(ifs), u, v, n_max=cfg.depth or 30,
                                     nu_window=cfg.nu_window, M=cfg.nodes or 32)
    rows = [{"n": int(n), "value": c, "leading": l, "residual": r}
            for n, c, l, r in zip(rep.n, rep.values, rep.leading, rep.residual)]
    io.write_json(cfg.out / "correlations.json", {
        "series": rows, "lambda0": rep.lambda0, "lambda1": rep.lambda1, "fitted_rate": rep.fitted_rate,
        "expected_rate": rep.expected_rate, "truncation_ok": rep.truncation_ok})
    status = EXIT_OK if rep.truncation_ok else EXIT_NUMERICAL
    return status, {"fitted_rate": rep.fitted_rate, "expected_rate": rep.expected_rate}, \
        f"residual rate {rep.fitted_rate:.4f} vs log|lambda_1| = {rep.expected_rate:.4f}"


HANDLERS = {"pressure": _pressure, "dimension": _dimension, "spectrum": _spectrum, "trapped-set": _trapped_set,
            "captivity": _captivity, "gap-scan": _gap_scan, "weyl": _weyl, "zeta-zeros": _zeta_zeros,
            "correlations": _correlations}


def run(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    status, summary, error = EXIT_OK, {}, None
    try:
        cfg.validate()
        ifs = load_system(cfg.system)
        status, summary, line = HANDLERS[cfg.command](ifs, cfg)
        print(line)
    except (ConfigError, IfsError) as exc:
        status, error = EXIT_CONFIG, str(exc)
    except BudgetExceeded as exc:
        status, error = EXIT_BUDGET, str(exc)
    except (transfer.NumericalError, pressure.NoRootError, np.linalg.LinAlgError, FloatingPointError) as exc:
        status, error = EXIT_NUMERICAL, str(exc)
    if error:
        print(f"error: {error}", file=sys.stderr)
    meta = {"command": cfg.command, "config": cfg.echo(), "versions": io.environment_versions(),
            "wall_time_s": round(time.perf_counter() - t0, 3), "exit_status": status, "summary": summary,
            "budget": {"max_orbits": cfg.max_orbits, "max_matrix": cfg.max_matrix}}
    if error:
        meta["error"] = error
    if cfg.command in FIGURES:
        meta["figure"] = FIGURES[cfg.command]
    try:
        io.write_json(cfg.out / "run.json", meta)
    except OSError as exc:
        print(f"error: cannot write run.json: {exc}", file=sys.stderr)
    return status


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
