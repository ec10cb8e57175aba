"""Spectral gap diagnostics, fractal Weyl counting and correlation decay."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .ifs import BudgetExceeded, IfsSystem, orbit_points, periodic_orbits
from .potentials import jacobian
from .transfer import (CollocationScheme, NumericalError, ResonanceSet, SpectralParams, build_matrix,
                       node_count, resonances)

WEYL_THRESHOLD = -3.5
MAX_MATRIX_DIM = 4000


# ---------------------------------------------------------------------------
# damping function and gamma_+


@dataclass(frozen=True)
class DampingProfile:
    gamma_n: tuple[float, ...]
    gamma_plus: float
    maximizers: tuple[tuple[int, ...], ...]

    @property
    def depths(self) -> range:
        return range(1, len(self.gamma_n) + 1)


def damping_function(ifs: IfsSystem, V: Callable):
    """D = Re V - J/2."""
    J = jacobian(ifs)

    def D(x, i, j):
        return np.real(V(x, i, j)) - 0.5 * J(x, i, j)
    return D


def damping_gamma_plus(ifs: IfsSystem, V: Callable, max_depth: int = 10, budget: int | None = None) -> DampingProfile:
    """Largest Birkhoff average of D over periodic orbits, period by period.

    gamma_plus is the running maximum over the recorded periods.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    D = damping_function(ifs, V)
    gam, words = [], []
    for n in range(1, max_depth + 1):
        orb = periodic_orbits(ifs, n, budget)
        if not len(orb.words):
            gam.append(-math.inf)
            words.append(())
            continue
        xs, _, src = orbit_points(ifs, orb)
        avg = np.mean(D(xs, src, np.roll(src, -1, axis=1)), axis=1)
        k = int(np.argmax(avg))
        gam.append(float(avg[k]))
        words.append(tuple(int(s) for s in orb.words[k]))
    return DampingProfile(tuple(gam), float(max(gam)), tuple(words))


# ---------------------------------------------------------------------------
# spectral radius against b


@dataclass(frozen=True)
class GapScanRow:
    b: float
    M: int
    max_modulus: float
    n_stable: int

    @property
    def max_log_modulus(self) -> float:
        return math.log(self.max_modulus) if self.max_modulus > 0 else -math.inf


@dataclass(frozen=True)
class GapScan:
    a: float
    rows: tuple[GapScanRow, ...]
    skipped: tuple[float, ...] = ()
    gamma_plus: float | None = None

    @property
    def b(self) -> np.ndarray:
        return np.array([r.b for r in self.rows])

    @property
    def max_log_modulus(self) -> np.ndarray:
        return np.array([r.max_log_modulus for r in self.rows])


def _resonances_at(ifs: IfsSystem, a: float, b: float, M: int | None, refine: int) -> ResonanceSet:
    """Resonances at s = a + i|b|; negative b are handled by conjugation."""
    M = node_count(b, ifs.max_length) if M is None else M
    rs = resonances(build_matrix(ifs, SpectralParams(a, abs(b)), CollocationScheme(M)), refine)
    return rs.conjugated() if b < 0 else rs


def spectral_radius_scan(ifs: IfsSystem, a: float, b_grid: Sequence[float], M: int | None = None,
                         refine: int = 8, gamma_plus: float | None = None, workers: int = 1,
                         max_dim: int = MAX_MATRIX_DIM) -> GapScan:
    """Largest stable resonance modulus for each b in the grid.

    Values of b whose matrix would exceed ``max_dim`` rows are skipped and
    listed in ``skipped``. Results come back in grid order whatever the
    number of workers.
    """
    grid = [float(b) for b in b_grid]
    keep, skipped = [], []
    for b in grid:
        m = node_count(b, ifs.max_length) if M is None else M
        (keep if (m + refine) * ifs.n <= max_dim else skipped).append(b)

    def one(b):
        rs = _resonances_at(ifs, a, b, M, refine)
        ev = rs.stable_eigenvalues
        return GapScanRow(b, rs.M, float(np.max(np.abs(ev))) if ev.size else 0.0, int(ev.size))

    if workers > 1 and len(keep) > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(one, keep))
    else:
        rows = [one(b) for b in keep]
    return GapScan(a, tuple(rows), tuple(skipped), gamma_plus)


# ---------------------------------------------------------------------------
# fractal Weyl law


def weyl_count(res: ResonanceSet, log_threshold: float = WEYL_THRESHOLD) -> int:
    ev = res.stable_eigenvalues
    if ev.size == 0 or log_threshold == math.inf:
        return 0
    with np.errstate(divide="ignore"):
        return int(np.count_nonzero(np.log(np.abs(ev)) > log_threshold))


def weyl_counts(ifs: IfsSystem, a: float, b_grid: Sequence[float], log_threshold: float = WEYL_THRESHOLD,
                refine: int = 8, workers: int = 1, max_dim: int = MAX_MATRIX_DIM) -> tuple[np.ndarray, np.ndarray]:
    """(b, count) over the grid, with M(b) from the node heuristic."""
    grid = [float(b) for b in b_grid]
    grid = [b for b in grid if (node_count(b, ifs.max_length) + refine) * ifs.n <= max_dim]

    def one(b):
        return weyl_count(_resonances_at(ifs, a, b, None, refine), log_threshold)

    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(workers) as ex:
            counts = list(ex.map(one, grid))
    else:
        counts = [one(b) for b in grid]
    return np.array(grid), np.array(counts, dtype=int)


@dataclass(frozen=True)
class WeylFit:
    slope: float
    intercept: float
    residual: float

    @property
    def plotted_slope(self) -> float:
        """Slope of log N against log(1/b), the convention in which the counting exponent is negative."""
        return -self.slope

    @property
    def exponent(self) -> float:
        return abs(self.slope)


def weyl_fit(b_grid: Sequence[float], counts: Sequence[int]) -> WeylFit:
    """Least squares line through (log b, log N(b))."""
    b = np.asarray(b_grid, float)
    n = np.asarray(counts, float)
    if b.size != n.size:
        raise ValueError("b grid and counts differ in length")
    if b.size < 5:
        raise ValueError("need at least 5 grid points")
    if np.any(b <= 0) or b.max() / b.min() < 8:
        raise ValueError("grid must be positive and span a factor of at least 8")
    if np.any(n <= 0):
        raise ValueError("counts must be positive to take logarithms")
    X, Y = np.log(b), np.log(n)
    coef, res, *_ = np.polyfit(X, Y, 1, full=True)
    rms = math.sqrt(float(res[0]) / b.size) if len(res) else 0.0
    return WeylFit(float(coef[0]), float(coef[1]), rms)


# ---------------------------------------------------------------------------
# correlations of the extended map on I x S^1


def fejer_weights(M: int) -> np.ndarray:
    """Quadrature weights on [-1, 1] for the first-kind Chebyshev points cos((2k+1) pi / 2M)."""
    th = (2 * np.arange(M) + 1) * np.pi / (2 * M)
    j = np.arange(1, M // 2 + 1)
    return (2.0 / M) * (1 - 2 * np.sum(np.cos(2 * np.outer(th, j)) / (4 * j**2 - 1), axis=1))


@dataclass(frozen=True)
class CorrelationReport:
    n: np.ndarray
    values: np.ndarray
    leading: np.ndarray
    residual: np.ndarray
    lambda0: complex
    lambda1: complex
    fitted_rate: float
    mode_values: Mapping[int, np.ndarray] = field(default_factory=dict)
    truncation_ok: bool = True

    @property
    def expected_rate(self) -> float:
        return math.log(abs(self.lambda1))

    @property
    def rate_error(self) -> float:
        return abs(self.fitted_rate - self.expected_rate)


def envelope_rate(n: np.ndarray, r: np.ndarray, window: int = 8) -> float:
    """Exponential rate of |r_n|, fitted to its running maximum over ``window`` steps.

    The envelope is insensitive to the cancellations that oscillating
    complex eigenvalue pairs produce in |r_n|.
    """
    a = np.abs(np.asarray(r))
    if a.size <= window + 2:
        raise ValueError("series too short for the envelope window")
    env = np.array([a[k:k + window].max() for k in range(a.size - window + 1)])
    nn = np.asarray(n, float)[:env.size]
    ok = env > 0
    if ok.sum() < 3:
        return -math.inf
    return float(np.polyfit(nn[ok], np.log(env[ok]), 1)[0])


def correlation_check(ifs: IfsSystem, V: Callable, tau: Callable, u: Mapping[int, Callable],
                      v: Mapping[int, Callable], n_max: int = 30, nu_window: int = 2, M: int = 32,
                      n_min: int = 4) -> CorrelationReport:
    """<v | F^n u> for the skew extension (x, y) -> (F(x), y + tau) on I x R/Z.

    ``u`` and ``v`` map a frequency nu to the x-profile of their
    e^{2 pi i nu y} Fourier component. Each mode evolves under its own
    transfer matrix with b = 2 pi nu; the y-integral kills cross terms. The
    leading term comes from the nu = 0 eigenprojector for lambda_0, and the
    residual rate is compared with the next resonance over all retained modes.
    """
    if n_max < n_min + 10:
        raise ValueError("n_max too small for a decay fit")
    modes = sorted(set(u) & set(v))
    modes = [k for k in modes if abs(k) <= nu_window]
    if 0 not in modes:
        raise ValueError("the nu = 0 component of u and v is needed for the leading term")
    scheme = CollocationScheme(M)
    qw = np.concatenate([0.5 * (hi - lo) * fejer_weights(M) for lo, hi in ifs.bounds])
    nodes = np.concatenate([scheme.nodes(lo, hi) for lo, hi in ifs.bounds])
    src = np.repeat(np.arange(ifs.n), M)
    steps = np.arange(n_max + 1)
    per_mode: dict[int, np.ndarray] = {}
    spectra: dict[int, np.ndarray] = {}
    lead = None
    for k in modes:
        T = build_matrix(ifs, SpectralParams(1.0, 2 * math.pi * k, "general", V, tau), scheme).matrix
        vec = np.asarray(u[k](nodes, src), dtype=complex)
        wv = qw * np.conj(np.asarray(v[k](nodes, src), dtype=complex))
        series = np.empty(n_max + 1, dtype=complex)
        for n in steps:
            series[n] = wv @ vec
            vec = T @ vec
        per_mode[k] = series
        ev, left, right = _eig_lr(T)
        spectra[k] = ev
        if k == 0:
            r0, l0 = right[:, 0], left[:, 0]
            proj = (wv @ r0) * (np.conj(l0) @ np.asarray(u[0](nodes, src), dtype=complex)) / (np.conj(l0) @ r0)
            lead = (ev[0], proj)
    lam0, c0 = lead
    total = sum(per_mode.values())
    leading = c0 * lam0 ** steps
    residual = total - leading
    others = np.concatenate([spectra[k][1:] if k == 0 else spectra[k] for k in modes])
    lam1 = complex(others[np.argmax(np.abs(others))])
    rate = envelope_rate(steps[n_min:], residual[n_min:])
    edge = sum(np.abs(per_mode[k]).sum() for k in modes if abs(k) == nu_window and nu_window > 0)
    ok = bool(edge <= 0.01 * np.abs(total).sum())
    return CorrelationReport(steps, total, leading, residual, complex(lam0), lam1, rate, per_mode, ok)


def _eig_lr(T: np.ndarray):
    import scipy.linalg
    try:
        ev, vl, vr = scipy.linalg.eig(T, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(-np.abs(ev), kind="stable")
    return ev[order], vl[:, order], vr[:, order]


def smooth_test_function(rng: np.random.Generator, degree: int = 4, amplitude: float = 1.0):
    """Random complex polynomial in x with coefficients of size ``amplitude``."""
    c = amplitude * (rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1))

    def f(x, i):
        return np.polyval(c, x)
    return f


def random_fourier_pair(seed: int, nu_window: int, decay: float = 0.1):
    """Random smooth real u, v on I x S^1 with Fourier components decaying like decay^|nu|."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(2):
        comp = {0: _real_part(smooth_test_function(rng))}
        for k in range(1, nu_window + 1):
            f = smooth_test_function(rng, amplitude=decay**k)
            comp[k] = f
            comp[-k] = _conjugate(f)
        out.append(comp)
    return out[0], out[1]


def _real_part(f):
    def g(x, i):
        return np.real(f(x, i)) + 0j
    return g


def _conjugate(f):
    def g(x, i):
        return np.conj(f(x, i))
    return g


__all__ = [
    "BudgetExceeded", "CorrelationReport", "DampingProfile", "GapScan", "GapScanRow", "WEYL_THRESHOLD", "WeylFit",
    "correlation_check", "damping_function", "damping_gamma_plus", "envelope_rate", "fejer_weights",
    "random_fourier_pair", "smooth_test_function", "spectral_radius_scan", "weyl_count", "weyl_counts", "weyl_fit",
]
