"""Canonical map on T*I, future branches zeta_w and minimal captivity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ifs import (IfsSystem, Interval, Word, adaptive_cover, cylinder_bounds, is_admissible,
                  orbit_points, periodic_orbits, word_array)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    xi: float


@dataclass(frozen=True)
class PhaseBox:
    x_interval: Interval
    xi_interval: Interval


def canonical_apply(ifs: IfsSystem, tau_prime, branch: tuple[int, int], p: PhasePoint) -> PhasePoint:
    """(x, xi) -> (phi(x), xi / phi'(x) + tau'(phi(x)))."""
    i, j = branch
    if not ifs.intervals[i].contains(p.x):
        raise ValueError(f"x = {p.x} is outside I_{i}")
    ifs.branch(i, j)
    x1, xi1 = canonical_apply_array(ifs, tau_prime, i, j, np.array([p.x]), np.array([p.xi]))
    return PhasePoint(float(x1[0]), float(xi1[0]))


def canonical_apply_array(ifs: IfsSystem, tau_prime, i, j, x, xi):
    x1, d = ifs.apply(i, j, x)
    return x1, xi / d + tau_prime(x1, i, j)


def _image_samples(ifs: IfsSystem, samples: int = 2000):
    for br in ifs.branches:
        iv = ifs.intervals[br.source]
        y = np.linspace(iv.lo, iv.hi, samples)
        yield br.source, br.target, y, br(y)


def max_tau_prime(ifs: IfsSystem, tau_prime, samples: int = 2000) -> float:
    """Sampled sup of |tau'| over the branch images."""
    m = 0.0
    for i, j, _, z in _image_samples(ifs, samples):
        m = max(m, float(np.max(np.abs(tau_prime(z, i, j)))))
    return m


def default_kappa(ifs: IfsSystem) -> float:
    return 0.5 * (1.0 + 1.0 / ifs.theta)


def escape_radius(ifs: IfsSystem, tau_prime, kappa: float | None = None, margin: float = 1.02) -> float:
    """R = margin * max|tau'| / (1/theta - kappa): beyond R every branch expands xi by kappa."""
    kappa = default_kappa(ifs) if kappa is None else kappa
    if not (1.0 < kappa < 1.0 / ifs.theta):
        raise ValueError(f"kappa must lie in (1, 1/theta) = (1, {1 / ifs.theta:.6g})")
    return margin * max_tau_prime(ifs, tau_prime) / (1.0 / ifs.theta - kappa)


def local_escape_radius(ifs: IfsSystem, tau_prime, kappa: float = 1.02, margin: float = 1.02,
                        samples: int = 2000) -> float:
    """Smallest sampled R with |xi'| > kappa |xi| whenever |xi| > R.

    Branch by branch, |xi'| >= |xi| / |phi'(x)| - |tau'(x')|, so
    R = max |tau'(x')| / (1/|phi'(x)| - kappa) already forces the expansion;
    it is never larger than the uniform bound built from theta.
    """
    if not (1.0 < kappa < 1.0 / ifs.theta):
        raise ValueError(f"kappa must lie in (1, 1/theta) = (1, {1 / ifs.theta:.6g})")
    R = 0.0
    for i, j, y, z in _image_samples(ifs, samples):
        d = np.abs(ifs.apply(i, j, y)[1])
        R = max(R, float(np.max(np.abs(tau_prime(z, i, j)) / (1.0 / d - kappa))))
    return margin * R


@dataclass(frozen=True)
class ZetaBranch:
    word: Word
    n: int
    value: float
    error_bound: float


def _zeta_partial(ifs, tau_prime, path, x):
    """Truncated zeta along ``path`` at points x; also the composite derivative."""
    x = np.asarray(x, float)
    z = np.zeros_like(x)
    der = np.ones_like(x)
    for a, b in zip(path, path[1:]):
        x, d = ifs.apply(a, b, x)
        der = der * d
        z = z - der * tau_prime(x, a, b)
    return z, der


def zeta_branch_eval(ifs: IfsSystem, tau_prime, word_future: Word, x: float, n: int | None = None) -> ZetaBranch:
    """zeta_w(x) = -sum_{k>=1} phi'_{w_{0,k}}(x) tau'(phi_{w_{0,k}}(x)) truncated at k = n.

    A word shorter than n + 1 is extended periodically.
    """
    syms = word_future.symbols
    if word_future.kind == "cyclic":
        syms = (syms[-1],) + syms
    n = len(syms) - 1 if n is None else n
    if n < 1:
        raise ValueError("n must be >= 1")
    if not ifs.intervals[syms[0]].contains(x):
        raise ValueError(f"x = {x} is outside I_{syms[0]}")
    path = list(syms)
    if len(path) < n + 1:
        period = path[1:] if word_future.kind == "cyclic" else path
        while len(path) < n + 1:
            path.append(period[(len(path) - 1) % len(period)] if word_future.kind == "cyclic"
                        else period[len(path) % len(period)])
    path = tuple(path[:n + 1])
    if not is_admissible(ifs, Word(path, "future")):
        raise ValueError(f"future word {path} is not admissible")
    z, _ = _zeta_partial(ifs, tau_prime, path, np.array([x]))
    bound = ifs.theta ** n * max_tau_prime(ifs, tau_prime) / (1.0 - ifs.theta)
    return ZetaBranch(Word(path, "future"), n, float(z[0]), bound)


@dataclass(frozen=True)
class TrappedPoints:
    x: np.ndarray
    xi: np.ndarray
    words: np.ndarray

    def __len__(self):
        return len(self.x)

    def points(self) -> list[PhasePoint]:
        return [PhasePoint(float(a), float(b)) for a, b in zip(self.x, self.xi)]


def trapped_set_points(ifs: IfsSystem, tau_prime, period: int, budget: int | None = None) -> TrappedPoints:
    """Phase points of all period-n orbits: base point and zeta of the periodic future.

    The periodic series is summed exactly: one period of terms divided by
    (1 - multiplier).
    """
    orb = periodic_orbits(ifs, period, budget)
    xs, ds, src = orbit_points(ifs, orb)
    dst = np.roll(src, -1, axis=1)
    cum = np.cumprod(ds, axis=1)
    terms = cum * tau_prime(xs, src, dst)
    zeta = -np.sum(terms, axis=1) / (1.0 - cum[:, -1])
    return TrappedPoints(np.asarray(orb.points), zeta, np.asarray(orb.words))


def eta_transform(p: PhasePoint, det_sign: int) -> float:
    """eta = x - 2 D / xi."""
    if p.xi == 0:
        raise ZeroDivisionError("eta undefined on the zero section")
    return p.x - 2.0 * det_sign / p.xi


def eta_inverse(x: float, eta: float, det_sign: int) -> PhasePoint:
    """xi = 2 D / (x - eta)."""
    if x == eta:
        raise ZeroDivisionError("xi undefined for x == eta")
    return PhasePoint(x, 2.0 * det_sign / (x - eta))


# ---------------------------------------------------------------------------
# captivity by box enclosures


@dataclass
class CaptivityVerdict:
    status: str                  # captive | violated | inconclusive
    depth: int
    cells: int
    max_multiplicity: int
    witness: tuple | None = None
    method: str = "boxes"
    details: dict = field(default_factory=dict)

    @property
    def captive(self) -> bool:
        return self.status == "captive"

    def certificate(self) -> dict:
        out = {"status": self.status, "method": self.method, "depth": self.depth, "cells": self.cells,
               "max_multiplicity": self.max_multiplicity}
        if self.witness is not None:
            out["witness"] = list(self.witness)
        out.update(self.details)
        return out


def _path_code(paths: np.ndarray, n: int) -> np.ndarray:
    code = np.zeros(len(paths), np.int64)
    for k in range(paths.shape[1]):
        code = code * n + paths[:, k]
    return code


def _strip_state(ifs, tau_prime, futures, x):
    """zeta_{v,a}(x) and phi'_v(x) for rows of futures (paths) at points x (same rows)."""
    z = np.zeros_like(x)
    der = np.ones_like(x)
    for k in range(futures.shape[1] - 1):
        a, b = futures[:, k], futures[:, k + 1]
        x, d = ifs.apply(a, b, x)
        der = der * d
        z = z - der * tau_prime(x, a, b)
    return z, der


def _cells(ifs, tau_prime, a, R, budget, b=None):
    """Box enclosures of the cells of K_{a,b} (b = a by default).

    Returns past paths, cylinder bounds, future paths, and for every
    (past, future) pair the index of its past and future and its xi-interval.
    """
    b = a if b is None else b
    past = word_array(ifs.A, a + 1, "past", budget)
    cyl = cylinder_bounds(ifs, past)
    fut = word_array(ifs.A, b + 1, "past", budget)  # same kind of path, read forward
    end = past[:, -1]
    pi, fi = [], []
    for e in range(ifs.n):
        P = np.flatnonzero(end == e)
        F = np.flatnonzero(fut[:, 0] == e)
        pi.append(np.repeat(P, len(F)))
        fi.append(np.tile(F, len(P)))
    pi = np.concatenate(pi)
    fi = np.concatenate(fi)
    if budget is not None and len(pi) > budget:
        from .ifs import BudgetExceeded
        raise BudgetExceeded(f"{len(pi)} cells exceed the budget {budget}")
    lo, hi = cyl[pi, 0], cyl[pi, 1]
    F = fut[fi]
    xs = np.stack([lo, 0.5 * (lo + hi), hi])
    zs = np.zeros_like(xs)
    ds = np.ones_like(xs)
    xlo, xhi = np.full(len(pi), -R), np.full(len(pi), R)
    for k in range(b):
        src, dst = F[:, k], F[:, k + 1]
        xs, d = ifs.apply(src, dst, xs)
        ds = ds * d
        zs = zs - ds * tau_prime(xs, src, dst)
        spread = zs.max(axis=0) - zs.min(axis=0)
        # curvature allowance on top of the three-point range, plus rounding
        pad = 0.5 * spread + 1e-12 * (1.0 + np.abs(zs).max(axis=0))
        dmax = np.abs(ds).max(axis=0) * R
        # the exact strips shrink with k, so intersecting keeps a valid enclosure
        xlo = np.maximum(xlo, zs.min(axis=0) - dmax - pad)
        xhi = np.minimum(xhi, zs.max(axis=0) + dmax + pad)
    return past, cyl, fut, pi, fi, xlo, xhi


def _in_future_strip(ifs, tau_prime, x, xi, start, a, R, futs):
    """Exact test: some future v from ``start`` keeps |xi_k| <= R along a steps."""
    F = futs[futs[:, 0] == start]
    xs = np.full(len(F), x)
    z = np.full(len(F), xi)
    ok = np.ones(len(F), bool)
    for k in range(a):
        xs, z = canonical_apply_array(ifs, tau_prime, F[:, k], F[:, k + 1], xs, z)
        ok &= np.abs(z) <= R * (1 + 1e-12) + 1e-300
    return bool(ok.any())


def trapped_boxes(ifs: IfsSystem, tau_prime, a: int, b: int, R: float | None = None,
                  budget: int | None = 5_000_000) -> np.ndarray:
    """Enclosures of K_{a,b} as rows (x_lo, x_hi, xi_lo, xi_hi), one per (past, future) pair."""
    if a < 0 or b < 0:
        raise ValueError("depths must be >= 0")
    R = local_escape_radius(ifs, tau_prime) if R is None else R
    _, cyl, _, pi, _, xlo, xhi = _cells(ifs, tau_prime, a, R, budget, b)
    return np.stack([cyl[pi, 0], cyl[pi, 1], xlo, xhi], axis=1)


def captivity_check_boxes(ifs: IfsSystem, tau_prime, depth: int, kappa: float | None = None,
                          budget: int | None = 5_000_000, R: float | None = None) -> CaptivityVerdict:
    """Does every point of K_{a,a} have at most one branch image in K_{a,a}?

    Cells pair a past cylinder of depth a with a future strip of depth a.
    Each cell box is pushed through every admissible branch with interval
    arithmetic (the map is affine in xi) and tested against the strips over
    the target cylinder. All counts <= 1 certifies captivity; a count >= 2
    is confirmed by an exact witness point or reported as inconclusive.
    The strip radius R defaults to the branchwise escape radius.
    """
    a = depth
    if a < 1:
        raise ValueError("depth must be >= 1")
    if R is None:
        R = local_escape_radius(ifs, tau_prime) if kappa is None else escape_radius(ifs, tau_prime, kappa)
    n = ifs.n
    past, cyl, fut, pi, fi, slo, shi = _cells(ifs, tau_prime, a, R, budget)
    ncells = len(pi)

    # target strips sorted by (past cylinder, lower end); running max of the upper end per group
    order = np.lexsort((slo, pi))
    g_pi, g_lo, g_hi = pi[order], slo[order], shi[order]
    starts = np.searchsorted(g_pi, np.arange(len(past)), "left")
    # segmented running maximum, exact: work on integer ranks lifted per group
    hi_sorted = np.sort(g_hi)
    rank = np.searchsorted(hi_sorted, g_hi, "left").astype(np.int64)
    lift = g_pi.astype(np.int64) * (len(g_hi) + 1)
    run_hi = hi_sorted[np.maximum.accumulate(rank + lift) - lift]
    glob = np.sort(g_lo)
    T = len(glob) + 1
    strip_key = g_pi.astype(np.int64) * T + np.searchsorted(glob, g_lo, "left")
    past_code = _path_code(past, n)

    counts = np.zeros(ncells, np.int64)
    e = past[pi, -1]
    for j in range(n):
        src = np.flatnonzero(ifs.A[e, j] == 1)
        if not len(src):
            continue
        p = pi[src]
        xl, xh = cyl[p, 0], cyl[p, 1]
        ee = e[src]
        x0, d0 = ifs.apply(ee, j, xl)
        x1, d1 = ifs.apply(ee, j, xh)
        inv = np.stack([1.0 / d0, 1.0 / d1])
        prod = np.stack([inv * slo[src], inv * shi[src]])
        t0, t1 = tau_prime(x0, ee, j), tau_prime(x1, ee, j)
        ilo = prod.min(axis=(0, 1)) + np.minimum(t0, t1)
        ihi = prod.max(axis=(0, 1)) + np.maximum(t0, t1)
        tol = 1e-12 * (1.0 + np.maximum(np.abs(ilo), np.abs(ihi)))
        ilo, ihi = ilo - tol, ihi + tol
        # target cylinder: past shifted by one with j appended
        tgt = np.concatenate([past[p, 1:], np.full((len(p), 1), j)], axis=1)
        tidx = np.searchsorted(past_code, _path_code(tgt, n))
        qkey = tidx.astype(np.int64) * T + np.searchsorted(glob, ihi, "right") - 1
        pos = np.searchsorted(strip_key, qkey, "right") - 1
        valid = (pos >= 0) & (pos >= starts[tidx])
        valid[valid] &= g_pi[pos[valid]] == tidx[valid]
        hit = np.zeros(len(src), bool)
        hit[valid] = run_hi[pos[valid]] >= ilo[valid]
        counts[src] += hit

    mx = int(counts.max()) if ncells else 0
    if mx <= 1:
        return CaptivityVerdict("captive", a, ncells, mx, details={"R": R})

    # look for a genuine witness in the offending cells
    bad = np.flatnonzero(counts >= 2)
    for c in bad[:2000]:
        p, f = pi[c], fi[c]
        lo, hi = cyl[p]
        for x in (0.5 * (lo + hi), lo, hi):
            z, d = _strip_state(ifs, tau_prime, fut[f][None, :], np.array([x]))
            for t in (0.0, -0.5, 0.5, -1.0, 1.0):
                xi = float(z[0] + t * abs(d[0]) * R)
                if not _in_future_strip(ifs, tau_prime, x, xi, fut[f][0], a, R, fut):
                    continue
                hits = 0
                for j in np.flatnonzero(ifs.A[past[p, -1]]):
                    x1, xi1 = canonical_apply_array(ifs, tau_prime, past[p, -1], j, np.array([x]), np.array([xi]))
                    if _in_future_strip(ifs, tau_prime, float(x1[0]), float(xi1[0]), j, a, R, fut):
                        hits += 1
                if hits >= 2:
                    return CaptivityVerdict("violated", a, ncells, mx, witness=(float(x), xi),
                                            details={"R": R, "branches_hit": hits})
    return CaptivityVerdict("inconclusive", a, ncells, mx,
                            details={"R": R, "overlapping_cells": int(len(bad)),
                                     "suggestion": f"retry with depth {a + 1}"})


def find_captive_depth(ifs: IfsSystem, tau_prime, max_depth: int = 8, budget: int | None = 5_000_000) -> CaptivityVerdict:
    """Smallest a <= max_depth certifying captivity.

    A double hit at depth a only says that K_{a,a} is too coarse, since the
    neighbourhoods shrink to the trapped set as a grows. So the search goes
    on past violations, and when no depth certifies it reports the deepest
    violation found (or the last verdict if every one was inconclusive).
    Running out of budget ends the search early.
    """
    from .ifs import BudgetExceeded
    last, violated = None, None
    for a in range(1, max_depth + 1):
        try:
            v = captivity_check_boxes(ifs, tau_prime, a, budget=budget)
        except BudgetExceeded:
            if last is None:
                raise
            break
        if v.captive:
            return v
        last = v
        if v.status == "violated":
            violated = v
    return violated if violated is not None else last


# ---------------------------------------------------------------------------
# captivity through the eta coordinate


@dataclass(frozen=True)
class Arc:
    """Open arc of the extended line, running from ``start`` upward to ``end``
    (through infinity when start > end). Infinite endpoints are allowed."""

    start: float
    end: float

    def angles(self) -> list[tuple[float, float]]:
        a, b = _angle(self.start), _angle(self.end)
        if a < b:
            return [(a, b)]
        return [(a, math.pi), (-math.pi, b)]


def _angle(x: float) -> float:
    if math.isinf(x):
        return -math.pi if x < 0 else math.pi
    return 2.0 * math.atan(x)


def _mobius_point(m, x: float) -> float:
    if math.isinf(x):
        return m.a / m.c if m.c != 0 else math.copysign(math.inf, x * m.a / m.d)
    den = m.c * x + m.d
    if den == 0:
        return math.inf
    return (m.a * x + m.b) / den


def arc_image(m, arc: Arc) -> Arc:
    s, e = _mobius_point(m, arc.start), _mobius_point(m, arc.end)
    if m.det > 0:
        return Arc(s, e)
    return Arc(e, s)


def arcs_disjoint(p: Arc, q: Arc) -> bool:
    for a0, a1 in p.angles():
        for b0, b1 in q.angles():
            if max(a0, b0) < min(a1, b1) - 1e-15:
                return False
    return True


def subtract_interval(arc: Arc, iv: Interval) -> list[Arc]:
    """arc minus a closed finite interval, as open arcs (arc given as a finite open interval or ray)."""
    if arc.start < arc.end:
        pieces = []
        if arc.start < iv.lo:
            pieces.append(Arc(arc.start, min(arc.end, iv.lo)))
        if arc.end > iv.hi:
            pieces.append(Arc(max(arc.start, iv.hi), arc.end))
        return pieces
    raise ValueError("wrapping arcs are not supported here")


def captivity_check_mobius(ifs: IfsSystem, basin: list[Arc] | Arc | None = None) -> CaptivityVerdict:
    """Pairwise disjointness of the preimage basins B_j = g_j^{-1}(B minus I_j).

    Trapped eta values over I_j never lie in I_j itself, so the part of the
    basin inside I_j is dropped before pulling back (this changes nothing when
    B misses I, as for the Gauss family). Defaults: ]-inf, -1[ for Gauss,
    the union of the intervals for Schottky systems.
    """
    if not ifs.is_mobius:
        raise ValueError("Moebius-backed system required")
    if basin is None:
        basin = default_basin(ifs)
    arcs = [basin] if isinstance(basin, Arc) else list(basin)
    pre: dict[int, list[Arc]] = {}
    for j in range(ifs.n):
        srcs = np.flatnonzero(ifs.A[:, j])
        g = ifs.branch(int(srcs[0]), j).mobius
        ginv = g.inverse()
        parts = []
        for arc in arcs:
            for piece in subtract_interval(arc, ifs.intervals[j]):
                parts.append(arc_image(ginv, piece))
        pre[j] = parts
    clash = None
    for j in range(ifs.n):
        for k in range(j + 1, ifs.n):
            if any(not arcs_disjoint(p, q) for p in pre[j] for q in pre[k]):
                clash = (j, k)
                break
        if clash:
            break
    status = "captive" if clash is None else "violated"
    details = {"preimages": {j: [(p.start, p.end) for p in v] for j, v in pre.items()}}
    if clash:
        details["overlap"] = clash
    return CaptivityVerdict(status, 0, ifs.n, 1 if clash is None else 2, method="mobius", details=details)


def default_basin(ifs: IfsSystem) -> list[Arc]:
    if ifs.kind == "gauss":
        return [Arc(-math.inf, -1.0)]
    return [Arc(iv.lo, iv.hi) for iv in ifs.intervals]


# ---------------------------------------------------------------------------
# dimension of the phase-space trapped set


def phase_points(ifs: IfsSystem, tau_prime, scale: float, budget: int = 20_000_000):
    """Sample of the phase trapped set at resolution ``scale``.

    Base points are midpoints of past cylinders shorter than ``scale``; each
    is paired with zeta of every future word refined until its branch
    derivative (which sets the spacing of the zeta curves) drops below
    ``scale``.
    """
    cov = adaptive_cover(ifs, scale)
    xs = 0.5 * (cov[:, 0] + cov[:, 1])
    home = ifs.locate(xs)
    out_x, out_xi = [], []
    total = 0
    for e in range(ifs.n):
        X = xs[home == e]
        if not len(X):
            continue
        stack = [(e, X, np.zeros_like(X), np.ones_like(X))]
        while stack:
            last, x, z, der = stack.pop()
            if np.max(np.abs(der)) * ifs.max_length <= scale:
                out_x.append(X)
                out_xi.append(z)
                total += len(X)
                if total > budget:
                    from .ifs import BudgetExceeded
                    raise BudgetExceeded(f"phase sample exceeds {budget} points")
                continue
            for j in np.flatnonzero(ifs.A[last]):
                x1, d = ifs.apply(last, j, x)
                d1 = der * d
                stack.append((int(j), x1, z - d1 * tau_prime(x1, last, int(j)), d1))
    return np.concatenate(out_x), np.concatenate(out_xi)


def box_count_2d(x: np.ndarray, y: np.ndarray, delta: float, offset: float = 0.0) -> int:
    """Occupied cells of the grid delta*(Z + offset)^2."""
    i = np.floor(x / delta + offset).astype(np.int64)
    k = np.floor(y / delta + offset).astype(np.int64)
    key = (i - i.min()) * (int(k.max() - k.min()) + 1) + (k - k.min())
    return int(np.unique(key).size)


GRID_OFFSETS = (0.0, 0.25, 0.5, 0.75)


def phase_dim_estimate(ifs: IfsSystem, tau_prime, depth: int = 16, scales: tuple[int, int] | None = None,
                       budget: int = 20_000_000) -> float:
    """2D box-counting dimension of the phase trapped set.

    Points are sampled at resolution 2^-depth; box sizes run over
    2^-(depth-11) ... 2^-(depth-5) unless ``scales`` (exponents) is given, the
    finest levels being biased by the finite sample. Log counts are averaged
    over a few shifted grids to damp lattice oscillations.
    """
    if not np.array_equal(ifs.A, ifs.A.T):
        raise ValueError("phase dimension needs a symmetric adjacency matrix")
    x, xi = phase_points(ifs, tau_prime, 2.0 ** -depth, budget)
    if np.ptp(x) == 0 and np.ptp(xi) == 0:
        return 0.0
    k0, k1 = scales if scales is not None else (max(1, depth - 11), depth - 5)
    ks = np.arange(k0, k1 + 1)
    logc = np.array([np.mean([math.log(box_count_2d(x, xi, 2.0 ** -k, o)) for o in GRID_OFFSETS]) for k in ks])
    slope, _ = np.polyfit(ks * math.log(2.0), logc, 1)
    return float(slope)
