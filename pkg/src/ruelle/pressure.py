"""Topological pressure of -beta*J and the Hausdorff dimension of K."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ifs import IfsSystem, Interval, periodic_orbits


class NoRootError(ValueError):
    """Pressure does not change sign on the bisection bracket."""

    def __init__(self, p0, p1):
        super().__init__(f"P(0) = {p0:.6g} and P(1) = {p1:.6g} do not bracket a zero")
        self.p0, self.p1 = p0, p1


@dataclass(frozen=True)
class PressureEstimate:
    beta: float
    value: float
    orbit_depth: int
    convergence_gap: float
    ratios: tuple = ()
    method: str = "ratio"

    def __float__(self):
        return self.value


def _chunked_sum(values: np.ndarray, workers: int) -> float:
    """Sum in fixed order; with workers > 1 partial sums are combined in chunk order."""
    if workers <= 1 or values.size < 4096:
        return float(np.sum(values))
    chunks = np.array_split(values, workers)
    with ThreadPoolExecutor(workers) as ex:
        parts = list(ex.map(np.sum, chunks))
    return float(math.fsum(parts))


def orbit_sum(ifs: IfsSystem, beta: float, n: int, budget: int | None = None, workers: int = 1) -> float:
    """S_n(beta) = sum over cyclic words of length n of |phi_w'(x_w)|^beta."""
    mult = np.abs(periodic_orbits(ifs, n, budget).multipliers)
    if beta == 0:
        return float(mult.size)
    return _chunked_sum(mult**beta, workers)


def _aitken(a, b, c):
    den = (c - b) - (b - a)
    if den == 0 or not np.isfinite(den):
        return c
    return c - (c - b) ** 2 / den


def pressure(ifs: IfsSystem, beta: float, depth: int = 10, accelerate: bool = False,
             budget: int | None = None, workers: int = 1) -> PressureEstimate:
    """P(beta) as log(S_n / S_{n-1}).

    With ``accelerate`` the ratio sequence is further passed through an
    Aitken delta-squared step, which removes the leading geometric error
    coming from the subleading eigenvalue; the gap is then the difference of
    consecutive extrapolated values.
    """
    if depth < 2:
        raise ValueError("depth must be >= 2")
    lo = depth - 4 if accelerate else depth - 2
    lo = max(lo, 1)
    S = [orbit_sum(ifs, beta, n, budget, workers) for n in range(lo, depth + 1)]
    if min(S) <= 0:
        raise ValueError("empty orbit sum; the adjacency graph has no cycles of this length")
    ratios = [math.log(S[k] / S[k - 1]) for k in range(1, len(S))]
    if accelerate and len(ratios) >= 4:
        a1 = _aitken(*ratios[-4:-1])
        a2 = _aitken(*ratios[-3:])
        return PressureEstimate(beta, a2, depth, abs(a2 - a1), tuple(ratios), "aitken")
    if len(ratios) == 1:
        gap = abs(ratios[-1] - math.log(S[0]))
    else:
        gap = abs(ratios[-1] - ratios[-2])
    return PressureEstimate(beta, ratios[-1], depth, gap, tuple(ratios))


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    uncertainty: float
    depth: int
    iterations: int
    p_at_root: float

    def __float__(self):
        return self.value


def hausdorff_dimension(ifs: IfsSystem, depth: int = 10, tol: float = 1e-10,
                        accelerate: bool = True, workers: int = 1, budget: int | None = None) -> DimensionEstimate:
    """Zero of beta -> P(beta) on [0, 1] by bisection."""
    if tol <= 0:
        raise ValueError("tol must be positive")

    def P(b):
        return pressure(ifs, b, depth, accelerate=accelerate, budget=budget, workers=workers)

    p0, p1 = P(0.0), P(1.0)
    if abs(p0.value) <= tol:
        # K is a finite orbit: zero-dimensional
        return DimensionEstimate(0.0, p0.convergence_gap, depth, 0, p0.value)
    if not (p0.value > 0 > p1.value):
        raise NoRootError(p0.value, p1.value)
    lo, hi = 0.0, 1.0
    it = 0
    mid = P(0.5)
    while hi - lo > tol:
        it += 1
        m = 0.5 * (lo + hi)
        mid = P(m)
        if mid.value > 0:
            lo = m
        else:
            hi = m
        if abs(mid.value) < tol * 1e-3:
            lo = hi = m
            break
    beta = 0.5 * (lo + hi)
    # propagate the pressure truncation gap through |P'(beta)|
    h = 1e-4
    slope = (P(min(beta + h, 1.0)).value - P(max(beta - h, 0.0)).value) / (min(beta + h, 1.0) - max(beta - h, 0.0))
    unc = mid.convergence_gap / abs(slope) if slope else math.inf
    return DimensionEstimate(beta, unc + (hi - lo), depth, it, mid.value)


def _merge(cover: np.ndarray) -> np.ndarray:
    cover = cover[np.argsort(cover[:, 0], kind="stable")]
    reach = np.maximum.accumulate(cover[:, 1])
    start = np.concatenate([[True], cover[1:, 0] > reach[:-1]])
    idx = np.flatnonzero(start)
    ends = np.append(idx[1:], len(cover)) - 1
    return np.stack([cover[idx, 0], reach[ends]], axis=1)


def box_count(cover: np.ndarray, delta: float) -> int:
    """Number of grid cells [k delta, (k+1) delta] meeting a union of closed intervals."""
    iv = _merge(np.asarray(cover, float))
    k0 = np.floor(iv[:, 0] / delta).astype(np.int64)
    k1 = np.floor(iv[:, 1] / delta).astype(np.int64)
    # merged intervals are disjoint and sorted; neighbours can only share an end cell
    shared = np.count_nonzero(k0[1:] == k1[:-1])
    return int(np.sum(k1 - k0 + 1) - shared)


def box_dimension_estimate(cover: Sequence[Interval] | np.ndarray, delta_grid: Sequence[float]) -> float:
    """Least-squares slope of log N(delta) against log(1/delta)."""
    arr = np.asarray([[iv.lo, iv.hi] for iv in cover] if not isinstance(cover, np.ndarray) else cover, float)
    if arr.size == 0:
        raise ValueError("empty cover")
    deltas = np.asarray(sorted(set(float(d) for d in delta_grid), reverse=True))
    deltas = deltas[deltas > 0]
    if deltas.size < 2:
        raise ValueError("need at least two positive scales")
    counts = np.array([box_count(arr, d) for d in deltas])
    slope, _ = np.polyfit(np.log(1.0 / deltas), np.log(counts), 1)
    return float(slope)
