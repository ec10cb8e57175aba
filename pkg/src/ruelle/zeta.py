"""Selberg zeta function: primitive-orbit product, determinant route and zeros."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .ifs import IfsSystem, Word, count_words, orbit_points, periodic_orbits
from .potentials import jacobian
from .transfer import (CollocationScheme, DeterminantValue, NumericalError, SpectralParams,
                       build_matrix, dynamical_determinant, node_count, resonances)

RESONANCE_TOL = 1e-4


@dataclass(frozen=True)
class PrimitiveOrbit:
    lyndon_word: Word
    length_gamma: float
    multiplier: float
    orientation: int = 1

    @property
    def period(self) -> int:
        return len(self.lyndon_word)


def lyndon_words(n_symbols: int, max_len: int) -> Iterator[tuple[int, ...]]:
    """Duval's generator: all Lyndon words over range(n_symbols) of length <= max_len, in lex order."""
    if n_symbols < 1 or max_len < 1:
        return
    w = [-1]
    while w:
        w[-1] += 1
        yield tuple(w)
        m = len(w)
        while len(w) < max_len:
            w.append(w[len(w) - m])
        while w and w[-1] == n_symbols - 1:
            w.pop()


def _lyndon_mask(words: np.ndarray, n_symbols: int) -> np.ndarray:
    """Rows that are strictly smaller than each of their proper rotations."""
    W, p = words.shape
    if p == 1:
        return np.ones(W, bool)
    base = np.int64(n_symbols)
    if p * math.log2(max(n_symbols, 2)) >= 62:
        keep = np.ones(W, bool)
        for k in range(1, p):
            rot = np.roll(words, -k, axis=1)
            diff = rot != words
            first = np.argmax(diff, axis=1)
            rows = np.arange(W)
            greater = diff.any(axis=1) & (rot[rows, first] > words[rows, first])
            keep &= greater
        return keep
    code = np.zeros(W, np.int64)
    for k in range(p):
        code = code * base + words[:, k]
    high = base ** (p - 1)
    keep = np.ones(W, bool)
    rot = code.copy()
    for k in range(1, p):
        lead = rot // high
        rot = (rot - lead * high) * base + lead
        keep &= rot > code
    return keep


@dataclass(frozen=True)
class PrimitiveOrbitTable:
    """Vectorised primitive orbits of one period."""

    words: np.ndarray
    lengths: np.ndarray
    signs: np.ndarray

    @property
    def period(self) -> int:
        return self.words.shape[1]


@lru_cache(maxsize=64)
def primitive_orbit_table(ifs: IfsSystem, period: int, budget: int | None = None) -> PrimitiveOrbitTable:
    orb = periodic_orbits(ifs, period, budget)
    keep = _lyndon_mask(np.asarray(orb.words, np.int64), ifs.n)
    mu = np.asarray(orb.multipliers)[keep]
    t = PrimitiveOrbitTable(np.asarray(orb.words)[keep], -np.log(np.abs(mu)), np.sign(mu).astype(int))
    for arr in (t.words, t.lengths, t.signs):
        arr.setflags(write=False)
    return t


def enumerate_primitive_orbits(ifs: IfsSystem, max_period: int, budget: int | None = None) -> list[PrimitiveOrbit]:
    """One representative (the Lyndon rotation) per primitive periodic orbit.

    |gamma| is the Birkhoff sum of J around the orbit, computed pointwise;
    it equals -log|multiplier| up to rounding.
    """
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    J = jacobian(ifs)
    out = []
    for p in range(1, max_period + 1):
        orb = periodic_orbits(ifs, p, budget)
        keep = _lyndon_mask(np.asarray(orb.words, np.int64), ifs.n)
        if not keep.any():
            continue
        xs, _, src = orbit_points(ifs, orb)
        dst = np.roll(src, -1, axis=1)
        length = np.sum(J(xs, src, dst), axis=1)[keep]
        for w, L, mu in zip(np.asarray(orb.words)[keep], length, np.asarray(orb.multipliers)[keep]):
            out.append(PrimitiveOrbit(Word(tuple(w), "cyclic"), float(L), float(abs(mu)), int(np.sign(mu))))
    return out


def primitive_counts(ifs: IfsSystem, max_period: int) -> list[int]:
    return [len(primitive_orbit_table(ifs, p).words) for p in range(1, max_period + 1)]


def necklace_identity_holds(ifs: IfsSystem, n: int) -> bool:
    """sum_{d | n} d * P_d == trace(A^n)."""
    counts = primitive_counts(ifs, n)
    lhs = sum(d * counts[d - 1] for d in range(1, n + 1) if n % d == 0)
    return lhs == count_words(ifs.A, n, "cyclic")


@dataclass(frozen=True)
class ZetaValue:
    value: complex
    last_band: float
    m_max: int
    max_period: int
    certified: bool

    def __complex__(self):
        return self.value

    def __abs__(self):
        return abs(self.value)


def default_m_max(ifs: IfsSystem, s: complex, floor: float = 1e-12) -> int:
    gmin = float(primitive_orbit_table(ifs, 1).lengths.min()) if len(primitive_orbit_table(ifs, 1).lengths) \
        else float(min(primitive_orbit_table(ifs, p).lengths.min() for p in (2, 3)
                       if len(primitive_orbit_table(ifs, p).lengths)))
    return max(0, int(math.ceil(-math.log(floor) / gmin - complex(s).real)))


def selberg_zeta_product(ifs: IfsSystem, s: complex, max_period: int = 12, m_max: int | None = None,
                         budget: int | None = None) -> ZetaValue:
    """prod_gamma prod_{m=0}^{m_max} (1 - sigma_gamma^m exp(-(s+m)|gamma|)).

    sigma_gamma is the sign of the orbit multiplier: orientation reversing
    orbits (odd Gauss words) alternate the sign of the m-th factor, which is
    what makes the product equal the determinant of the transfer operator.
    """
    s = complex(s)
    if m_max is None:
        m_max = default_m_max(ifs, s)
    m = np.arange(m_max + 1)
    log_prod = 0j
    band = 0.0
    for p in range(1, max_period + 1):
        t = primitive_orbit_table(ifs, p, budget)
        if not len(t.lengths):
            continue
        L = t.lengths[:, None]
        sig = t.signs[:, None].astype(float) ** m[None, :]
        f = 1.0 - sig * np.exp(-(s + m[None, :]) * L)
        log_prod += np.sum(np.log(f))
        if p == max_period:
            band = float(np.max(np.exp(-s.real * t.lengths)))
    value = complex(np.exp(log_prod))
    return ZetaValue(value, band, m_max, max_period, s.real > 1)


def zeta_via_determinant(ifs: IfsSystem, s: complex, n_max: int = 12, budget: int | None = None) -> DeterminantValue:
    """d(1, s) with the weight |phi'|^s."""
    if n_max < 6:
        raise ValueError("n_max must be >= 6")
    return dynamical_determinant(ifs, SpectralParams.from_s(s), 1.0, n_max, budget)


@dataclass(frozen=True)
class ResonanceVerdict:
    gap: float
    positive: bool
    nearest: complex


def resonance_condition(ifs: IfsSystem, s: complex, M: int | None = None, tol: float = RESONANCE_TOL,
                        kind: str = "chebyshev") -> ResonanceVerdict:
    """Is 1 a (stable) eigenvalue of the transfer matrix at parameter s?"""
    s = complex(s)
    M = node_count(s.imag, ifs.max_length) if M is None else M
    rs = resonances(build_matrix(ifs, SpectralParams.from_s(s), CollocationScheme(M, kind)))
    ev = rs.stable_eigenvalues
    if ev.size == 0:
        return ResonanceVerdict(math.inf, False, complex("nan"))
    k = int(np.argmin(np.abs(1.0 - ev)))
    gap = float(abs(1.0 - ev[k]))
    return ResonanceVerdict(gap, gap < tol, complex(ev[k]))


@dataclass(frozen=True)
class ZetaZero:
    s: complex
    modulus: float
    gap: float
    validated: bool
    converged: bool


def zero_search(ifs: IfsSystem, rect: tuple[float, float, float, float], grid_density: float = 10.0,
                refine_iters: int = 30, n_max: int = 10, tol: float = 1e-10) -> list[ZetaZero]:
    """Zeros of s -> d(1, s) in [re0, re1] x [im0, im1].

    Local minima of |d| on a grid seed a Newton iteration with a
    finite-difference derivative; zeros closer than a grid step are merged
    and each survivor is checked against the transfer spectrum. Candidates
    whose refinement stalls are kept with ``converged=False``.
    """
    re0, re1, im0, im1 = map(float, rect)
    if not (re0 <= re1 and im0 <= im1):
        raise ValueError("rect must be (re_min, re_max, im_min, im_max)")
    nr = max(2, int(math.ceil((re1 - re0) * grid_density)) + 1)
    ni = max(1, int(math.ceil((im1 - im0) * grid_density)) + 1)
    res = np.linspace(re0, re1, nr)
    ims = np.linspace(im0, im1, ni) if ni > 1 else np.array([im0])
    h = max((re1 - re0) / (nr - 1), (im1 - im0) / max(ni - 1, 1))

    def d(s):
        return zeta_via_determinant(ifs, s, n_max).value

    G = np.array([[abs(d(complex(x, y))) for x in res] for y in ims])
    pad = np.pad(G, 1, constant_values=np.inf)
    seeds = []
    for a in range(G.shape[0]):
        for b in range(G.shape[1]):
            nb = pad[a:a + 3, b:b + 3].copy()
            nb[1, 1] = np.inf
            if G[a, b] <= nb.min():
                seeds.append(complex(res[b], ims[a]))

    found: list[ZetaZero] = []
    for s in seeds:
        conv = False
        for _ in range(refine_iters):
            f = d(s)
            if abs(f) < tol:
                conv = True
                break
            eps = 1e-6 * max(1.0, abs(s))
            df = (d(s + eps) - d(s - eps)) / (2 * eps)
            if df == 0:
                break
            step = f / df
            if abs(step) > 2 * h:
                step *= 2 * h / abs(step)
            s = s - step
            if abs(step) < 1e-13 * max(1.0, abs(s)):
                conv = abs(d(s)) < 1e-6
                break
        if not (re0 - h <= s.real <= re1 + h and im0 - h <= s.imag <= im1 + h):
            continue
        if any(abs(z.s - s) < h for z in found):
            continue
        gap, ok = math.inf, False
        if conv:
            try:
                v = resonance_condition(ifs, s)
                gap, ok = v.gap, v.positive
            except NumericalError:
                pass
        found.append(ZetaZero(s, abs(d(s)), gap, ok, conv))
    found.sort(key=lambda z: (z.s.real, z.s.imag))
    return found
