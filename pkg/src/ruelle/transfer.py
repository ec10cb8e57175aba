"""Chebyshev collocation of weighted composition operators and their spectra.

The operator discretised is psi -> sum_j w_{ij} . psi o phi_{ij} acting on
analytic functions on the intervals, with weight |phi'|^s in the ``gkw``
mode and |phi'| e^{V} e^{-i b tau} (evaluated on the image point) in the
``general`` mode. Its eigenvalues are the Ruelle resonances; the spectrum for
parameter s is the complex conjugate of the one for conj(s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg

from .ifs import IfsSystem, orbit_points, periodic_orbits


class NumericalError(RuntimeError):
    """Eigen-solver or interpolation failure."""


@dataclass(frozen=True)
class SpectralParams:
    a: float
    b: float = 0.0
    weight_mode: str = "gkw"
    V: Callable | None = field(default=None, compare=False)
    tau: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.weight_mode not in ("gkw", "general"):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")
        if self.weight_mode == "general" and (self.V is None or self.tau is None):
            raise ValueError("general mode needs V and tau descriptors")

    @property
    def s(self) -> complex:
        return complex(self.a, self.b)

    @property
    def nu(self) -> float:
        return self.b / (2 * math.pi)

    @classmethod
    def from_s(cls, s: complex) -> SpectralParams:
        s = complex(s)
        return cls(s.real, s.imag)


def node_count(b: float, max_length: float, floor: int = 24, k: float = 1.5) -> int:
    """M(b) = max(floor, ceil(k * b * max|I|))."""
    return max(floor, int(math.ceil(k * abs(b) * max_length)))


@dataclass(frozen=True)
class CollocationScheme:
    """M nodes per interval.

    ``chebyshev``: first-kind Chebyshev points on each real interval with
    barycentric Lagrange interpolation (robust for oscillatory weights).
    ``circle``: M equispaced points on a circle of radius ``rho * |I|/2``
    around each interval centre; the matrix is then expressed in scaled
    Taylor coefficients, which grades it and keeps small eigenvalues
    accurate. Needs Moebius branches and weights analytic on the discs, so
    it is meant for moderate |b|.
    """

    M: int
    kind: str = "chebyshev"
    rho: float | None = None

    def __post_init__(self):
        if self.M < 4:
            raise ValueError("need at least 4 nodes per interval")
        if self.kind not in ("chebyshev", "circle"):
            raise ValueError(f"unknown collocation kind {self.kind!r}")

    def with_nodes(self, M: int) -> CollocationScheme:
        return replace(self, M=M)

    @property
    def reference_nodes(self) -> np.ndarray:
        k = np.arange(self.M)
        return np.cos((2 * k + 1) * np.pi / (2 * self.M))

    @property
    def bary_weights(self) -> np.ndarray:
        k = np.arange(self.M)
        return (-1.0) ** k * np.sin((2 * k + 1) * np.pi / (2 * self.M))

    def nodes(self, lo: float, hi: float) -> np.ndarray:
        return 0.5 * (lo + hi) + 0.5 * (hi - lo) * self.reference_nodes

    def lagrange(self, lo: float, hi: float, z: np.ndarray) -> np.ndarray:
        """Matrix L[p, l] = ell_l(z_p) of barycentric Lagrange basis values."""
        t = (2 * np.asarray(z, float) - (lo + hi)) / (hi - lo)
        xr = self.reference_nodes
        w = self.bary_weights
        diff = t[:, None] - xr[None, :]
        exact = diff == 0
        diff[exact] = 1.0
        q = w / diff
        L = q / q.sum(axis=1, keepdims=True)
        rows = exact.any(axis=1)
        if rows.any():
            L[rows] = exact[rows].astype(float)
        return L


def _disc_ok(ifs: IfsSystem, rho: float, q_max: float = 0.95) -> bool:
    ctr = ifs.bounds.mean(axis=1)
    rad = rho * 0.5 * np.diff(ifs.bounds, axis=1)[:, 0]
    t = np.exp(2j * np.pi * np.arange(64) / 64)
    for br in ifs.branches:
        i, j = br.source, br.target
        m = br.mobius
        if abs(m.c) * rad[i] >= 0.9 * abs(m.c * ctr[i] + m.d):
            return False
        z = m(ctr[i] + rad[i] * t)
        if np.max(np.abs(z - ctr[j])) > q_max * rad[j]:
            return False
    return True


def disc_radii(ifs: IfsSystem, rho: float | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """Centres and radii of the circle scheme; rho is picked automatically if None."""
    if not ifs.is_mobius:
        raise NumericalError("circle collocation needs Moebius branches")
    cands = (2.0, 1.75, 1.5, 1.25, 1.1, 1.0) if rho is None else (rho,)
    for r in cands:
        if _disc_ok(ifs, r, 0.95 if rho is None else 1.0):
            ctr = ifs.bounds.mean(axis=1)
            return ctr, r * 0.5 * np.diff(ifs.bounds, axis=1)[:, 0], r
    raise NumericalError("no disc radius maps every disc strictly into its target")


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    matrix: np.ndarray
    params: SpectralParams
    scheme: CollocationScheme
    ifs: IfsSystem

    @property
    def M(self) -> int:
        return self.scheme.M

    def block(self, i, j) -> np.ndarray:
        M = self.M
        return self.matrix[i * M:(i + 1) * M, j * M:(j + 1) * M]


def branch_weights(ifs: IfsSystem, params: SpectralParams, i, j, y):
    """Weight of branch (i, j) at source points y and the image points.

    Complex y uses the analytic continuation of log|phi'| from I_i.
    """
    z, logd = ifs.log_abs_derivative(i, j, y)
    if params.weight_mode == "gkw":
        w = np.exp(params.s * logd)
    else:
        w = np.exp(logd + params.V(z, i, j) - 1j * params.b * params.tau(z, i, j))
    return w, z


def build_matrix(ifs: IfsSystem, params: SpectralParams, scheme: CollocationScheme) -> TransferMatrix:
    if scheme.kind == "circle":
        return _build_circle(ifs, params, scheme)
    N, M = ifs.n, scheme.M
    T = np.zeros((N * M, N * M), dtype=complex)
    for i in range(N):
        lo_i, hi_i = ifs.bounds[i]
        y = scheme.nodes(lo_i, hi_i)
        for j in np.flatnonzero(ifs.A[i]):
            w, z = branch_weights(ifs, params, i, j, y)
            lo_j, hi_j = ifs.bounds[j]
            if np.any(z <= lo_j) or np.any(z >= hi_j):
                raise NumericalError(f"branch {i}->{j} maps collocation nodes outside I_{j}")
            T[i * M:(i + 1) * M, j * M:(j + 1) * M] = w[:, None] * scheme.lagrange(lo_j, hi_j, z)
    if not np.all(np.isfinite(T)):
        raise NumericalError("non-finite matrix entries")
    return TransferMatrix(T, params, scheme, ifs)


def _build_circle(ifs, params, scheme):
    N, M = ifs.n, scheme.M
    ctr, rad, rho = disc_radii(ifs, scheme.rho)
    unit = np.exp(2j * np.pi * np.arange(M) / M)
    powers = np.arange(M)
    T = np.zeros((N * M, N * M), dtype=complex)
    for i in range(N):
        y = ctr[i] + rad[i] * unit
        for j in np.flatnonzero(ifs.A[i]):
            w, z = branch_weights(ifs, params, i, j, y)
            u = (z - ctr[j]) / rad[j]
            if np.max(np.abs(u)) >= 1.0:
                raise NumericalError(f"branch {i}->{j} maps the disc around I_{i} outside the disc around I_{j}")
            # column m: Taylor coefficients of w * u^m in the scaled variable on disc i
            T[i * M:(i + 1) * M, j * M:(j + 1) * M] = np.fft.fft(w[:, None] * u[:, None] ** powers, axis=0) / M
    if not np.all(np.isfinite(T)):
        raise NumericalError("non-finite matrix entries")
    return TransferMatrix(T, params, replace(scheme, rho=rho), ifs)


@dataclass(frozen=True)
class ResonanceSet:
    eigenvalues: np.ndarray
    stable: np.ndarray
    params: SpectralParams
    M: int
    refined_M: int

    @property
    def stable_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.stable]

    def conjugated(self) -> ResonanceSet:
        """Same spectrum expressed for the conjugate parameter."""
        p = replace(self.params, b=-self.params.b) if self.params.weight_mode == "gkw" else self.params
        return ResonanceSet(np.conj(self.eigenvalues), self.stable, p, self.M, self.refined_M)

    def __len__(self):
        return len(self.eigenvalues)


def _eigvals(T: np.ndarray) -> np.ndarray:
    try:
        ev = scipy.linalg.eigvals(T, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed on {T.shape} matrix "
                             f"(norm {np.linalg.norm(T):.3g}): {exc}") from exc
    order = np.lexsort((np.angle(ev), -np.abs(ev)))
    return ev[order]


def match_stable(ev: np.ndarray, ref: np.ndarray, rel: float = 1e-6, abs_: float = 1e-8) -> np.ndarray:
    if ref.size == 0:
        return np.zeros(ev.shape, bool)
    dist = np.min(np.abs(ev[:, None] - ref[None, :]), axis=1)
    return dist <= np.maximum(abs_, rel * np.abs(ev))


def resonances(matrix: TransferMatrix, refine: int = 8, rel: float = 1e-6, abs_: float = 1e-8) -> ResonanceSet:
    """Eigenvalues sorted by decreasing modulus, flagged by M -> M + refine agreement."""
    if refine < 2:
        raise ValueError("refinement step must be >= 2")
    ev = _eigvals(matrix.matrix)
    finer = build_matrix(matrix.ifs, matrix.params, matrix.scheme.with_nodes(matrix.M + refine))
    ref = _eigvals(finer.matrix)
    return ResonanceSet(ev, match_stable(ev, ref, rel, abs_), matrix.params, matrix.M, matrix.M + refine)


def spectrum(ifs: IfsSystem, params: SpectralParams, M: int | None = None, refine: int = 8,
             kind: str = "chebyshev") -> ResonanceSet:
    M = node_count(params.b, ifs.max_length) if M is None else M
    return resonances(build_matrix(ifs, params, CollocationScheme(M, kind)), refine)


# ---------------------------------------------------------------------------
# periodic-orbit side


def orbit_weights(ifs: IfsSystem, params: SpectralParams, n: int, budget: int | None = None):
    """(weights, multipliers) of all period-n orbits."""
    orb = periodic_orbits(ifs, n, budget)
    mu = np.asarray(orb.multipliers)
    if params.weight_mode == "gkw":
        return np.exp(params.s * np.log(np.abs(mu))), mu
    xs, ds, src = orbit_points(ifs, orb)
    dst = np.roll(src, -1, axis=1)
    logw = np.sum(np.log(np.abs(ds)) + params.V(xs, src, dst) - 1j * params.b * params.tau(xs, src, dst), axis=1)
    return np.exp(logw), mu


def flat_trace(ifs: IfsSystem, params: SpectralParams, n: int, budget: int | None = None) -> complex:
    """Sum over period-n orbits of weight / (1 - phi_w'(x_w))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    w, mu = orbit_weights(ifs, params, n, budget)
    return complex(np.sum(w / (1.0 - mu)))


@dataclass(frozen=True)
class DeterminantValue:
    value: complex
    tail: float
    coefficients: np.ndarray
    diverging: bool

    def __complex__(self):
        return self.value

    def __abs__(self):
        return abs(self.value)


def determinant_coefficients(traces) -> np.ndarray:
    """Taylor coefficients of exp(-sum z^n t_n / n) via Newton's identities."""
    t = np.asarray(traces, dtype=complex)
    c = np.zeros(len(t) + 1, dtype=complex)
    c[0] = 1.0
    for m in range(1, len(t) + 1):
        c[m] = -np.dot(t[:m], c[m - 1::-1][:m]) / m
    return c


def dynamical_determinant(ifs: IfsSystem, params: SpectralParams, z: complex, n_max: int = 12,
                          budget: int | None = None) -> DeterminantValue:
    """d(z, s) = exp(-sum z^n/n Tr_flat) expanded as a power series in z up to z^n_max.

    The series of the exponential is re-summed into Taylor coefficients
    (cumulant to moment recursion), which converge super-exponentially
    because the flat traces come from a nuclear operator.
    """
    if n_max < 4:
        raise ValueError("n_max must be >= 4")
    traces = [flat_trace(ifs, params, n, budget) for n in range(1, n_max + 1)]
    return determinant_from_traces(traces, z)


def determinant_from_traces(traces, z: complex) -> DeterminantValue:
    c = determinant_coefficients(traces)
    terms = np.abs(c * complex(z) ** np.arange(len(c)))
    value = complex(np.polyval(c[::-1], complex(z)))
    k = max(2, len(terms) // 3)
    diverging = bool(terms[-1] > terms[-k] and terms[-1] > 1e-12)
    return DeterminantValue(value, float(terms[-1]), c, diverging)


def matrix_determinant(matrix: TransferMatrix, z: complex) -> complex:
    """det(I - z T) for the collocation matrix."""
    T = matrix.matrix
    sign, logdet = np.linalg.slogdet(np.eye(T.shape[0]) - complex(z) * T)
    return complex(sign * np.exp(logdet))
