"""Iterated function schemes on the line.

Symbols are 0-based interval indices throughout. A word of kind ``past`` or
``future`` is a path ``(w_0, ..., w_n)`` through the adjacency graph and
denotes the composition ``phi_{w_{n-1},w_n} o ... o phi_{w_0,w_1}`` on
``I_{w_0}``. A ``cyclic`` word ``(w_0, ..., w_{p-1})`` is the closed path
``w_{p-1} -> w_0 -> ... -> w_{p-1}``; for the built-in Moebius systems
(``phi_{i,j} = g_j``) it is the map ``g_{w_{p-1}} o ... o g_{w_0}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np

#: Hard cap on the number of words an orbit enumeration may produce.
DEFAULT_ORBIT_BUDGET = 20_000_000

DET_TOL = 1e-12


class BudgetExceeded(RuntimeError):
    """Raised when an enumeration would exceed the configured word budget."""


class IfsError(ValueError):
    """Invalid construction of an iterated function scheme."""


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise IfsError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, strict=False):
        if strict:
            return (x > self.lo) & (x < self.hi)
        return (x >= self.lo) & (x <= self.hi)

    def intersects(self, other: Interval) -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def __iter__(self):
        yield self.lo
        yield self.hi


@dataclass(frozen=True)
class MobiusMap:
    """Fractional linear map x -> (a x + b) / (c x + d) with det = +-1."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if abs(abs(self.det) - 1.0) > DET_TOL:
            raise IfsError(f"Moebius determinant must be +-1, got {self.det!r}")

    @classmethod
    def normalized(cls, a, b, c, d) -> MobiusMap:
        """Rescale the coefficients so that |det| = 1."""
        det = a * d - b * c
        if det == 0:
            raise IfsError("singular Moebius matrix")
        k = 1.0 / math.sqrt(abs(det))
        return cls(a * k, b * k, c * k, d * k)

    @classmethod
    def from_matrix(cls, m) -> MobiusMap:
        (a, b), (c, d) = np.asarray(m, dtype=float)
        return cls(float(a), float(b), float(c), float(d))

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    @property
    def sign(self) -> int:
        return 1 if self.det > 0 else -1

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def __call__(self, x):
        return (self.a * x + self.b) / (self.c * x + self.d)

    def derivative(self, x):
        return self.det / (self.c * x + self.d) ** 2

    def second_derivative(self, x):
        return -2.0 * self.c * self.det / (self.c * x + self.d) ** 3

    def inverse(self) -> MobiusMap:
        s = self.sign
        return MobiusMap(s * self.d, -s * self.b, -s * self.c, s * self.a)

    def compose(self, other: MobiusMap) -> MobiusMap:
        """Return self o other."""
        m = self.matrix @ other.matrix
        return MobiusMap.normalized(*m.ravel())

    @property
    def pole(self) -> float:
        return -self.d / self.c if self.c != 0 else math.inf


@dataclass(frozen=True, eq=False)
class BranchMap:
    """Contraction phi_{source,target}: I_source -> I_target.

    Either Moebius backed, or given by vectorised callables ``func``,
    ``deriv`` and ``inv`` (the generic smooth extension point).
    """

    source: int
    target: int
    mobius: MobiusMap | None = None
    func: Callable | None = None
    deriv: Callable | None = None
    inv: Callable | None = None

    def __post_init__(self):
        if self.mobius is None and (self.func is None or self.deriv is None):
            raise IfsError("branch needs a Moebius map or func+deriv callables")

    def __call__(self, x):
        if self.mobius is not None:
            return self.mobius(x)
        return self.func(x)

    def derivative(self, x):
        if self.mobius is not None:
            return self.mobius.derivative(x)
        return self.deriv(x)

    def inverse(self, y):
        if self.mobius is not None:
            return self.mobius.inverse()(y)
        if self.inv is None:
            raise IfsError("generic branch has no inverse")
        return self.inv(y)

    def __eq__(self, other):
        if not isinstance(other, BranchMap):
            return NotImplemented
        if self.mobius is None or other.mobius is None:
            return self is other
        return (self.source, self.target, self.mobius) == (other.source, other.target, other.mobius)

    def __hash__(self):
        if self.mobius is None:
            return id(self)
        return hash((self.source, self.target, self.mobius))


@dataclass(frozen=True)
class Word:
    symbols: tuple[int, ...]
    kind: str = "past"

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if self.kind not in ("past", "future", "cyclic"):
            raise ValueError(f"unknown word kind {self.kind!r}")
        if not self.symbols:
            raise ValueError("empty word")

    def __len__(self):
        return len(self.symbols)

    def path(self) -> tuple[int, ...]:
        """Interval path traversed by the word (closed for cyclic words)."""
        if self.kind == "cyclic":
            return (self.symbols[-1],) + self.symbols
        return self.symbols

    def rotate(self, k: int = 1) -> Word:
        s = self.symbols
        k %= len(s)
        return Word(s[k:] + s[:k], self.kind)


@dataclass(frozen=True)
class IfsSystem:
    intervals: tuple[Interval, ...]
    adjacency: tuple[tuple[int, ...], ...]
    branches: tuple[BranchMap, ...]
    theta: float
    kind: str = "custom"
    meta: tuple = ()

    def __post_init__(self):
        n = len(self.intervals)
        A = self.A
        if A.shape != (n, n) or not np.isin(A, (0, 1)).all():
            raise IfsError("adjacency must be an N x N 0/1 matrix")
        keys = {(br.source, br.target) for br in self.branches}
        want = {(i, j) for i in range(n) for j in range(n) if A[i, j]}
        if keys != want or len(keys) != len(self.branches):
            raise IfsError("branches must match the adjacency matrix one-to-one")
        if not (0.0 < self.theta < 1.0):
            raise IfsError(f"contraction bound must lie in (0, 1), got {self.theta}")

    @property
    def n(self) -> int:
        return len(self.intervals)

    @cached_property
    def A(self) -> np.ndarray:
        A = np.array(self.adjacency, dtype=np.int64)
        A.setflags(write=False)
        return A

    @cached_property
    def branch_table(self) -> dict[tuple[int, int], BranchMap]:
        return {(br.source, br.target): br for br in self.branches}

    def branch(self, i: int, j: int) -> BranchMap:
        try:
            return self.branch_table[(i, j)]
        except KeyError:
            raise IfsError(f"transition {i}->{j} is not admissible") from None

    @cached_property
    def is_mobius(self) -> bool:
        return all(br.mobius is not None for br in self.branches)

    @cached_property
    def coef(self) -> np.ndarray:
        """(N, N, 4) Moebius coefficients (a, b, c, d); NaN where forbidden."""
        if not self.is_mobius:
            raise IfsError("coefficient table requires Moebius branches")
        C = np.full((self.n, self.n, 4), np.nan)
        for br in self.branches:
            m = br.mobius
            C[br.source, br.target] = (m.a, m.b, m.c, m.d)
        C.setflags(write=False)
        return C

    @cached_property
    def bounds(self) -> np.ndarray:
        B = np.array([[iv.lo, iv.hi] for iv in self.intervals])
        B.setflags(write=False)
        return B

    @property
    def max_length(self) -> float:
        return max(iv.length for iv in self.intervals)

    def locate(self, x) -> np.ndarray:
        """Index of the interval containing each x, or -1."""
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, -1, dtype=np.int64)
        for k, iv in enumerate(self.intervals):
            out[iv.contains(x)] = k
        return out

    # -- vectorised branch evaluation -------------------------------------

    def apply(self, src, dst, x):
        """Values and derivatives of phi_{src,dst}(x), elementwise."""
        src = np.asarray(src)
        dst = np.asarray(dst)
        x = np.asarray(x, dtype=float)
        if self.is_mobius:
            a, b, c, d = np.moveaxis(self.coef[src, dst], -1, 0)
            den = c * x + d
            return (a * x + b) / den, (a * d - b * c) / den**2
        val = np.empty(np.broadcast(src, dst, x).shape)
        der = np.empty_like(val)
        src, dst, x = np.broadcast_arrays(src, dst, x)
        for br in self.branches:
            m = (src == br.source) & (dst == br.target)
            if m.any():
                val[m] = br(x[m])
                der[m] = br.derivative(x[m])
        return val, der

    def log_abs_derivative(self, src, dst, x):
        """(phi(x), log|phi'(x)|), continued analytically off the real line.

        For Moebius branches log|phi'| = -2 log(sigma (c x + d)) with sigma the
        sign of c x + d on the source interval.
        """
        if not self.is_mobius:
            z, d = self.apply(src, dst, x)
            return z, np.log(np.abs(d))
        src = np.asarray(src)
        a, b, c, d = np.moveaxis(self.coef[src, np.asarray(dst)], -1, 0)
        den = c * x + d
        sigma = np.sign(c * self.bounds[src].mean(axis=-1) + d)
        return (a * x + b) / den, -2.0 * np.log(sigma * den)

    def apply_inverse(self, src, dst, y):
        src, dst, y = np.broadcast_arrays(np.asarray(src), np.asarray(dst), np.asarray(y, float))
        out = np.empty(y.shape)
        for br in self.branches:
            m = (src == br.source) & (dst == br.target)
            if m.any():
                out[m] = br.inverse(y[m])
        return out

    # -- serialisation ----------------------------------------------------

    def to_config(self) -> dict:
        cfg = dict(self.meta)
        if "kind" not in cfg:
            if not self.is_mobius:
                raise IfsError("only Moebius systems can be serialised")
            cfg = {
                "kind": "custom",
                "intervals": [[iv.lo, iv.hi] for iv in self.intervals],
                "adjacency": [list(r) for r in self.adjacency],
                "branches": [
                    {"source": br.source, "target": br.target, "matrix": br.mobius.matrix.tolist()}
                    for br in self.branches
                ],
            }
        return _jsonable(cfg)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# construction


def _empirical_theta(branches, intervals, samples=10_000, margin=1.02):
    sup = 0.0
    for br in branches:
        iv = intervals[br.source]
        x = np.linspace(iv.lo, iv.hi, samples)
        sup = max(sup, float(np.max(np.abs(br.derivative(x)))))
    return margin * sup


def make_ifs(intervals, adjacency, branches, theta=None, kind="custom", meta=(), check=True):
    """Assemble an IfsSystem; theta defaults to 1.02 x sampled sup |phi'|."""
    intervals = tuple(iv if isinstance(iv, Interval) else Interval(*iv) for iv in intervals)
    adjacency = tuple(tuple(int(v) for v in row) for row in np.asarray(adjacency))
    branches = tuple(sorted(branches, key=lambda br: (br.source, br.target)))
    if theta is None:
        theta = _empirical_theta(branches, intervals)
        if not theta < 1.0:
            raise IfsError(f"branches are not contracting: sup|phi'| * 1.02 = {theta:.6g}")
    ifs = IfsSystem(intervals, adjacency, branches, float(theta), kind, tuple(sorted(meta)))
    if check:
        rep = verify_ifs(ifs)
        if not rep.ok:
            raise IfsError(f"IFS conditions violated: {rep.failure}")
    return ifs


def gauss_intervals(n_branches: int) -> list[Interval]:
    """I_i = [1/(1+i), b_i] with b_i midway between alpha_i and 1/i."""
    N = n_branches
    out = []
    for i in range(1, N + 1):
        alpha = 1.0 / (1.0 / (N + 1) + i)
        out.append(Interval(1.0 / (1 + i), 0.5 * (alpha + 1.0 / i)))
    return out


def build_gauss_ifs(n_branches: int) -> IfsSystem:
    """Truncated Gauss map with branches g_j(x) = 1/(x + j), j = 1..N."""
    if n_branches < 1:
        raise IfsError("need at least one branch")
    N = n_branches
    ivs = gauss_intervals(N)
    gs = [MobiusMap(0.0, 1.0, 1.0, float(j)) for j in range(1, N + 1)]
    branches = [BranchMap(i, j, gs[j]) for i in range(N) for j in range(N)]
    return make_ifs(ivs, np.ones((N, N), int), branches, kind="gauss",
                    meta=(("kind", "gauss"), ("n_branches", N)))


def isometric_intervals(generators: Sequence[MobiusMap]) -> list[Interval]:
    """Boundary traces of the isometric circles |c x + d| = 1 of S_1..S_r, S_1^-1..S_r^-1."""
    maps = list(generators) + [g.inverse() for g in generators]
    out = []
    for g in maps:
        if g.c == 0:
            raise IfsError("generator fixes infinity; no isometric circle")
        centre, rad = -g.d / g.c, 1.0 / abs(g.c)
        out.append(Interval(centre - rad, centre + rad))
    return out


def _hull_of_images(maps_into, source_ivs):
    lo, hi = math.inf, -math.inf
    for g, iv in zip(maps_into, source_ivs):
        ends = (g(iv.lo), g(iv.hi))
        lo, hi = min(lo, *ends), max(hi, *ends)
    return lo, hi


def build_schottky_ifs(generators: Sequence[MobiusMap], half_disc_intervals: Sequence[Interval],
                       localize: int = 2, pad: float = 1e-3, tol: float = 1e-9) -> IfsSystem:
    """Bowen-Series IFS phi_{i,j} = S_j^{-1} = S_{j+r} of a Schottky group.

    ``half_disc_intervals`` are the 2r traces D_i on the real line with
    S_i(dD_i) = dD_{i+r}. Following the usual localisation to the trapped
    set, the IFS intervals are refined ``localize`` times to the padded
    hull of the first-generation images.
    """
    gens = [g if isinstance(g, MobiusMap) else MobiusMap.from_matrix(g) for g in generators]
    r = len(gens)
    discs = [iv if isinstance(iv, Interval) else Interval(*iv) for iv in half_disc_intervals]
    if r < 1 or len(discs) != 2 * r:
        raise IfsError("need r generators and 2r half-disc intervals")
    S = gens + [g.inverse() for g in gens]
    for i in range(r):
        image = sorted(S[i](np.array([discs[i].lo, discs[i].hi])))
        target = discs[i + r]
        if not np.allclose(image, [target.lo, target.hi], atol=tol, rtol=tol):
            raise IfsError(f"S_{i + 1} does not map the boundary of D_{i + 1} onto D_{i + r + 1}")
    N = 2 * r
    A = np.ones((N, N), int)
    for i in range(N):
        A[i, (i + r) % N] = 0
    # phi_{i,j} = S_{j+r}
    g = [S[(j + r) % N] for j in range(N)]
    ivs = discs
    for _ in range(localize):
        new = []
        for j in range(N):
            srcs = [i for i in range(N) if A[i, j]]
            lo, hi = _hull_of_images([g[j]] * len(srcs), [ivs[i] for i in srcs])
            w = hi - lo
            new.append(Interval(lo - pad * w, hi + pad * w))
        ivs = new
    branches = [BranchMap(i, j, g[j]) for i in range(N) for j in range(N) if A[i, j]]
    meta = (("kind", "schottky"),
            ("generators", tuple(tuple(map(tuple, s.matrix.tolist())) for s in gens)),
            ("intervals", tuple((d.lo, d.hi) for d in discs)),
            ("localize", localize))
    try:
        sup = _empirical_theta(branches, ivs)
        if sup >= 1.0:
            raise IfsError(f"generators are not expanding on the intervals (sup|phi'| * 1.02 = {sup:.4g})")
        return make_ifs(ivs, A, branches, theta=sup, kind="schottky", meta=meta)
    except IfsError:
        raise


def example_schottky_generators() -> list[MobiusMap]:
    s5 = math.sqrt(5.0)
    return [MobiusMap(4.0, s5, -s5, -1.0), MobiusMap(-1.0, s5, -s5, 4.0)]


def build_example_schottky() -> IfsSystem:
    """Three-funnel example generated by S1 = (4 r5; -r5 -1), S2 = (-1 r5; -r5 4)."""
    gens = example_schottky_generators()
    return build_schottky_ifs(gens, isometric_intervals(gens))


def ifs_from_config(cfg: dict) -> IfsSystem:
    kind = cfg.get("kind")
    if kind == "gauss":
        n = cfg.get("n_branches")
        if not isinstance(n, int) or n < 1:
            raise IfsError("gauss config needs a positive integer n_branches")
        return build_gauss_ifs(n)
    if kind == "schottky":
        gens = [MobiusMap.from_matrix(m) for m in cfg["generators"]]
        ivs = cfg.get("intervals")
        ivs = isometric_intervals(gens) if ivs is None else [Interval(*iv) for iv in ivs]
        return build_schottky_ifs(gens, ivs, localize=int(cfg.get("localize", 2)))
    if kind == "custom":
        ivs = [Interval(*iv) for iv in cfg["intervals"]]
        n = len(ivs)
        A = np.asarray(cfg.get("adjacency", np.ones((n, n), int)))
        brs = []
        for b in cfg["branches"]:
            brs.append(BranchMap(int(b["source"]), int(b["target"]), MobiusMap.from_matrix(b["matrix"])))
        return make_ifs(ivs, A, brs)
    raise IfsError(f"unknown system kind {kind!r}")


def load_ifs(path) -> IfsSystem:
    with open(path) as fh:
        return ifs_from_config(json.load(fh))


def save_ifs(ifs: IfsSystem, path) -> None:
    with open(path, "w") as fh:
        json.dump(ifs.to_config(), fh, indent=2)


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    intervals_disjoint: bool
    images_inside: bool
    contraction_sup: float
    theta: float
    images_disjoint: bool
    failure: str | None = None
    witness: float | tuple | None = None
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failure is None


def verify_ifs(ifs: IfsSystem, samples_per_interval: int = 10_000) -> VerificationReport:
    if samples_per_interval < 2:
        raise ValueError("samples_per_interval must be >= 2")
    failure = witness = None

    def fail(msg, w):
        nonlocal failure, witness
        if failure is None:
            failure, witness = msg, w

    ivs = sorted(enumerate(ifs.intervals), key=lambda t: t[1].lo)
    disjoint = True
    for (k1, a), (k2, b) in zip(ivs, ivs[1:]):
        if a.hi >= b.lo:
            disjoint = False
            fail("intervals not disjoint", (k1, k2))

    inside = True
    sup = 0.0
    images = []
    for br in ifs.branches:
        src, dst = ifs.intervals[br.source], ifs.intervals[br.target]
        x = np.linspace(src.lo, src.hi, samples_per_interval)
        y = br(x)
        dy = np.abs(br.derivative(x))
        sup = max(sup, float(dy.max()))
        bad = ~dst.contains(y, strict=True)
        if bad.any():
            inside = False
            fail(f"image of branch {br.source}->{br.target} leaves the interior of I_{br.target}",
                 float(x[np.argmax(bad)]))
        images.append(((float(y.min()), float(y.max())), (br.source, br.target)))
    if not sup <= ifs.theta:
        fail(f"sup |phi'| = {sup:.6g} exceeds theta = {ifs.theta:.6g}", sup)

    images.sort()
    img_disjoint = True
    for (r1, k1), (r2, k2) in zip(images, images[1:]):
        if r1[1] >= r2[0]:
            img_disjoint = False
            fail("branch images intersect", (k1, k2))

    return VerificationReport(disjoint, inside, sup, min(1.02 * sup, 1.0), img_disjoint, failure, witness)


# ---------------------------------------------------------------------------
# words


def count_words(A, length: int, kind: str) -> int:
    A = np.asarray(A, dtype=object)
    if kind == "cyclic":
        return int(np.trace(_matpow(A, length)))
    return int(_matpow(A, length - 1).sum())


def _matpow(A, k):
    out = np.identity(A.shape[0], dtype=object)
    for _ in range(k):
        out = out.dot(A)
    return out


def _check_budget(count, budget):
    budget = DEFAULT_ORBIT_BUDGET if budget is None else budget
    if count > budget:
        raise BudgetExceeded(f"{count} words requested, budget is {budget}")


def word_array(A, length: int, kind: str = "past", budget: int | None = None) -> np.ndarray:
    """All admissible words as a (count, length) array in lexicographic order."""
    if length < 1:
        raise ValueError("word length must be >= 1")
    A = np.asarray(A)
    _check_budget(count_words(A, length, kind), budget)
    n = A.shape[0]
    words = np.arange(n, dtype=np.int16)[:, None]
    for _ in range(length - 1):
        last = words[:, -1]
        rows, nxt = np.nonzero(A[last])
        words = np.concatenate([words[rows], nxt[:, None].astype(np.int16)], axis=1)
    if kind == "cyclic":
        words = words[A[words[:, -1], words[:, 0]] == 1]
    return words


def admissible_words(ifs: IfsSystem, length: int, kind: str = "past",
                     budget: int | None = None) -> list[Word]:
    """All admissible words of the given length, in lexicographic order."""
    return [Word(tuple(row), kind) for row in word_array(ifs.A, length, kind, budget).tolist()]


def is_admissible(ifs: IfsSystem, word: Word) -> bool:
    p = word.path()
    return all(ifs.A[a, b] for a, b in zip(p, p[1:]))


def compose_branch(ifs: IfsSystem, word: Word) -> BranchMap:
    """Composite branch along the word (chain rule for derivatives)."""
    if not is_admissible(ifs, word):
        raise IfsError(f"word {word.symbols} is not admissible")
    path = word.path()
    steps = [ifs.branch(a, b) for a, b in zip(path, path[1:])]
    if not steps:
        ident = MobiusMap(1.0, 0.0, 0.0, 1.0)
        return BranchMap(path[0], path[0], ident)
    if all(st.mobius is not None for st in steps):
        m = steps[0].mobius
        for st in steps[1:]:
            m = st.mobius.compose(m)
        return BranchMap(path[0], path[-1], m)

    def func(x):
        for st in steps:
            x = st(x)
        return x

    def deriv(x):
        out = np.ones_like(np.asarray(x, dtype=float))
        for st in steps:
            out = out * st.derivative(x)
            x = st(x)
        return out

    def inv(y):
        for st in reversed(steps):
            y = st.inverse(y)
        return y

    return BranchMap(path[0], path[-1], func=func, deriv=deriv, inv=inv)


# ---------------------------------------------------------------------------
# periodic orbits


def _batched_products(ifs: IfsSystem, paths: np.ndarray) -> np.ndarray:
    """Composite Moebius matrices, shape (W, 2, 2), for an array of paths."""
    C = ifs.coef
    W = paths.shape[0]
    M = np.broadcast_to(np.eye(2), (W, 2, 2)).copy()
    for k in range(paths.shape[1] - 1):
        g = C[paths[:, k], paths[:, k + 1]].reshape(W, 2, 2)
        M = g @ M
        # keep entries O(1); only the projective class matters
        M /= np.max(np.abs(M), axis=(1, 2))[:, None, None]
    return M


def _closed_paths(words: np.ndarray) -> np.ndarray:
    return np.concatenate([words[:, -1:], words], axis=1)


@dataclass(frozen=True)
class PeriodicOrbits:
    """Periodic points of all cyclic words of one length (vectorised)."""

    words: np.ndarray        # (W, p) cyclic words
    points: np.ndarray       # fixed points in I_{w_{p-1}}
    multipliers: np.ndarray  # signed derivative of the closed composite
    residuals: np.ndarray

    @property
    def period(self) -> int:
        return self.words.shape[1]


def _fixed_points(ifs, paths, tol=1e-15, max_sweeps=10_000):
    x = ifs.bounds[paths[:, 0]].mean(axis=1)
    if ifs.is_mobius:
        M = _batched_products(ifs, paths)
        a, b, c, d = M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1]

        def step(x):
            return (a * x + b) / (c * x + d)
    else:
        def step(x):
            for k in range(paths.shape[1] - 1):
                x, _ = ifs.apply(paths[:, k], paths[:, k + 1], x)
            return x

    for _ in range(max_sweeps):
        nx = step(x)
        done = np.max(np.abs(nx - x)) <= tol * max(1.0, float(np.max(np.abs(x))))
        x = nx
        if done:
            break
    def walk(x):
        der = np.ones_like(x)
        for k in range(paths.shape[1] - 1):
            x, dk = ifs.apply(paths[:, k], paths[:, k + 1], x)
            der = der * dk
        return x, der

    # Newton polish along the path, kept only where it lowers the residual
    y, der = walk(x)
    xn = x - (y - x) / (der - 1.0)
    yn, dern = walk(xn)
    better = np.abs(yn - xn) < np.abs(y - x)
    x = np.where(better, xn, x)
    y = np.where(better, yn, y)
    der = np.where(better, dern, der)
    return x, der, np.abs(y - x)


@lru_cache(maxsize=64)
def periodic_orbits(ifs: IfsSystem, period: int, budget: int | None = None) -> PeriodicOrbits:
    words = word_array(ifs.A, period, "cyclic", budget)
    if len(words) == 0:
        z = np.zeros(0)
        return PeriodicOrbits(words, z, z, z)
    x, der, res = _fixed_points(ifs, _closed_paths(words))
    for arr in (words, x, der, res):
        arr.setflags(write=False)
    return PeriodicOrbits(words, x, der, res)


@dataclass(frozen=True)
class PeriodicPoint:
    x: float
    multiplier: float
    residual: float
    error_bound: float

    def __float__(self):
        return self.x


def periodic_point(ifs: IfsSystem, word: Word) -> PeriodicPoint:
    """Fixed point of the closed composite of a cyclic word, by contraction."""
    if word.kind != "cyclic":
        word = Word(word.symbols, "cyclic")
    if not is_admissible(ifs, word):
        raise IfsError(f"word {word.symbols} is not cyclically admissible")
    paths = _closed_paths(np.array([word.symbols]))
    x, der, res = _fixed_points(ifs, paths)
    bound = float(res[0]) / (1.0 - ifs.theta ** len(word))
    return PeriodicPoint(float(x[0]), float(der[0]), float(res[0]), bound)


def orbit_points(ifs: IfsSystem, orbits: PeriodicOrbits) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All points along each periodic orbit.

    Returns (xs, derivs, src) of shape (W, p): xs[:, k] is the k-th image of
    the periodic point, derivs[:, k] the derivative of the branch applied to
    reach it and src[:, k] the interval it was mapped from.
    """
    paths = _closed_paths(np.asarray(orbits.words))
    W, p = orbits.words.shape
    xs = np.empty((W, p))
    ds = np.empty((W, p))
    x = np.asarray(orbits.points)
    for k in range(p):
        x, d = ifs.apply(paths[:, k], paths[:, k + 1], x)
        xs[:, k], ds[:, k] = x, d
    return xs, ds, paths[:, :-1]


# ---------------------------------------------------------------------------
# trapped set


def cylinder_bounds(ifs: IfsSystem, paths: np.ndarray) -> np.ndarray:
    """(W, 2) interval hulls of phi_w(I_{w_0}) for each path row."""
    lo = ifs.bounds[paths[:, 0], 0].copy()
    hi = ifs.bounds[paths[:, 0], 1].copy()
    for k in range(paths.shape[1] - 1):
        a, _ = ifs.apply(paths[:, k], paths[:, k + 1], lo)
        b, _ = ifs.apply(paths[:, k], paths[:, k + 1], hi)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
    return np.stack([lo, hi], axis=1)


def trapped_set_cover(ifs: IfsSystem, depth: int, budget: int | None = None) -> list[Interval]:
    """Cylinder intervals I_{w_{-n,0}} covering K at the given depth."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return [Interval(lo, hi) for lo, hi in trapped_set_cover_array(ifs, depth, budget)]


def trapped_set_cover_array(ifs: IfsSystem, depth: int, budget: int | None = None) -> np.ndarray:
    paths = word_array(ifs.A, depth + 1, "past", budget)
    return cylinder_bounds(ifs, paths)


def adaptive_cover(ifs: IfsSystem, max_length: float, budget: int | None = None) -> np.ndarray:
    """Cover of K by cylinders refined until each is shorter than ``max_length``.

    Cylinders of uneven depth keep every piece at comparable scale, which is
    what box counting needs when contraction rates differ between branches.
    Returns an (m, 2) array of [lo, hi] rows.
    """
    if max_length <= 0:
        raise ValueError("max_length must be positive")
    budget = DEFAULT_ORBIT_BUDGET if budget is None else budget
    n = ifs.n
    if ifs.is_mobius:
        # state: composite matrix M (maps I_src into K) and source index
        mats = np.broadcast_to(np.eye(2), (n, 2, 2)).copy()
        src = np.arange(n)
        C = ifs.coef.reshape(n, n, 2, 2)
        done = []
        while len(src):
            lo = ifs.bounds[src, 0]
            hi = ifs.bounds[src, 1]
            a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
            y0, y1 = (a * lo + b) / (c * lo + d), (a * hi + b) / (c * hi + d)
            ylo, yhi = np.minimum(y0, y1), np.maximum(y0, y1)
            small = (yhi - ylo) <= max_length
            done.append(np.stack([ylo[small], yhi[small]], axis=1))
            mats, src = mats[~small], src[~small]
            rows, prev = np.nonzero(ifs.A[:, src].T)  # rows index cylinders, prev = new first symbol
            if sum(len(x) for x in done) + len(rows) > budget:
                raise BudgetExceeded(f"adaptive cover exceeds {budget} cylinders")
            mats = mats[rows] @ C[prev, src[rows]]
            mats /= np.max(np.abs(mats), axis=(1, 2))[:, None, None]
            src = prev
        return np.concatenate(done)
    depth = 0
    while True:
        cov = trapped_set_cover_array(ifs, depth, budget)
        if np.max(cov[:, 1] - cov[:, 0]) <= max_length:
            return cov
        depth += 1


@dataclass(frozen=True)
class CodedPoint:
    x: float
    error_bound: float
    cylinder: Interval

    def __float__(self):
        return self.x


def coding_point(ifs: IfsSystem, word: Word, n: int | None = None) -> CodedPoint:
    """Midpoint of the depth-n cylinder of a past word (w_{-n}, ..., w_0)."""
    syms = word.symbols
    n = len(syms) - 1 if n is None else n
    if n > len(syms) - 1:
        raise ValueError("truncation exceeds word length")
    path = Word(syms[len(syms) - 1 - n:], "past")
    if not is_admissible(ifs, path):
        raise IfsError(f"word {syms} is not admissible")
    lo, hi = cylinder_bounds(ifs, np.array([path.symbols]))[0]
    return CodedPoint(0.5 * (lo + hi), 0.5 * (hi - lo), Interval(lo, hi))
