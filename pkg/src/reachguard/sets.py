"""Zonotope and sparse polynomial zonotope arithmetic.

A zonotope is {c + G b : b in [-1, 1]^m}.  A (sparse) polynomial zonotope is
the set of values of sum_m g_m * prod_k beta_{id_k}^{E[m, k]} as the
indeterminates beta range over [-1, 1]; terms with an all-zero exponent row
form the constant part.  Indeterminate ids are globally unique per
independent uncertainty source, so two sets sharing an id are coupled
through the same variable and operations preserve that dependency.

All values are immutable after construction and every operation is pure, so
they may be used from multiple workers without locking.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

# Membership / feasibility tolerance.  All comparisons treat sets as closed.
FEAS_EPS = 1e-9

_ID_COUNTER = itertools.count()


def fresh_ids(count: int) -> np.ndarray:
    """Allocate `count` globally unique indeterminate ids."""
    return np.fromiter((next(_ID_COUNTER) for _ in range(count)),
                       dtype=np.int64, count=count)


@dataclass(frozen=True)
class Interval:
    """Closed scalar interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"interval requires lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = FEAS_EPS) -> bool:
        return self.lo - tol <= x <= self.hi + tol


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Zonotope:
    """Zonotope with center (n,) and generator matrix (n, m); m = 0 is a point."""

    __slots__ = ("center", "generators")

    def __init__(self, center, generators=None):
        c = np.atleast_1d(np.asarray(center, dtype=float)).reshape(-1)
        if generators is None:
            G = np.zeros((c.size, 0))
        else:
            G = np.asarray(generators, dtype=float)
            if G.ndim == 1:
                G = G.reshape(-1, 1)
            if G.shape[0] != c.size:
                raise ValueError(f"generator rows {G.shape[0]} != dimension {c.size}")
        self.center = _frozen(c.copy())
        self.generators = _frozen(G.copy())

    @classmethod
    def from_box(cls, center, half_widths, rotation=None) -> "Zonotope":
        """Axis-aligned (or rotated) box as a zonotope."""
        c = np.asarray(center, dtype=float)
        h = np.asarray(half_widths, dtype=float)
        G = np.diag(h)
        if rotation is not None:
            R = np.asarray(rotation, dtype=float)
            return cls(c, R @ G)
        return cls(c, G)

    @classmethod
    def from_interval_bounds(cls, lo, hi) -> "Zonotope":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return cls.from_box(0.5 * (lo + hi), 0.5 * (hi - lo))

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def n_generators(self) -> int:
        return self.generators.shape[1]

    def radius(self) -> np.ndarray:
        """Per-axis half-width of the interval hull."""
        return np.abs(self.generators).sum(axis=1)

    def interval_hull(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.radius()
        return self.center - r, self.center + r

    def translate(self, v) -> "Zonotope":
        return Zonotope(self.center + np.asarray(v, dtype=float), self.generators)

    def linear_map(self, M) -> "Zonotope":
        M = np.asarray(M, dtype=float)
        return Zonotope(M @ self.center, M @ self.generators)

    def minkowski_sum(self, other: "Zonotope") -> "Zonotope":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch in Minkowski sum")
        return Zonotope(self.center + other.center,
                        np.hstack([self.generators, other.generators]))

    def __neg__(self) -> "Zonotope":
        return Zonotope(-self.center, -self.generators)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        b = rng.uniform(-1.0, 1.0, size=(count, self.n_generators))
        return self.center + b @ self.generators.T

    def contains(self, point, tol: float = FEAS_EPS) -> bool:
        """Exact membership via linear feasibility (interval-hull fast path)."""
        p = np.asarray(point, dtype=float)
        d = p - self.center
        if np.any(np.abs(d) > self.radius() + tol):
            return False
        if self.n_generators == 0:
            return bool(np.all(np.abs(d) <= tol))
        return _min_residual(self.generators, d) <= tol

    def is_axis_aligned_box(self) -> bool:
        G = self.generators
        if G.shape[1] > self.dim:
            return False
        nz = np.abs(G) > 0
        return bool(np.all(nz.sum(axis=0) <= 1) and np.all(nz.sum(axis=1) <= 1))

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, gens={self.n_generators})"


def _min_residual(G: np.ndarray, d: np.ndarray) -> float:
    """min_s { s : |G x - d|_inf <= s, x in [-1,1]^m }, via one LP."""
    n, m = G.shape
    # variables: x (m), s (1); minimize s subject to -s <= (Gx - d)_i <= s
    c = np.zeros(m + 1)
    c[-1] = 1.0
    A_ub = np.zeros((2 * n, m + 1))
    A_ub[:n, :m] = G
    A_ub[:n, -1] = -1.0
    A_ub[n:, :m] = -G
    A_ub[n:, -1] = -1.0
    b_ub = np.concatenate([d, -d])
    bounds = [(-1.0, 1.0)] * m + [(0.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:  # pragma: no cover - highs always solves this form
        raise RuntimeError(f"membership LP failed: {res.message}")
    return float(res.fun)


def zono_intersects(a: Zonotope, b: Zonotope, tol: float = FEAS_EPS) -> bool:
    """Exact emptiness decision for a ∩ b (true iff origin in a ⊕ (−b)).

    The interval-hull overlap test short-circuits "false"; when both operands
    are axis-aligned boxes that test is exact in both directions.  Otherwise a
    linear feasibility program over the combined generator coefficients
    decides exactly, treating both sets as closed.
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch in intersection test")
    lo_a, hi_a = a.interval_hull()
    lo_b, hi_b = b.interval_hull()
    if np.any(lo_a > hi_b + tol) or np.any(lo_b > hi_a + tol):
        return False
    if a.is_axis_aligned_box() and b.is_axis_aligned_box():
        return True
    G = np.hstack([a.generators, -b.generators])
    d = b.center - a.center
    if G.shape[1] == 0:
        return bool(np.all(np.abs(d) <= tol))
    return _min_residual(G, d) <= tol


# ---------------------------------------------------------------------------
# Polynomial zonotopes
# ---------------------------------------------------------------------------

class _PolyBase:
    """Shared storage for vector- and matrix-valued polynomial zonotopes."""

    __slots__ = ("terms", "expo", "ids")

    def __init__(self, terms, expo, ids, copy: bool = True):
        terms = np.asarray(terms, dtype=float)
        expo = np.asarray(expo, dtype=np.int64)
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if expo.ndim != 2:
            expo = expo.reshape(terms.shape[0], -1)
        if expo.shape[0] != terms.shape[0]:
            raise ValueError("one exponent row per generator required")
        if expo.shape[1] != ids.size:
            raise ValueError("exponent columns must match indeterminate ids")
        if np.any(expo < 0):
            raise ValueError("exponents must be nonnegative")
        if ids.size != np.unique(ids).size:
            raise ValueError("indeterminate ids must be distinct")
        if copy:
            terms, expo, ids = terms.copy(), expo.copy(), ids.copy()
        self.terms = _frozen(terms)
        self.expo = _frozen(expo)
        self.ids = _frozen(ids)

    @property
    def n_terms(self) -> int:
        return self.terms.shape[0]

    @property
    def n_ids(self) -> int:
        return self.ids.size

    def monomials(self, beta: np.ndarray) -> np.ndarray:
        """Monomial values for coefficient samples beta (..., n_ids)."""
        beta = np.asarray(beta, dtype=float)
        if beta.shape[-1] != self.n_ids:
            raise ValueError("coefficient vector length must match ids")
        if self.n_ids == 0:
            return np.ones(beta.shape[:-1] + (self.n_terms,))
        return np.prod(beta[..., None, :] ** self.expo[None, :, :], axis=-1)

    def evaluate(self, beta) -> np.ndarray:
        """Member obtained by fixing the indeterminates to `beta` (aligned to ids)."""
        w = self.monomials(np.asarray(beta, dtype=float))
        return np.tensordot(w, self.terms, axes=(-1, 0))

    def evaluate_by_id(self, values: dict) -> np.ndarray:
        beta = np.array([values[i] for i in self.ids], dtype=float)
        return self.evaluate(beta)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        beta = rng.uniform(-1.0, 1.0, size=(count, self.n_ids))
        return self.evaluate(beta)


def _compact_arrays(terms, expo, ids):
    """Merge like monomials, drop zero terms and unused indeterminates."""
    uniq, inv = np.unique(expo, axis=0, return_inverse=True)
    merged = np.zeros((uniq.shape[0],) + terms.shape[1:])
    np.add.at(merged, inv.reshape(-1), terms)
    flat = np.abs(merged).reshape(uniq.shape[0], -1).max(axis=1)
    keep = (flat > 0.0) | (uniq.sum(axis=1) == 0)
    uniq, merged = uniq[keep], merged[keep]
    if uniq.shape[0] == 0:
        uniq = np.zeros((1, ids.size), dtype=np.int64)
        merged = np.zeros((1,) + terms.shape[1:])
    used = uniq.any(axis=0)
    return merged, uniq[:, used], ids[used]


class PolyZonotope(_PolyBase):
    """Sparse polynomial zonotope over R^n with vector-valued generators."""

    @classmethod
    def from_point(cls, c) -> "PolyZonotope":
        c = np.asarray(c, dtype=float).reshape(1, -1)
        return cls(c, np.zeros((1, 0), dtype=np.int64), np.zeros(0, dtype=np.int64))

    @classmethod
    def from_zonotope(cls, z: Zonotope) -> "PolyZonotope":
        """Degree-1 polynomial zonotope with one fresh id per generator."""
        m = z.n_generators
        terms = np.vstack([z.center.reshape(1, -1), z.generators.T])
        expo = np.vstack([np.zeros((1, m), dtype=np.int64), np.eye(m, dtype=np.int64)])
        return cls(terms, expo, fresh_ids(m))

    @property
    def dim(self) -> int:
        return self.terms.shape[1]

    def compact(self) -> "PolyZonotope":
        t, e, i = _compact_arrays(self.terms, self.expo, self.ids)
        return PolyZonotope(t, e, i, copy=False)

    def enclose(self) -> Zonotope:
        return pz_enclose(self)

    def __repr__(self):
        return f"PolyZonotope(dim={self.dim}, terms={self.n_terms}, ids={self.n_ids})"


class MatrixPolyZonotope(_PolyBase):
    """Polynomial zonotope with matrix-valued generators (rotation sets)."""

    @classmethod
    def from_matrix(cls, M) -> "MatrixPolyZonotope":
        M = np.asarray(M, dtype=float)
        return cls(M[None, :, :], np.zeros((1, 0), dtype=np.int64),
                   np.zeros(0, dtype=np.int64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.terms.shape[1:]

    def compact(self) -> "MatrixPolyZonotope":
        t, e, i = _compact_arrays(self.terms, self.expo, self.ids)
        return MatrixPolyZonotope(t, e, i, copy=False)

    def flatten(self) -> PolyZonotope:
        """Row-major vectorization, preserving monomial structure."""
        r, c = self.shape
        return PolyZonotope(self.terms.reshape(self.n_terms, r * c),
                            self.expo, self.ids)

    def __repr__(self):
        return (f"MatrixPolyZonotope(shape={self.shape}, "
                f"terms={self.n_terms}, ids={self.n_ids})")


def _align(a: _PolyBase, b: _PolyBase):
    """Union id list plus both exponent matrices remapped onto it."""
    ids_a, ids_b = a.ids, b.ids
    extra = ids_b[~np.isin(ids_b, ids_a)]
    ids = np.concatenate([ids_a, extra])
    ea = np.zeros((a.n_terms, ids.size), dtype=np.int64)
    ea[:, :ids_a.size] = a.expo
    eb = np.zeros((b.n_terms, ids.size), dtype=np.int64)
    pos = {int(v): k for k, v in enumerate(ids)}
    cols = np.array([pos[int(v)] for v in ids_b], dtype=np.intp)
    if ids_b.size:
        eb[:, cols] = b.expo
    return ids, ea, eb


def pz_add(a: PolyZonotope, b: PolyZonotope) -> PolyZonotope:
    """Minkowski sum; exact for disjoint ids, exact dependent sum for shared ids."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    ids, ea, eb = _align(a, b)
    terms = np.vstack([a.terms, b.terms])
    expo = np.vstack([ea, eb])
    return PolyZonotope(*_compact_arrays(terms, expo, ids), copy=False)


def pz_mul(a: MatrixPolyZonotope, b):
    """Set product of a matrix set with a vector or matrix set.

    Pairwise generator products with exponent addition on shared ids.
    """
    matrix_rhs = isinstance(b, MatrixPolyZonotope)
    inner = b.shape[0] if matrix_rhs else b.dim
    if a.shape[1] != inner:
        raise ValueError(f"inner dimensions mismatch: {a.shape} x {inner}")
    ids, ea, eb = _align(a, b)
    n_pairs = a.n_terms * b.n_terms
    if matrix_rhs:
        prod = np.einsum("aij,bjk->abik", a.terms, b.terms)
        prod = prod.reshape(n_pairs, a.shape[0], b.shape[1])
    else:
        prod = np.einsum("aij,bj->abi", a.terms, b.terms)
        prod = prod.reshape(n_pairs, a.shape[0])
    expo = (ea[:, None, :] + eb[None, :, :]).reshape(n_pairs, ids.size)
    t, e, i = _compact_arrays(prod, expo, ids)
    cls = MatrixPolyZonotope if matrix_rhs else PolyZonotope
    return cls(t, e, i, copy=False)


def skew(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric cross-product matrix of a 3-vector."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def pz_cross(a: PolyZonotope, b: PolyZonotope) -> PolyZonotope:
    """Set cross product a × b via the skew map of a's generators."""
    if a.dim != 3 or b.dim != 3:
        raise ValueError("cross product requires dimension 3")
    skews = np.empty((a.n_terms, 3, 3))
    for m in range(a.n_terms):
        skews[m] = skew(a.terms[m])
    return pz_mul(MatrixPolyZonotope(skews, a.expo, a.ids), b)


def pz_enclose(a: PolyZonotope) -> Zonotope:
    """Enclosing zonotope.

    Monomials with all-even exponents range over [0, 1]: half the coefficient
    shifts the center and half becomes a generator.  All other monomials
    range over [-1, 1] and map to generators unchanged.
    """
    const = ~a.expo.any(axis=1)
    even = (~const) & np.all(a.expo % 2 == 0, axis=1)
    odd = ~const & ~even
    center = a.terms[const].sum(axis=0) + 0.5 * a.terms[even].sum(axis=0)
    gens = np.vstack([0.5 * a.terms[even], a.terms[odd]])
    flat = np.abs(gens).max(axis=1) if gens.size else np.zeros(0)
    return Zonotope(center, gens[flat > 0.0].T)


def reduce_terms(pz: PolyZonotope, max_terms: int) -> PolyZonotope:
    """Conservative term cap: absorb the smallest generators into an
    independent axis-aligned error zonotope (fresh degree-1 ids)."""
    if pz.n_terms <= max_terms:
        return pz
    const = ~pz.expo.any(axis=1)
    norms = np.linalg.norm(pz.terms, axis=1)
    norms[const] = np.inf  # never absorb the constant part
    order = np.argsort(norms, kind="stable")
    n_drop = pz.n_terms - max_terms
    drop = order[:n_drop]
    keep = np.setdiff1d(np.arange(pz.n_terms), drop)
    even = np.all(pz.expo % 2 == 0, axis=1) & ~const
    shift = 0.5 * pz.terms[drop][even[drop]].sum(axis=0)
    rad = (0.5 * np.abs(pz.terms[drop][even[drop]]).sum(axis=0)
           + np.abs(pz.terms[drop][~even[drop]]).sum(axis=0))
    terms = pz.terms[keep]
    expo = pz.expo[keep]
    ids = pz.ids
    # constant shift from absorbed even monomials
    cidx = np.flatnonzero(~expo.any(axis=1))
    if cidx.size:
        terms = terms.copy()
        terms[cidx[0]] += shift
    else:
        terms = np.vstack([shift[None, :], terms])
        expo = np.vstack([np.zeros((1, expo.shape[1]), dtype=np.int64), expo])
    axes = np.flatnonzero(rad > 0.0)
    if axes.size:
        err = np.zeros((axes.size, pz.dim))
        err[np.arange(axes.size), axes] = rad[axes]
        new_ids = fresh_ids(axes.size)
        expo = np.hstack([expo, np.zeros((expo.shape[0], axes.size), dtype=np.int64)])
        err_expo = np.hstack([np.zeros((axes.size, pz.n_ids), dtype=np.int64),
                              np.eye(axes.size, dtype=np.int64)])
        terms = np.vstack([terms, err])
        expo = np.vstack([expo, err_expo])
        ids = np.concatenate([ids, new_ids])
    return PolyZonotope(terms, expo, ids, copy=False)
