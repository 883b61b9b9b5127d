"""p-vectors over the orthonormal frame (X_1, ..., X_2n, Z).

Basis p-vectors are indexed by lexicographically ordered p-subsets of
{1, ..., 2n+1}; index 2n+1 is the Z direction, so vertical p-vectors are
exactly the coefficients whose subset ends in 2n+1.  Since the frame is
orthonormal, the Gram-determinant inner product is the dot product of
coefficient vectors.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .errors import DegreeError, DimensionError, NotSimpleError, NotVerticalError


@lru_cache(maxsize=None)
def subsets(n: int, p: int) -> tuple:
    """0-based lexicographic p-subsets of range(2n+1)."""
    return tuple(combinations(range(2 * n + 1), p))


@lru_cache(maxsize=None)
def _index(n: int, p: int) -> dict:
    return {s: i for i, s in enumerate(subsets(n, p))}


@lru_cache(maxsize=None)
def vertical_mask(n: int, p: int) -> np.ndarray:
    m = np.array([s[-1] == 2 * n for s in subsets(n, p)], dtype=bool)
    m.setflags(write=False)
    return m


def _merge_sign(a: tuple, b: tuple) -> int:
    """Sign of the permutation sorting the concatenation a + b (a, b sorted, disjoint)."""
    inversions = 0
    j = 0
    for x in a:
        while j < len(b) and b[j] < x:
            j += 1
        inversions += j
    return -1 if inversions % 2 else 1


@dataclass(frozen=True, eq=False)
class PVector:
    n: int
    p: int
    coeffs: np.ndarray

    def __post_init__(self):
        if not 1 <= self.p <= 2 * self.n + 1:
            raise DegreeError(f"degree {self.p} outside 1..{2 * self.n + 1}")
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size != comb(2 * self.n + 1, self.p):
            raise DimensionError(f"{self.p}-vectors of H^{self.n} have {comb(2 * self.n + 1, self.p)} coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, n, p):
        return cls(n, p, np.zeros(comb(2 * n + 1, p)))

    @classmethod
    def from_dict(cls, n: int, terms: dict) -> "PVector":
        """Build from ``{(i1, ..., ip): coefficient}`` with 1-based frame indices.

        Unsorted index tuples are reordered with the matching sign; repeated
        indices give zero.
        """
        if not terms:
            raise ValueError("empty term dictionary; use PVector.zero")
        p = len(next(iter(terms)))
        c = np.zeros(comb(2 * n + 1, p))
        idx = _index(n, p)
        for key, val in terms.items():
            key = tuple(k - 1 for k in key)
            if len(key) != p:
                raise DegreeError("mixed degrees in term dictionary")
            if len(set(key)) < p:
                continue
            order = sorted(range(p), key=lambda i: key[i])
            sign = _perm_sign(order)
            c[idx[tuple(sorted(key))]] += sign * val
        return cls(n, p, c)

    @classmethod
    def vector(cls, n: int, components) -> "PVector":
        """1-vector with frame coefficients (X_1, ..., X_2n, Z)."""
        return cls(n, 1, components)

    @classmethod
    def basis(cls, n: int, *indices: int) -> "PVector":
        return cls.from_dict(n, {tuple(indices): 1.0})

    def terms(self) -> dict:
        """Nonzero coefficients keyed by 1-based subsets."""
        return {tuple(i + 1 for i in s): float(c)
                for s, c in zip(subsets(self.n, self.p), self.coeffs) if c != 0}

    @property
    def is_vertical(self) -> bool:
        return not np.any(self.coeffs[~vertical_mask(self.n, self.p)])

    def __add__(self, other):
        _same_space(self, other)
        return PVector(self.n, self.p, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_space(self, other)
        return PVector(self.n, self.p, self.coeffs - other.coeffs)

    def __neg__(self):
        return PVector(self.n, self.p, -self.coeffs)

    def __mul__(self, s):
        return PVector(self.n, self.p, self.coeffs * float(s))

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def allclose(self, other, atol=1e-12):
        return self.n == other.n and self.p == other.p and np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol)

    def __repr__(self):
        body = " + ".join(f"{c:g}*" + "^".join(_name(i, self.n) for i in s) for s, c in self.terms().items())
        return f"PVector(n={self.n}, p={self.p}: {body or '0'})"


def _name(i, n):
    return "Z" if i == 2 * n + 1 else f"X{i}"


def _perm_sign(order) -> int:
    order = list(order)
    sign = 1
    for i in range(len(order)):
        while order[i] != i:
            j = order[i]
            order[i], order[j] = order[j], order[i]
            sign = -sign
    return sign


def _same_space(a: PVector, b: PVector):
    if a.n != b.n:
        raise DimensionError(f"p-vectors of H^{a.n} and H^{b.n} cannot be combined")
    if a.p != b.p:
        raise DegreeError(f"degrees {a.p} and {b.p} differ")


def wedge(a: PVector, b: PVector) -> PVector:
    if a.n != b.n:
        raise DimensionError(f"p-vectors of H^{a.n} and H^{b.n} cannot be combined")
    q = a.p + b.p
    if q > 2 * a.n + 1:
        raise DegreeError(f"wedge of degrees {a.p} and {b.p} exceeds {2 * a.n + 1}")
    out = np.zeros(comb(2 * a.n + 1, q))
    idx = _index(a.n, q)
    sb = subsets(b.n, b.p)
    for s1, c1 in zip(subsets(a.n, a.p), a.coeffs):
        if c1 == 0:
            continue
        set1 = set(s1)
        for s2, c2 in zip(sb, b.coeffs):
            if c2 == 0 or set1.intersection(s2):
                continue
            out[idx[tuple(sorted(s1 + s2))]] += _merge_sign(s1, s2) * c1 * c2
    return PVector(a.n, q, out)


def wedge_all(vectors) -> PVector:
    vectors = list(vectors)
    out = vectors[0]
    for v in vectors[1:]:
        out = wedge(out, v)
    return out


def inner(a: PVector, b: PVector) -> float:
    _same_space(a, b)
    return float(np.dot(a.coeffs, b.coeffs))


def norm(a: PVector) -> float:
    return float(np.linalg.norm(a.coeffs))


def vertical_project(a: PVector) -> PVector:
    return PVector(a.n, a.p, np.where(vertical_mask(a.n, a.p), a.coeffs, 0.0))


# ---------------------------------------------------------------------------
# batched helpers on raw arrays

def wedge_columns(m: np.ndarray) -> np.ndarray:
    """Coefficients of the wedge of the columns of ``m``.

    ``m`` has shape (..., 2n+1, p) holding frame coefficients of p vectors; the
    result has shape (..., C(2n+1, p)), entry I being the p x p minor on rows I.
    """
    m = np.asarray(m, dtype=float)
    dim, p = m.shape[-2], m.shape[-1]
    n = (dim - 1) // 2
    rows = np.array(subsets(n, p))
    sub = m[..., rows, :]  # (..., C, p, p)
    if p == 1:
        return sub[..., 0, 0]
    return np.linalg.det(sub)


def vertical_norm_columns(m: np.ndarray) -> np.ndarray:
    """|pi_V(wedge of columns)| without materialising horizontal minors."""
    m = np.asarray(m, dtype=float)
    dim, p = m.shape[-2], m.shape[-1]
    n = (dim - 1) // 2
    rows = np.array([s for s in subsets(n, p) if s[-1] == 2 * n])
    sub = m[..., rows, :]
    minors = sub[..., 0, 0] if p == 1 else np.linalg.det(sub)
    return np.sqrt(np.sum(minors * minors, axis=-1))


def gram_volume(m: np.ndarray) -> np.ndarray:
    """sqrt(det(M^T M)) for stacked (..., d, p) matrices."""
    m = np.asarray(m, dtype=float)
    g = np.swapaxes(m, -1, -2) @ m
    return np.sqrt(np.clip(np.linalg.det(g), 0.0, None))


def subspace(tau: PVector, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (as columns) of {v : v ^ tau = 0}.

    The dimension of this space equals p exactly when tau is a nonzero simple
    p-vector; anything else raises ``NotSimpleError``.
    """
    n, p = tau.n, tau.p
    dim = 2 * n + 1
    scale = norm(tau)
    if scale == 0:
        raise NotSimpleError("zero p-vector has no associated subspace")
    if p == dim:
        return np.eye(dim)
    cols = [wedge(PVector.basis(n, j + 1), tau).coeffs for j in range(dim)]
    mat = np.column_stack(cols) / scale
    _, sv, vt = np.linalg.svd(mat)
    sv = np.concatenate([sv, np.zeros(dim - sv.size)])
    null = sv <= rtol
    if int(np.count_nonzero(null)) != p:
        raise NotSimpleError(f"p-vector is not simple: kernel of v -> v^tau has dimension "
                             f"{int(np.count_nonzero(null))}, expected {p}")
    basis = vt[null].T
    # SVD kernel columns are orthonormal already; re-orthonormalise against drift
    q, _ = np.linalg.qr(basis)
    return q


def require_vertical_simple(tau: PVector) -> np.ndarray:
    """Subspace basis of a vertical simple p-vector, with Z as the last column."""
    if norm(tau) == 0:
        raise NotSimpleError("zero p-vector")
    if not tau.is_vertical:
        raise NotVerticalError("p-vector has horizontal components")
    basis = subspace(tau)
    n = tau.n
    z = np.zeros(2 * n + 1)
    z[-1] = 1.0
    # span contains Z (it is vertical and simple); split into horizontal part + Z
    horiz = basis - np.outer(z, z @ basis)
    u, sv, _ = np.linalg.svd(horiz, full_matrices=False)
    h = u[:, : tau.p - 1]
    return np.column_stack([h, z])
