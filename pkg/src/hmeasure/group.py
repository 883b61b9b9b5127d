"""Heisenberg group H^n in standard (exponential) coordinates.

A point is a vector ``x = (x_1, ..., x_2n, x_{2n+1})`` with group law

    x . y = (x~ + y~, x_{2n+1} + y_{2n+1} + sum_k (x_k y_{k+n} - x_{k+n} y_k)).

The left-invariant frame is X_k = d_k - x_{k+n} d_t, X_{k+n} = d_{k+n} + x_k d_t,
Z = d_t.  Array helpers (``mul``, ``inv``, ``dil``, ``to_frame``) broadcast over
leading axes and are what the integration code uses; the ``GroupPoint`` wrappers
are the validated scalar API.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import DimensionError, DistanceSpecError, EvaluationError


def _n_of(dim: int) -> int:
    if dim < 3 or dim % 2 == 0:
        raise DimensionError(f"coordinate length {dim} is not 2n+1 for n >= 1")
    return (dim - 1) // 2


# ---------------------------------------------------------------------------
# array-level group operations

def mul(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise DimensionError(f"cannot multiply points of length {x.shape[-1]} and {y.shape[-1]}")
    n = _n_of(x.shape[-1])
    out = x + y
    out[..., 2 * n] += np.sum(x[..., :n] * y[..., n:2 * n] - x[..., n:2 * n] * y[..., :n], axis=-1)
    return out


def inv(x):
    return -np.asarray(x, dtype=float)


def dil(r, x):
    x = np.asarray(x, dtype=float)
    out = r * x
    out[..., -1] = r * r * x[..., -1]
    return out


def to_frame(x, v):
    """Frame coefficients of coordinate vectors ``v`` based at ``x``.

    Returns h with v = sum_{j<=2n} h_j X_j(x) + h_{2n+1} Z(x).  Both arguments
    broadcast; the last axis of each has length 2n+1.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape[-1] != v.shape[-1]:
        raise DimensionError("base point and vector lengths differ")
    n = _n_of(v.shape[-1])
    h = np.array(v, dtype=float, copy=True)
    h[..., 2 * n] = v[..., 2 * n] + np.sum(
        x[..., n:2 * n] * v[..., :n] - x[..., :n] * v[..., n:2 * n], axis=-1)
    return h


def frame_matrix(x):
    """Rows are the coordinate components of X_1(x), ..., X_2n(x), Z(x)."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    n = _n_of(dim)
    m = np.broadcast_to(np.eye(dim), x.shape[:-1] + (dim, dim)).copy()
    for k in range(n):
        m[..., k, 2 * n] = -x[..., k + n]
        m[..., k + n, 2 * n] = x[..., k]
    return m


# ---------------------------------------------------------------------------
# validated scalar API

@dataclass(frozen=True, eq=False)
class GroupPoint:
    """Point of H^n in standard coordinates."""

    n: int
    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if self.n < 1:
            raise DimensionError("group parameter n must be positive")
        if c.size != 2 * self.n + 1:
            raise DimensionError(f"H^{self.n} points need {2 * self.n + 1} coordinates, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coordinates must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def of(cls, *coords) -> "GroupPoint":
        if len(coords) == 1 and np.ndim(coords[0]) == 1:
            coords = tuple(coords[0])
        return cls(_n_of(len(coords)), np.asarray(coords, dtype=float))

    @classmethod
    def identity(cls, n: int) -> "GroupPoint":
        return cls(n, np.zeros(2 * n + 1))

    @property
    def horizontal(self) -> np.ndarray:
        return self.coords[:-1]

    @property
    def vertical(self) -> float:
        return float(self.coords[-1])

    def __mul__(self, other: "GroupPoint") -> "GroupPoint":
        return group_mul(self, other)

    def __eq__(self, other):
        return isinstance(other, GroupPoint) and self.n == other.n and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.n, self.coords.tobytes()))

    def __repr__(self):
        return f"GroupPoint(n={self.n}, coords={self.coords.tolist()})"


def _check_same(x: GroupPoint, y: GroupPoint):
    if x.n != y.n:
        raise DimensionError(f"points of H^{x.n} and H^{y.n} cannot be combined")


def group_mul(x: GroupPoint, y: GroupPoint) -> GroupPoint:
    _check_same(x, y)
    return GroupPoint(x.n, mul(x.coords, y.coords))


def group_inv(x: GroupPoint) -> GroupPoint:
    return GroupPoint(x.n, inv(x.coords))


def dilate(r: float, x: GroupPoint) -> GroupPoint:
    if not r > 0:
        raise ValueError(f"dilation factor must be positive, got {r}")
    return GroupPoint(x.n, dil(r, x.coords))


def frame_at(x: GroupPoint) -> np.ndarray:
    """Coordinate components of X_1(x), ..., X_2n(x), Z(x) as the rows of a matrix."""
    return frame_matrix(x.coords)


def coords_to_frame(x: GroupPoint, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (2 * x.n + 1,):
        raise DimensionError(f"vector must have length {2 * x.n + 1}")
    return to_frame(x.coords, v)


# ---------------------------------------------------------------------------
# homogeneous distances

class DistanceKind(enum.Enum):
    KORANYI = "koranyi"
    MAX = "maxdist"
    RADIAL = "radial"
    # arbitrary homogeneous gauge, not necessarily radial; metric factor may vary
    CUSTOM = "custom"


RadialProfile = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DistanceSpec:
    """Homogeneous distance rho, described by its gauge rho(0, x).

    ``profile(s, t)`` receives s = |x~| and t = x_{2n+1} as arrays.  ``gauge_fn``
    (CUSTOM only) receives full coordinate arrays with the last axis 2n+1.
    """

    kind: DistanceKind
    profile: Optional[RadialProfile] = field(default=None, compare=False)
    gauge_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    label: str = ""

    @classmethod
    def koranyi(cls) -> "DistanceSpec":
        return cls(DistanceKind.KORANYI, label="koranyi")

    @classmethod
    def maxdist(cls) -> "DistanceSpec":
        return cls(DistanceKind.MAX, label="maxdist")

    @classmethod
    def radial(cls, profile: RadialProfile, label: str = "radial", *,
               samples: int = 1000, tol: float = 1e-9, seed: int = 12345) -> "DistanceSpec":
        spec = cls(DistanceKind.RADIAL, profile=profile, label=label)
        _sample_test_profile(profile, samples, tol, seed)
        return spec

    @classmethod
    def custom(cls, gauge_fn, label: str = "custom") -> "DistanceSpec":
        return cls(DistanceKind.CUSTOM, gauge_fn=gauge_fn, label=label)

    @property
    def has_constant_metric_factor(self) -> bool:
        return self.kind is not DistanceKind.CUSTOM

    def gauge(self, x) -> np.ndarray:
        """rho(0, x) for coordinate arrays ``x`` of shape (..., 2n+1)."""
        x = np.asarray(x, dtype=float)
        if self.kind is DistanceKind.CUSTOM:
            val = np.asarray(self.gauge_fn(x), dtype=float)
        else:
            s = np.sqrt(np.sum(x[..., :-1] ** 2, axis=-1))
            t = x[..., -1]
            if self.kind is DistanceKind.KORANYI:
                val = (s ** 4 + 16.0 * t * t) ** 0.25
            elif self.kind is DistanceKind.MAX:
                val = np.maximum(s, np.sqrt(np.abs(t)))
            else:
                with np.errstate(all="ignore"):
                    val = np.asarray(self.profile(s, t), dtype=float)
        if not np.all(np.isfinite(val)):
            raise EvaluationError(f"distance {self.label or self.kind.value} returned a non-finite value")
        return val

    def bounds(self, n: int, samples: int = 4001) -> tuple[float, float]:
        """(R_h, R_v) with the unit ball inside {|x~| <= R_h, |x_{2n+1}| <= R_v}.

        Exact for the two closed-form gauges.  Otherwise each point on the
        d_inf unit sphere is pushed along its dilation orbit to the boundary
        (where the gauge equals 1, by homogeneity), with a 10% margin.
        """
        if self.kind is DistanceKind.KORANYI:
            return 1.0, 0.25
        if self.kind is DistanceKind.MAX:
            return 1.0, 1.0
        dim = 2 * n + 1
        if self.kind is DistanceKind.RADIAL:
            q = np.linspace(0.0, 1.0, samples)
            pts = np.zeros((3 * samples, dim))
            pts[:samples, 0] = 1.0
            pts[:samples, -1] = 2 * q - 1
            pts[samples:2 * samples, 0] = q
            pts[samples:2 * samples, -1] = 1.0
            pts[2 * samples:, 0] = q
            pts[2 * samples:, -1] = -1.0
        else:
            rng = np.random.default_rng(0)
            d = rng.normal(size=(samples, dim - 1))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            tt = rng.uniform(-1, 1, size=samples)
            a = rng.uniform(0, 1, size=samples)
            top = np.column_stack([d * a[:, None], np.sign(tt) + (tt == 0)])
            side = np.column_stack([d, tt])
            pts = np.vstack([top, side])
        rho = self.gauge(pts)
        if np.any(rho <= 0):
            raise DistanceSpecError("gauge vanishes on the d_inf unit sphere")
        s = np.linalg.norm(pts[:, :-1], axis=1)
        rh = float(np.max(s / rho))
        rv = float(np.max(np.abs(pts[:, -1]) / rho ** 2))
        return 1.1 * rh, 1.1 * rv

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "label": self.label}


def _sample_test_profile(profile: RadialProfile, samples: int, tol: float, seed: int):
    rng = np.random.default_rng(seed)
    s = np.abs(rng.normal(size=samples)) * rng.choice([0.0, 1.0], size=samples, p=[0.05, 0.95])
    t = rng.normal(size=samples) * rng.choice([0.0, 1.0], size=samples, p=[0.05, 0.95])
    zero = (s == 0) & (t == 0)
    s[zero] = 1.0
    r = np.exp(rng.uniform(-3, 3, size=samples))
    with np.errstate(all="ignore"):
        base = np.asarray(profile(s, t), dtype=float)
        scaled = np.asarray(profile(r * s, r * r * t), dtype=float)
        origin = float(np.asarray(profile(np.zeros(1), np.zeros(1)), dtype=float)[0])
    if not (np.all(np.isfinite(base)) and np.all(np.isfinite(scaled))):
        raise DistanceSpecError("radial profile produced non-finite values")
    if abs(origin) > tol:
        raise DistanceSpecError(f"radial profile is {origin} at the origin, expected 0")
    if np.any(base <= tol):
        raise DistanceSpecError("radial profile is not positive away from the origin")
    err = np.abs(scaled - r * base)
    if np.any(err > tol * np.maximum(1.0, r * base)):
        i = int(np.argmax(err))
        raise DistanceSpecError(
            f"radial profile is not homogeneous: N({r[i] * s[i]:.3g}, {r[i] ** 2 * t[i]:.3g}) "
            f"!= {r[i]:.3g} * N({s[i]:.3g}, {t[i]:.3g})")


def distance(spec: DistanceSpec, x: GroupPoint, y: GroupPoint) -> float:
    _check_same(x, y)
    return float(spec.gauge(mul(inv(x.coords), y.coords)))


# ---------------------------------------------------------------------------
# polynomial vector fields

class Poly:
    """Sparse real polynomial: ``{exponent tuple: coefficient}``."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[tuple, float] = ()):
        self.nvars = nvars
        clean = {}
        for exps, c in dict(terms).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise DimensionError("exponent tuple length differs from number of variables")
            if c != 0:
                clean[exps] = clean.get(exps, 0.0) + float(c)
        self.terms = {e: c for e, c in clean.items() if c != 0}

    @classmethod
    def const(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars, j, c=1.0):
        e = [0] * nvars
        e[j] = 1
        return cls(nvars, {tuple(e): c})

    def __add__(self, other):
        t = dict(self.terms)
        for e, c in other.terms.items():
            t[e] = t.get(e, 0.0) + c
        return Poly(self.nvars, t)

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(self.nvars, {e: c * other for e, c in self.terms.items()})
        t = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0.0) + c1 * c2
        return Poly(self.nvars, t)

    __rmul__ = __mul__

    def diff(self, j):
        t = {}
        for e, c in self.terms.items():
            if e[j]:
                e2 = list(e)
                e2[j] -= 1
                t[tuple(e2)] = c * e[j]
        return Poly(self.nvars, t)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return math.fsum(c * float(np.prod(x ** np.array(e))) for e, c in self.terms.items())

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items()):
            mon = "*".join(f"x{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k)
            parts.append(f"{c:g}" + (f"*{mon}" if mon else ""))
        return " + ".join(parts)


@dataclass(frozen=True, eq=False)
class PolyVectorField:
    """Vector field sum_j c_j(x) d_j with polynomial coefficients."""

    coeffs: tuple

    @property
    def dim(self):
        return len(self.coeffs)

    def apply(self, f: Poly) -> Poly:
        """Directional derivative V(f)."""
        out = Poly(self.dim)
        for j, c in enumerate(self.coeffs):
            out = out + c * f.diff(j)
        return out

    def __call__(self, x):
        return np.array([c(x) for c in self.coeffs])

    def is_zero(self):
        return all(c.is_zero() for c in self.coeffs)

    def __eq__(self, other):
        return isinstance(other, PolyVectorField) and self.coeffs == other.coeffs

    def __add__(self, other):
        return PolyVectorField(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __rmul__(self, s):
        return PolyVectorField(tuple(c * s for c in self.coeffs))

    def __repr__(self):
        return "PolyVectorField(" + ", ".join(map(repr, self.coeffs)) + ")"


def lie_bracket(v: PolyVectorField, w: PolyVectorField) -> PolyVectorField:
    if v.dim != w.dim:
        raise DimensionError("vector fields live on spaces of different dimension")
    return PolyVectorField(tuple(v.apply(wc) - w.apply(vc) for vc, wc in zip(v.coeffs, w.coeffs)))


def standard_frame(n: int) -> list[PolyVectorField]:
    """[X_1, ..., X_2n, Z] as polynomial vector fields on R^{2n+1}."""
    dim = 2 * n + 1
    fields = []
    for j in range(2 * n):
        c = [Poly(dim) for _ in range(dim)]
        c[j] = Poly.const(dim, 1.0)
        if j < n:
            c[2 * n] = Poly.var(dim, j + n, -1.0)
        else:
            c[2 * n] = Poly.var(dim, j - n, 1.0)
        fields.append(PolyVectorField(tuple(c)))
    c = [Poly(dim) for _ in range(dim)]
    c[2 * n] = Poly.const(dim, 1.0)
    fields.append(PolyVectorField(tuple(c)))
    return fields


def bracket_table(n: int) -> dict[tuple[int, int], PolyVectorField]:
    """All brackets [F_i, F_j], i < j, of the standard frame (1-based indices)."""
    frame = standard_frame(n)
    return {(i + 1, j + 1): lie_bracket(frame[i], frame[j])
            for i in range(len(frame)) for j in range(i + 1, len(frame))}
