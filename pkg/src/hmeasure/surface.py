"""Parametrized submanifolds Phi = F o phi : U -> H^n and scalar maps f : H^n -> R^k."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import group, multivec
from .errors import DimensionError, DomainError, EmbeddingError
from .expr import Expr, to_expr, u_vars, x_vars
from .multivec import PVector

DEFAULT_CHAR_TOL = 1e-9


def _as_box(domain) -> tuple:
    box = tuple((float(a), float(b)) for a, b in domain)
    for a, b in box:
        if not b > a:
            raise ValueError(f"domain interval [{a}, {b}] has no positive extent")
    return box


@dataclass(frozen=True, eq=False)
class ParamSurface:
    """p-dimensional submanifold given by phi : box in R^p -> R^{2n+1}.

    ``components`` are expressions in u1..up (plus any names fixed in
    ``bindings``, e.g. the level ``t`` of a level-set chart).  Partials are
    derived symbolically on construction.
    """

    n: int
    domain: tuple
    components: tuple
    bindings: Mapping[str, float] = field(default_factory=dict)
    partials: tuple = field(init=False, repr=False)
    check_embedding: bool = field(default=True, repr=False)

    def __post_init__(self):
        dom = _as_box(self.domain)
        object.__setattr__(self, "domain", dom)
        p = len(dom)
        dim = 2 * self.n + 1
        if not 1 <= p <= 2 * self.n:
            raise DimensionError(f"submanifold dimension {p} outside 1..{2 * self.n}")
        if len(self.components) != dim:
            raise DimensionError(f"H^{self.n} parametrizations need {dim} components, got {len(self.components)}")
        names = u_vars(p) + list(self.bindings)
        comps = tuple(to_expr(c, names) for c in self.components)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "bindings", dict(self.bindings))
        parts = tuple(tuple(c.diff(v) for v in u_vars(p)) for c in comps)
        object.__setattr__(self, "partials", parts)
        if self.check_embedding:
            self._check_embedding()

    @classmethod
    def from_strings(cls, n: int, components: Sequence, domain, **bindings) -> "ParamSurface":
        return cls(n, tuple(domain), tuple(components), bindings)

    @property
    def p(self) -> int:
        return len(self.domain)

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def lower(self):
        return np.array([a for a, _ in self.domain])

    @property
    def upper(self):
        return np.array([b for _, b in self.domain])

    def bind(self, **values) -> "ParamSurface":
        b = dict(self.bindings)
        b.update({k: float(v) for k, v in values.items()})
        return replace(self, bindings=b)

    def _env(self, u):
        u = np.asarray(u, dtype=float)
        env = {f"u{i + 1}": u[..., i] for i in range(self.p)}
        env.update(self.bindings)
        return env, u.shape[:-1]

    def _eval_all(self, exprs, u):
        env, shape = self._env(u)
        return np.stack([np.broadcast_to(e.eval(env), shape) for e in exprs], axis=-1)

    def check_domain(self, u, tol=1e-12):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.p:
            raise DimensionError(f"parameter points need {self.p} coordinates")
        span = self.upper - self.lower
        if np.any(u < self.lower - tol * span) or np.any(u > self.upper + tol * span):
            raise DomainError(f"parameter point outside the domain box {self.domain}")

    # vectorised geometry, u of shape (..., p)
    def point(self, u) -> np.ndarray:
        return self._eval_all(self.components, u)

    def coord_partials(self, u) -> np.ndarray:
        """d phi / d u as an array (..., 2n+1, p)."""
        cols = [self._eval_all([row[i] for row in self.partials], u) for i in range(self.p)]
        return np.stack(cols, axis=-1)

    def frame_partials(self, u, metric=None) -> np.ndarray:
        """Frame coefficients of Phi_{u_i} as columns, shape (..., 2n+1, p).

        With ``metric`` (a MetricSpec) the coefficients are taken in that
        metric's orthonormal frame (X_1, ..., X_2n, W).
        """
        x = self.point(u)
        d = self.coord_partials(u)
        h = group.to_frame(x[..., None, :], np.swapaxes(d, -1, -2))
        h = np.swapaxes(h, -1, -2)
        if metric is not None:
            h = metric.from_standard(h)
        return h

    def area_density(self, u, metric=None) -> np.ndarray:
        """|Phi_{u_1} ^ ... ^ Phi_{u_p}| (Riemannian p-volume density)."""
        return multivec.gram_volume(self.frame_partials(u, metric))

    def vertical_density(self, u, metric=None) -> np.ndarray:
        """|pi_V(Phi_{u_1} ^ ... ^ Phi_{u_p})|, the intrinsic measure density."""
        return multivec.vertical_norm_columns(self.frame_partials(u, metric))

    def _check_embedding(self, per_axis: int = 3):
        axes = [np.linspace(a, b, per_axis + 2)[1:-1] for a, b in self.domain]
        grid = np.array(list(itertools.product(*axes)))
        grid = np.vstack([grid, np.array(list(itertools.product(*self.domain)))])
        d = self.coord_partials(grid)
        sv = np.linalg.svd(d, compute_uv=False)
        rel = sv[:, -1] / np.maximum(sv[:, 0], np.finfo(float).tiny)
        if np.any(rel <= 1e-9):
            i = int(np.argmin(rel))
            raise EmbeddingError(f"coordinate partials are dependent at u={grid[i].tolist()}")

    def to_dict(self) -> dict:
        return {"n": self.n, "components": [str(c) for c in self.components],
                "domain": [list(b) for b in self.domain], "bindings": dict(self.bindings)}


def pushforward_partials(S: ParamSurface, u) -> list[PVector]:
    u = np.asarray(u, dtype=float)
    S.check_domain(u)
    h = S.frame_partials(u)
    return [PVector.vector(S.n, h[:, i]) for i in range(S.p)]


def tangent_pvector(S: ParamSurface, u) -> PVector:
    return multivec.wedge_all(pushforward_partials(S, u))


def vertical_tangent(S: ParamSurface, u) -> PVector:
    tau = tangent_pvector(S, u)
    return multivec.vertical_project(tau) * (1.0 / multivec.norm(tau))


def is_characteristic(S: ParamSurface, u, tol: float = DEFAULT_CHAR_TOL) -> bool:
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    return multivec.norm(vertical_tangent(S, u)) <= tol


@dataclass(frozen=True, eq=False)
class ScalarMap:
    """f = (f^1, ..., f^k) : H^n -> R^k given by expressions in x1..x_{2n+1}."""

    n: int
    components: tuple
    partials: tuple = field(init=False, repr=False)

    def __post_init__(self):
        dim = 2 * self.n + 1
        k = len(self.components)
        if not 1 <= k < dim:
            raise DimensionError(f"target dimension {k} outside 1..{dim - 1}")
        names = x_vars(dim)
        comps = tuple(to_expr(c, names) for c in self.components)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "partials", tuple(tuple(c.diff(v) for v in names) for c in comps))

    @classmethod
    def from_strings(cls, n: int, components: Sequence) -> "ScalarMap":
        return cls(n, tuple(components))

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    def _env(self, x):
        x = np.asarray(x, dtype=float)
        return {f"x{i + 1}": x[..., i] for i in range(self.dim)}, x.shape[:-1]

    def __call__(self, x) -> np.ndarray:
        env, shape = self._env(x)
        return np.stack([np.broadcast_to(c.eval(env), shape) for c in self.components], axis=-1)

    def gradient(self, x) -> np.ndarray:
        """Coordinate derivatives, shape (..., k, 2n+1)."""
        env, shape = self._env(x)
        return np.stack([np.stack([np.broadcast_to(e.eval(env), shape) for e in row], axis=-1)
                         for row in self.partials], axis=-2)

    def frame_derivatives(self, x) -> np.ndarray:
        """Matrix (X_j f^i(x)) with columns X_1..X_2n, Z; shape (..., k, 2n+1)."""
        x = np.asarray(x, dtype=float)
        grad = self.gradient(x)
        fm = group.frame_matrix(x)  # rows: frame fields in coordinates
        return grad @ np.swapaxes(fm, -1, -2)

    def to_dict(self) -> dict:
        return {"n": self.n, "components": [str(c) for c in self.components]}
