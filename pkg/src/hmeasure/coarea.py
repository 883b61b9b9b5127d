"""Horizontal/Riemannian jacobians, the |tau_V| = J_H f / J_g f identity,
codimension-one horizontal normals and numerical coarea checks."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import multivec
from .errors import ChartInconsistencyError, DegenerateLevelSetError, DimensionError
from .expr import to_expr, x_vars
from .group import GroupPoint
from .measure import IntegrationConfig, MeasureReport, _quad_report
from .multivec import PVector
from .quadrature import adaptive_cubature
from .surface import ParamSurface, ScalarMap, vertical_tangent

CHART_TOL = 1e-9


def _minor_norm(D: np.ndarray, columns) -> np.ndarray:
    """sqrt of the sum of squared k x k minors of D (..., k, m) over ``columns``."""
    k = D.shape[-2]
    total = np.zeros(D.shape[:-2])
    for cols in itertools.combinations(columns, k):
        sub = D[..., :, list(cols)]
        minor = sub[..., 0, 0] if k == 1 else np.linalg.det(sub)
        total = total + minor * minor
    return np.sqrt(total)


def horizontal_jacobian_array(f: ScalarMap, x) -> np.ndarray:
    D = f.frame_derivatives(x)
    return _minor_norm(D, range(2 * f.n))


def riemannian_jacobian_array(f: ScalarMap, x) -> np.ndarray:
    D = f.frame_derivatives(x)
    return _minor_norm(D, range(2 * f.n + 1))


def _coords(f: ScalarMap, x):
    if isinstance(x, GroupPoint):
        if x.n != f.n:
            raise DimensionError("point and map live on different groups")
        return x.coords
    x = np.asarray(x, dtype=float)
    if x.shape != (2 * f.n + 1,):
        raise DimensionError(f"points of H^{f.n} need {2 * f.n + 1} coordinates")
    return x


def horizontal_jacobian(f: ScalarMap, x) -> float:
    return float(horizontal_jacobian_array(f, _coords(f, x)))


def riemannian_jacobian(f: ScalarMap, x) -> float:
    return float(riemannian_jacobian_array(f, _coords(f, x)))


def ratio_identity_check(f: ScalarMap, chart: ParamSurface, u, zero_tol: float = 1e-12):
    """(|tau_{Sigma,V}(x)|, J_H f(x) / J_g f(x)) at x = chart(u).

    At characteristic points both sides vanish; J_H f below ``zero_tol`` (relative
    to J_g f) is read as 0 so that 0/0 is reported as 0.
    """
    if chart.n != f.n or chart.p != 2 * f.n + 1 - f.k:
        raise DimensionError("chart dimension does not match the level sets of f")
    u = np.asarray(u, dtype=float)
    x = chart.point(u)
    jg = riemannian_jacobian(f, x)
    if jg == 0:
        raise DegenerateLevelSetError(f"J_g f vanishes at {x.tolist()}")
    jh = horizontal_jacobian(f, x)
    ratio = 0.0 if jh <= zero_tol * jg else jh / jg
    return multivec.norm(vertical_tangent(chart, u)), ratio


def horizontal_normal(S: ParamSurface, u) -> PVector:
    """Horizontal normal nu_H with nu_H^j = (-1)^j tau_V^j, where tau_V^j is the
    coefficient of X_1 ^ .. (X_j omitted) .. ^ X_2n ^ Z in the unit vertical
    tangent 2n-vector."""
    if S.p != 2 * S.n:
        raise DimensionError(f"horizontal normal needs a hypersurface (p = {2 * S.n}), got p = {S.p}")
    n = S.n
    tv = vertical_tangent(S, u)
    idx = {s: i for i, s in enumerate(multivec.subsets(n, 2 * n))}
    comps = np.zeros(2 * n + 1)
    full = set(range(2 * n + 1))
    for j in range(1, 2 * n + 1):
        key = tuple(sorted(full - {j - 1}))
        comps[j - 1] = (-1) ** j * tv.coeffs[idx[key]]
    return PVector.vector(n, comps)


# ---------------------------------------------------------------------------
# level-set families and coarea checks

@dataclass(frozen=True, eq=False)
class LevelSetFamily:
    """Charts t -> ParamSurface of f^{-1}(t) cap A for t in the box ``levels``.

    ``chart`` is any callable taking a tuple of k floats.  ``box`` is the
    coordinate box A in R^{2n+1}.
    """

    f: ScalarMap
    chart: Callable[[tuple], ParamSurface]
    levels: tuple
    box: tuple

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple((float(a), float(b)) for a, b in self.levels))
        object.__setattr__(self, "box", tuple((float(a), float(b)) for a, b in self.box))
        if len(self.levels) != self.f.k:
            raise DimensionError(f"level box must have {self.f.k} intervals")
        if len(self.box) != 2 * self.f.n + 1:
            raise DimensionError(f"region A must be a box in R^{2 * self.f.n + 1}")
        self.validate()

    @classmethod
    def from_template(cls, f: ScalarMap, components, domain, levels, box) -> "LevelSetFamily":
        """Single-level family whose chart components may use the level name ``t``."""
        template = ParamSurface(f.n, tuple(domain), tuple(components), {"t": 0.0}, check_embedding=False)

        def chart(t):
            return template.bind(t=t[0])

        return cls(f, chart, tuple(levels), tuple(box))

    def surface(self, t) -> ParamSurface:
        return self.chart(tuple(float(v) for v in np.atleast_1d(t)))

    def validate(self, per_axis: int = 3):
        grid_t = list(itertools.product(*[np.linspace(a, b, per_axis) for a, b in self.levels]))
        for t in grid_t:
            S = self.surface(t)
            axes = [np.linspace(a, b, per_axis) for a, b in S.domain]
            u = np.array(list(itertools.product(*axes)))
            vals = self.f(S.point(u))
            if np.max(np.abs(vals - np.array(t))) > CHART_TOL * max(1.0, float(np.max(np.abs(t)))):
                raise ChartInconsistencyError(f"chart for level t={[float(v) for v in t]} does not lie in f^-1(t)")


def _weight_fn(weight, dim):
    if weight is None:
        return None
    if callable(weight) and not hasattr(weight, "eval"):
        return weight
    e = to_expr(weight, x_vars(dim))

    def w(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(e.eval({f"x{i + 1}": x[..., i] for i in range(dim)}), x.shape[:-1])

    return w


def _box_arrays(box):
    return np.array([a for a, _ in box]), np.array([b for _, b in box])


def _lhs(fam: LevelSetFamily, w, jac, cfg) -> MeasureReport:
    lo, hi = _box_arrays(fam.box)

    def g(x):
        val = jac(fam.f, x)
        return val * w(x) if w is not None else val

    res = adaptive_cubature(g, lo, hi, order=cfg.order, divisions=cfg.divisions, rtol=cfg.rtol,
                            atol=cfg.atol, max_cells=cfg.max_cells, threads=cfg.threads)
    return _quad_report(res)


def _rhs(fam: LevelSetFamily, w, density, cfg) -> MeasureReport:
    lo, hi = _box_arrays(fam.levels)
    inner_errors = []
    inner_ok = []
    inner_cfg = dict(order=cfg.order, divisions=cfg.divisions, rtol=cfg.rtol, atol=cfg.atol,
                     max_cells=cfg.max_cells, threads=1)

    def inner(ts):
        out = np.empty(len(ts))
        for i, t in enumerate(ts):
            S = fam.surface(t)

            def g(u, S=S):
                val = density(S, u)
                return val * w(S.point(u)) if w is not None else val

            res = adaptive_cubature(g, S.lower, S.upper, **inner_cfg)
            out[i] = res.value
            inner_errors.append(res.error)
            inner_ok.append(res.converged)
        return out

    outer = adaptive_cubature(inner, lo, hi, order=cfg.order, divisions=1, rtol=cfg.rtol,
                              atol=cfg.atol, max_cells=cfg.max_cells, threads=1)
    # inner errors enter with the outer weights; bound them by the level-box volume
    vol = float(np.prod(hi - lo))
    err = outer.error + vol * max(inner_errors, default=0.0)
    ok = outer.converged and all(inner_ok)
    notes = () if ok else ("quadrature did not reach the requested tolerance",)
    return MeasureReport(outer.value, err, "quadrature", outer.evaluations, ok, notes)


def _area_density(S, u):
    return S.area_density(u)


def _vertical_density(S, u):
    return S.vertical_density(u)


def coarea_check(fam: LevelSetFamily, weight=None, cfg: IntegrationConfig = IntegrationConfig()):
    """(integral over A of u J_H f dx, integral over levels of the intrinsic
    measure of the weighted level sets)."""
    w = _weight_fn(weight, 2 * fam.f.n + 1)
    return (_lhs(fam, w, horizontal_jacobian_array, cfg), _rhs(fam, w, _vertical_density, cfg))


def riemannian_coarea_check(fam: LevelSetFamily, weight=None, cfg: IntegrationConfig = IntegrationConfig()):
    """Same as ``coarea_check`` with J_g f and Riemannian p-volume."""
    w = _weight_fn(weight, 2 * fam.f.n + 1)
    return (_lhs(fam, w, riemannian_jacobian_array, cfg), _rhs(fam, w, _area_density, cfg))
