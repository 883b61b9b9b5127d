"""Riemannian volumes, metric factors and intrinsic spherical measures."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import group, multivec
from .errors import BallTouchesBoundaryError, DimensionError, UnsupportedDistanceError
from .group import DistanceSpec
from .multivec import PVector
from .quadrature import adaptive_cubature, indicator_cubature, monte_carlo
from .surface import ParamSurface, is_characteristic


@dataclass(frozen=True)
class MetricSpec:
    """Left-invariant metric making (X_1, ..., X_2n, W) orthonormal,
    W = lam * Z + sum_j a_j X_j.  Agrees with the standard metric on the
    horizontal bundle by construction."""

    lam: float = 1.0
    a: tuple = ()

    def __post_init__(self):
        if self.lam == 0 or not math.isfinite(self.lam):
            raise ValueError("lambda must be a nonzero finite number")
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))

    @classmethod
    def standard(cls, n: int) -> "MetricSpec":
        return cls(1.0, (0.0,) * (2 * n))

    def _a(self, n):
        if not self.a:
            return np.zeros(2 * n)
        if len(self.a) != 2 * n:
            raise DimensionError(f"metric needs {2 * n} coefficients a_j, got {len(self.a)}")
        return np.array(self.a)

    @property
    def is_standard(self) -> bool:
        return self.lam == 1.0 and not any(self.a)

    def matrix(self, n: int) -> np.ndarray:
        """A: tilde coordinates -> standard coordinates (columns e_1..e_2n, (a, lam))."""
        A = np.eye(2 * n + 1)
        A[:-1, -1] = self._a(n)
        A[-1, -1] = self.lam
        return A

    def inverse_matrix(self, n: int) -> np.ndarray:
        Ai = np.eye(2 * n + 1)
        Ai[:-1, -1] = -self._a(n) / self.lam
        Ai[-1, -1] = 1.0 / self.lam
        return Ai

    def from_standard(self, h: np.ndarray) -> np.ndarray:
        """Re-express standard frame coefficients (axis -2) in the (X, W) frame."""
        n = (h.shape[-2] - 1) // 2
        out = np.array(h, dtype=float, copy=True)
        ht = h[..., -1, :] / self.lam
        out[..., -1, :] = ht
        out[..., :-1, :] = h[..., :-1, :] - self._a(n)[:, None] * ht[..., None, :]
        return out

    def to_dict(self):
        return {"lambda": self.lam, "a": list(self.a)}


@dataclass(frozen=True)
class IntegrationConfig:
    order: int = 8
    divisions: int = 2
    rtol: float = 1e-9
    atol: float = 1e-13
    max_cells: int = 400_000
    mc_samples: int = 1_000_000
    mc_method: str = "stratified"
    seed: int = 0
    threads: int = 1
    max_depth: int = 12
    blowup_divisions: Optional[int] = None

    def __post_init__(self):
        for name in ("order", "divisions", "max_cells", "mc_samples", "threads"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.blowup_divisions is not None and self.blowup_divisions < 1:
            raise ValueError("blowup_divisions must be positive")
        if self.max_depth < 0 or self.rtol <= 0 or self.atol < 0 or self.seed < 0:
            raise ValueError("invalid integration tolerances or seed")

    def with_seed(self, seed: int) -> "IntegrationConfig":
        return replace(self, seed=int(seed))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MeasureReport:
    value: float
    error_estimate: float
    method: str
    samples_or_nodes: int
    converged: bool = True
    notes: tuple = ()

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error estimate must be non-negative")

    def to_dict(self):
        return {"value": self.value, "error_estimate": self.error_estimate, "method": self.method,
                "samples_or_nodes": self.samples_or_nodes, "converged": self.converged,
                "notes": list(self.notes)}


def _quad_report(res, notes=()) -> MeasureReport:
    notes = tuple(notes)
    if not res.converged:
        notes += ("quadrature did not reach the requested tolerance",)
    return MeasureReport(res.value, res.error, "quadrature", res.evaluations, res.converged, notes)


def _cubature(f, S: ParamSurface, cfg: IntegrationConfig):
    return adaptive_cubature(f, S.lower, S.upper, order=cfg.order, divisions=cfg.divisions,
                             rtol=cfg.rtol, atol=cfg.atol, max_cells=cfg.max_cells, threads=cfg.threads)


def riemannian_volume(S: ParamSurface, m: Optional[MetricSpec] = None,
                      cfg: IntegrationConfig = IntegrationConfig(), weight=None) -> MeasureReport:
    """Integral over U of |Phi_{u_1} ^ ... ^ Phi_{u_p}| in metric ``m``
    (standard if None), optionally weighted by ``weight(x)`` at Phi(u)."""
    metric = None if m is None or m.is_standard else m

    def f(u):
        val = S.area_density(u, metric)
        return val * weight(S.point(u)) if weight is not None else val

    return _quad_report(_cubature(f, S, cfg))


def _require_constant_factor(spec: DistanceSpec):
    if not spec.has_constant_metric_factor:
        raise UnsupportedDistanceError(
            f"distance {spec.label or spec.kind.value} is not known to have constant metric factor")


def spherical_measure(S: ParamSurface, spec: DistanceSpec,
                      cfg: IntegrationConfig = IntegrationConfig(), weight=None) -> MeasureReport:
    """Intrinsic (p+1)-dimensional spherical measure: integral over U of
    |pi_V(Phi_{u_1} ^ ... ^ Phi_{u_p})|.  The value already carries the metric
    factor of ``spec``; ``weight(x)`` optionally multiplies the density."""
    _require_constant_factor(spec)

    def f(u):
        val = S.vertical_density(u)
        return val * weight(S.point(u)) if weight is not None else val

    return _quad_report(_cubature(f, S, cfg))


# ---------------------------------------------------------------------------
# metric factors and ball volumes

def _box_for_linear_image(P: np.ndarray, rh: float, rv: float, margin: float):
    """Half-widths of a box containing P x for all x in {|x~| <= rh, |x_t| <= rv}."""
    half = np.linalg.norm(P[:, :-1], axis=1) * rh + np.abs(P[:, -1]) * rv
    return margin * half


def metric_factor(spec: DistanceSpec, tau: PVector, cfg: IntegrationConfig = IntegrationConfig(),
                  metric: Optional[MetricSpec] = None) -> MeasureReport:
    """Euclidean p-measure of the unit ball slice by the subspace of ``tau``.

    ``tau`` must be vertical and simple.  With ``metric`` the slice is measured
    in the coordinates of that metric's frame (X_1, ..., X_2n, W).
    """
    n, p = tau.n, tau.p
    basis = multivec.require_vertical_simple(tau)  # standard coordinates
    A = np.eye(2 * n + 1)
    if metric is not None and not metric.is_standard:
        A = metric.matrix(n)
        basis, _ = np.linalg.qr(metric.inverse_matrix(n) @ basis)
    to_std = A @ basis  # y in R^p -> standard coordinates
    rh, rv = spec.bounds(n)
    P = basis.T @ np.linalg.inv(A)
    half = _box_for_linear_image(P, rh, rv, 1.1)

    def inside(y):
        return (spec.gauge(y @ to_std.T) < 1.0).astype(float)

    res = monte_carlo(inside, -half, half, samples=cfg.mc_samples, seed=cfg.seed,
                      method=cfg.mc_method, threads=cfg.threads)
    return MeasureReport(res.value, res.stderr, "mc", res.samples)


def ball_volume(spec: DistanceSpec, n: int, cfg: IntegrationConfig = IntegrationConfig(),
                metric: Optional[MetricSpec] = None) -> MeasureReport:
    """Riemannian volume of the unit ball B_1 for ``metric`` (standard if None),
    i.e. the Lebesgue measure of the ball read in that metric's coordinates."""
    dim = 2 * n + 1
    A = np.eye(dim) if metric is None else metric.matrix(n)
    Ai = np.eye(dim) if metric is None else metric.inverse_matrix(n)
    rh, rv = spec.bounds(n)
    half = _box_for_linear_image(Ai, rh, rv, 1.05)

    def inside(y):
        return (spec.gauge(y @ A.T) < 1.0).astype(float)

    res = monte_carlo(inside, -half, half, samples=cfg.mc_samples, seed=cfg.seed,
                      method=cfg.mc_method, threads=cfg.threads)
    return MeasureReport(res.value, res.stderr, "mc", res.samples)


# ---------------------------------------------------------------------------
# blow-up

def _ray_exit(u0, dirs, lower, upper):
    """Largest t >= 0 with u0 + t*dir inside the box, per direction."""
    with np.errstate(divide="ignore", invalid="ignore"):
        tl = np.where(dirs < 0, (lower - u0) / dirs, np.inf)
        tu = np.where(dirs > 0, (upper - u0) / dirs, np.inf)
    return np.min(np.minimum(tl, tu), axis=1)


def blowup_quotient(S: ParamSurface, u0, r: float, spec: DistanceSpec,
                    cfg: IntegrationConfig = IntegrationConfig()) -> MeasureReport:
    """vol_p(Sigma cap B_{x,r}) / r^{p+1} with x = Phi(u0).

    Integration runs in rescaled parameters s with u = u0 + L s, where L
    stretches the horizontal tangent directions by r and the transverse one
    by r^2 (at a transverse point), so the ball preimage has unit size for
    every r.  At a characteristic point the stretch is isotropic and the
    report is flagged.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    u0 = np.asarray(u0, dtype=float)
    S.check_domain(u0)
    p = S.p
    x0 = S.point(u0)
    M = S.frame_partials(u0)
    w = M[-1]
    notes = []
    if is_characteristic(S, u0):
        L = r * np.eye(p)
        factor = 1.0 / r
        notes.append("characteristic point: blow-up limit not defined; quotient reported as is")
    else:
        q, _ = np.linalg.qr(np.column_stack([w, np.eye(p)]))
        K = q[:, 1:p]
        d = w / float(w @ w)
        L = np.column_stack([r * K, r * r * d])
        factor = 1.0 / float(np.linalg.norm(w))
    x0inv = group.inv(x0)
    lower, upper = S.lower, S.upper

    def to_u(s):
        return u0 + s @ L.T

    def inside(s):
        return spec.gauge(group.mul(x0inv, S.point(to_u(s)))) < r

    def density(s):
        return S.area_density(to_u(s)) * factor

    # ray search for the extent of the region in s
    rng = np.random.default_rng(2024)
    dirs = np.vstack([np.eye(p), -np.eye(p), rng.normal(size=(16 * p + 16, p))])
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    udirs = dirs @ L.T
    exit_t = _ray_exit(u0, udirs, lower, upper)
    radii = np.linspace(0.0, 64.0, 4097)[1:]
    extent = np.zeros(len(dirs))
    for i, dv in enumerate(dirs):
        rr = radii[radii < exit_t[i]]
        if rr.size == 0:
            raise BallTouchesBoundaryError("expansion point lies on the domain boundary")
        flags = inside(rr[:, None] * dv[None, :])
        if flags[-1] and rr[-1] < radii[-1]:
            raise BallTouchesBoundaryError(
                f"ball of radius {r} around Phi(u0) reaches the parameter domain boundary")
        if np.any(flags):
            extent[i] = rr[np.nonzero(flags)[0][-1]] + (radii[1] - radii[0])
    if not np.any(extent > 0):
        raise BallTouchesBoundaryError("ball preimage not resolved along any ray")
    half = np.max(np.abs(dirs * extent[:, None]), axis=0) * 1.25 + 1e-3
    for _ in range(12):
        corners = np.array(np.meshgrid(*[[-h, h] for h in half])).reshape(p, -1).T
        cu = to_u(corners)
        span = upper - lower
        if np.any(cu < lower - 1e-12 * span) or np.any(cu > upper + 1e-12 * span):
            raise BallTouchesBoundaryError(
                f"ball of radius {r} around Phi(u0) is not compactly inside the parameter domain")
        grown = False
        g = np.linspace(-1.0, 1.0, 9)
        for axis in range(p):
            others = np.array(np.meshgrid(*([g] * (p - 1)))).reshape(p - 1, -1).T if p > 1 else np.zeros((1, 0))
            for sign in (-1.0, 1.0):
                pts = np.insert(others * np.delete(half, axis), axis, sign * half[axis], axis=1)
                if np.any(inside(pts)):
                    half[axis] *= 1.5
                    grown = True
        if not grown:
            break
    else:
        raise BallTouchesBoundaryError("could not enclose the ball preimage")
    # max_depth counts bisections below a base grid of 8 cells per axis; a finer
    # starting grid (needed so that thin corners of the ball slice are probed)
    # uses up part of that budget
    divisions = cfg.blowup_divisions or max(8, 2 ** math.ceil(12 / p))
    depth = max(0, cfg.max_depth - max(0, round(math.log2(divisions / 8))))
    res = indicator_cubature(density, inside, -half, half, divisions=divisions,
                             max_depth=depth, threads=cfg.threads)
    return _quad_report(res, notes)


def blowup_limit(S: ParamSurface, u0, spec: DistanceSpec,
                 cfg: IntegrationConfig = IntegrationConfig()) -> MeasureReport:
    """theta(tau_V) / |tau_V| at Phi(u0): the r -> 0 limit of ``blowup_quotient``."""
    from .surface import vertical_tangent
    tv = vertical_tangent(S, u0)
    size = multivec.norm(tv)
    theta = metric_factor(spec, tv, cfg)
    return MeasureReport(theta.value / size, theta.error_estimate / size, "mc", theta.samples_or_nodes)


# ---------------------------------------------------------------------------
# rescaling invariance

def rescaled_measure_invariance(S: ParamSurface, m: MetricSpec, spec: DistanceSpec,
                                cfg: IntegrationConfig = IntegrationConfig()):
    """Normalised intrinsic measure in metric ``m`` and in the standard metric.

    Each value is (integral of |tau_{Sigma,V}| dvol_p) / vol_{2n+1}(B_1) with
    both factors computed in the respective metric; returns a pair of reports
    (rescaled, standard).  The two should agree.
    """
    _require_constant_factor(spec)
    n = S.n
    std_cfg = cfg.with_seed(_derived_seed(cfg.seed, 0))
    std = _normalised(S, None, spec, std_cfg)
    if m.is_standard:
        return std, std
    return _normalised(S, m, spec, cfg.with_seed(_derived_seed(cfg.seed, 1))), std


def _derived_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1, dtype=np.uint32)[0])


def _normalised(S, metric, spec, cfg) -> MeasureReport:
    def f(u):
        return S.vertical_density(u, metric)

    integral = _cubature(f, S, cfg)
    vol = ball_volume(spec, S.n, cfg, metric)
    value = integral.value / vol.value
    rel = math.hypot(integral.error / abs(integral.value) if integral.value else 0.0,
                     vol.error_estimate / vol.value)
    return MeasureReport(value, abs(value) * rel, "quadrature+mc", integral.evaluations + vol.samples_or_nodes,
                         integral.converged)
