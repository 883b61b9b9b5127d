"""Built-in worked examples with closed-form answers.

Each entry is checked two ways: the intrinsic density |pi_V(Phi_u1 ^ ...)|
against the closed-form integrand at random parameter points, and the
integrated measure against a closed form (or an independent scipy
reference integral of the closed-form integrand).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .expr import parse, u_vars
from .group import DistanceSpec
from .measure import IntegrationConfig, metric_factor, spherical_measure
from .multivec import PVector
from .surface import ParamSurface

CLOSED_FORM_RTOL = 1e-6
INTEGRAND_ATOL = 1e-10
MC_SIGMAS = 3.0


@dataclass(frozen=True)
class Check:
    name: str
    expected: float
    got: float
    tol: float
    passed: bool

    def to_dict(self):
        return {"name": self.name, "expected": self.expected, "got": self.got,
                "tol": self.tol, "pass": self.passed}


def relative_check(name, expected, got, rtol) -> Check:
    err = abs(got - expected) / max(abs(expected), 1e-300)
    return Check(name, float(expected), float(got), float(rtol), bool(err <= rtol))


def absolute_check(name, expected, got, atol) -> Check:
    return Check(name, float(expected), float(got), float(atol), bool(abs(got - expected) <= atol))


@dataclass(frozen=True)
class Example:
    name: str
    surface: ParamSurface
    integrand: str               # closed-form density in u1..up
    exact: Optional[float] = None  # closed-form measure, if known
    reference_fn: Optional[Callable[[], float]] = None

    def density(self, u):
        e = parse(self.integrand, u_vars(self.surface.p))
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(e.eval({f"u{i + 1}": u[..., i] for i in range(u.shape[-1])}), u.shape[:-1])

    def reference(self) -> float:
        if self.exact is not None:
            return self.exact
        if self.reference_fn is not None:
            return self.reference_fn()
        # independent adaptive reference on the closed-form integrand
        box = [list(b) for b in self.surface.domain]
        val, _ = integrate.nquad(lambda *u: float(self.density(np.array(u))), box,
                                 opts={"epsabs": 1e-13, "epsrel": 1e-11})
        return val


def paraboloid_h1(domain=((0.0, 1.0), (0.0, 1.0))) -> Example:
    S = ParamSurface.from_strings(1, ["u1", "u2", "(u1^2+u2^2)/2"], domain)
    exact = None
    if tuple(map(tuple, domain)) == ((0.0, 1.0), (0.0, 1.0)):
        exact = math.sqrt(2.0) * (math.sqrt(2.0) + math.asinh(1.0)) / 3.0
    return Example("paraboloid", S, "sqrt(2*u1^2+2*u2^2)", exact)


def hyperplane_h1(a1=1.0, a2=2.0, b=0.5, c=-1.0, domain=((0.0, 1.0), (0.0, 1.0))) -> Example:
    S = ParamSurface.from_strings(1, [f"{a1}*u1", f"{a2}*u2", f"{b}*u1+{c}*u2"], domain)
    k = a1 * a2
    dens = f"sqrt({a1 * a1}*({c}-{k}*u1)^2+{a2 * a2}*({k}*u2+{b})^2)"
    return Example("hyperplane", S, dens)


def paraboloid3_h2(domain=((0.0, 1.0),) * 3) -> Example:
    S = ParamSurface.from_strings(2, ["u1", "u2", "u3", "0", "(u1^2+u2^2+u3^2)/2"], domain)
    ref = _paraboloid3_unit_cube if tuple(map(tuple, domain)) == ((0.0, 1.0),) * 3 else None
    return Example("3-paraboloid", S, "sqrt(u2^2+2*(u3^2+u1^2))", reference_fn=ref)


def _paraboloid3_unit_cube() -> float:
    # the u2 integral of sqrt(u2^2 + c^2) over (0, 1) is elementary
    def inner(u1, u3):
        c2 = 2.0 * (u1 * u1 + u3 * u3)
        if c2 == 0.0:
            return 0.5
        return 0.5 * (math.sqrt(1.0 + c2) + c2 * math.asinh(1.0 / math.sqrt(c2)))

    val, _ = integrate.nquad(inner, [[0.0, 1.0], [0.0, 1.0]], opts={"epsabs": 1e-13, "epsrel": 1e-11})
    return val


def line_h1(a=1.0, b=2.0, alpha=0.0, beta=1.0) -> Example:
    S = ParamSurface.from_strings(1, [f"{a}*u1", "0", f"{b}*u1"], [(alpha, beta)])
    return Example("line", S, f"sqrt({b * b})", abs(b) * (beta - alpha))


def examples() -> list[Example]:
    return [paraboloid_h1(), hyperplane_h1(), paraboloid3_h2(), line_h1()]


def integrand_deviation(ex: Example, points: int = 1000, seed: int = 0) -> float:
    """max |computed density - closed-form integrand| over random domain points."""
    S = ex.surface
    rng = np.random.default_rng(seed)
    u = S.lower + rng.random((points, S.p)) * (S.upper - S.lower)
    return float(np.max(np.abs(S.vertical_density(u) - ex.density(u))))


def koranyi_theta_reference() -> float:
    """Area of {x1^4 + 16 x3^2 < 1}: (1/2) int_{-1}^{1} sqrt(1 - s^4) ds."""
    val, _ = integrate.quad(lambda s: math.sqrt(max(0.0, 1.0 - s ** 4)), -1.0, 1.0, epsabs=1e-14)
    return 0.5 * val


def run_catalog(cfg: IntegrationConfig = IntegrationConfig(), rtol: float = CLOSED_FORM_RTOL,
                include_mc: bool = True) -> list[Check]:
    checks = []
    spec = DistanceSpec.koranyi()
    for ex in examples():
        checks.append(absolute_check(f"{ex.name} integrand {ex.integrand}", 0.0,
                                     integrand_deviation(ex), INTEGRAND_ATOL))
        rep = spherical_measure(ex.surface, spec, cfg)
        checks.append(relative_check(f"{ex.name} measure", ex.reference(), rep.value, rtol))
    if include_mc:
        tau = PVector.basis(1, 1, 3)
        for name, dspec, ref in (("maxdist", DistanceSpec.maxdist(), 4.0),
                                 ("koranyi", spec, koranyi_theta_reference())):
            rep = metric_factor(dspec, tau, cfg)
            tol = MC_SIGMAS * rep.error_estimate
            checks.append(absolute_check(f"metric factor {name} X1^Z", ref, rep.value, tol))
    return checks
