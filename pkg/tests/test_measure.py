import math

import numpy as np
import pytest
from scipy import integrate

from hmeasure import multivec as mv
from hmeasure.errors import (BallTouchesBoundaryError, NotSimpleError, NotVerticalError,
                             UnsupportedDistanceError)
from hmeasure.group import DistanceSpec
from hmeasure.measure import (IntegrationConfig, MeasureReport, MetricSpec, ball_volume, blowup_limit,
                              blowup_quotient, metric_factor, rescaled_measure_invariance,
                              riemannian_volume, spherical_measure)
from hmeasure.multivec import PVector
from hmeasure.surface import ParamSurface, vertical_tangent

from conftest import paraboloid_h1

# frozen oracle values (computed once by the reference integrals below)
PLANE_AREA_UNIT_SQUARE = 1.280789275273404       # int int sqrt(1+u1^2+u2^2)
KORANYI_THETA_2 = 0.8740191847640402             # (1/2) int_{-1}^{1} sqrt(1-s^4) ds
PARABOLOID_UNIT_SQUARE = 1.082150160093487       # sqrt(2)(sqrt(2)+asinh 1)/3

KOR = DistanceSpec.koranyi()
MAXD = DistanceSpec.maxdist()
FAST = IntegrationConfig(mc_samples=200_000)


def test_frozen_oracles():
    v, _ = integrate.dblquad(lambda y, x: math.sqrt(1 + x * x + y * y), 0, 1, 0, 1, epsabs=1e-13)
    assert v == pytest.approx(PLANE_AREA_UNIT_SQUARE, rel=1e-12)
    v, _ = integrate.quad(lambda s: math.sqrt(1 - s ** 4), -1, 1, epsabs=1e-14)
    assert 0.5 * v == pytest.approx(KORANYI_THETA_2, rel=1e-12)
    assert math.sqrt(2) * (math.sqrt(2) + math.asinh(1)) / 3 == pytest.approx(PARABOLOID_UNIT_SQUARE, rel=1e-15)


def test_report_invariant():
    with pytest.raises(ValueError):
        MeasureReport(1.0, -1e-3, "quadrature", 1)
    with pytest.raises(ValueError):
        IntegrationConfig(mc_samples=0)
    with pytest.raises(ValueError):
        MetricSpec(0.0, (0, 0))


# ---------------------------------------------------------------------------
# volumes and measures

def test_riemannian_volume_examples():
    P = ParamSurface.from_strings(1, ["u1", "u2", "0"], [(0, 1), (0, 1)])
    assert riemannian_volume(P).value == pytest.approx(PLANE_AREA_UNIT_SQUARE, rel=1e-9)
    V = ParamSurface.from_strings(1, ["0", "0", "u1"], [(0, 1)])
    assert riemannian_volume(V).value == pytest.approx(1.0, rel=1e-12)
    a, al, be = -2.5, 0.3, 1.7
    H = ParamSurface.from_strings(1, [f"{a}*u1", "0", "0"], [(al, be)])
    assert riemannian_volume(H).value == pytest.approx(abs(a) * (be - al), rel=1e-12)


def test_spherical_measure_paraboloid():
    r = spherical_measure(paraboloid_h1(), KOR)
    assert r.value == pytest.approx(PARABOLOID_UNIT_SQUARE, rel=1e-6)
    assert r.method == "quadrature" and r.converged


@pytest.mark.parametrize("params", [(1.0, 1.0, 0.0, 0.0), (1.5, -0.7, 0.4, 2.0), (0.3, 2.2, -1.0, 0.5)])
def test_spherical_measure_hyperplane(params):
    a1, a2, b, c = params
    S = ParamSurface.from_strings(1, [f"{a1}*u1", f"{a2}*u2", f"{b}*u1+{c}*u2"], [(-0.5, 1), (0, 1)])
    dens = lambda u2, u1: math.sqrt(a1 ** 2 * (c - a1 * a2 * u1) ** 2 + a2 ** 2 * (a1 * a2 * u2 + b) ** 2)
    ref, _ = integrate.dblquad(dens, -0.5, 1, 0, 1, epsabs=1e-12, epsrel=1e-11)
    assert spherical_measure(S, MAXD).value == pytest.approx(ref, rel=1e-6)


def test_spherical_measure_lines(rng):
    for _ in range(20):
        a, b = rng.uniform(-3, 3, size=2)
        al = rng.uniform(-2, 1)
        be = al + rng.uniform(0.1, 2)
        L = ParamSurface.from_strings(1, [f"{a:.17g}*u1", "0", f"{b:.17g}*u1"], [(al, be)])
        assert spherical_measure(L, KOR).value == pytest.approx(abs(b) * (be - al), rel=1e-10)


def test_spherical_measure_three_paraboloid():
    S = ParamSurface.from_strings(2, ["u1", "u2", "u3", "0", "(u1^2+u2^2+u3^2)/2"], [(0, 1), (-1, 0.5), (0, 1)])
    ref, _ = integrate.nquad(lambda u1, u2, u3: math.sqrt(u2 ** 2 + 2 * (u3 ** 2 + u1 ** 2)),
                             [[0, 1], [-1, 0.5], [0, 1]], opts={"epsabs": 1e-10, "epsrel": 1e-9})
    assert spherical_measure(S, KOR).value == pytest.approx(ref, rel=1e-6)


def test_custom_distance_rejected():
    custom = DistanceSpec.custom(lambda x: np.abs(x[..., 0]) + np.sqrt(np.abs(x[..., -1])) + np.abs(x[..., 1]))
    with pytest.raises(UnsupportedDistanceError):
        spherical_measure(paraboloid_h1(), custom)
    with pytest.raises(UnsupportedDistanceError):
        rescaled_measure_invariance(paraboloid_h1(), MetricSpec(2.0, (0, 0)), custom)


def random_surface(rng, n, p):
    dim = 2 * n + 1
    comps = []
    for j in range(dim):
        c = rng.normal(size=p + 2)
        comps.append(" + ".join([f"({c[i]:.17g})*u{i + 1}" for i in range(p)]
                                + [f"({c[p]:.17g})*u1*u{p}", f"({c[p + 1]:.17g})*sin(u1)"]))
    for i in range(p):
        comps[i] = f"u{i + 1} + " + comps[i]
    return ParamSurface.from_strings(n, comps, [(0, 1)] * p)


def left_translate(S, z):
    """Components of z . phi(u) as expression text."""
    n = S.n
    c = [f"({x})" for x in S.components]
    out = [f"{z[j]:.17g} + {c[j]}" for j in range(2 * n)]
    cross = " + ".join(f"({z[k]:.17g})*{c[k + n]} - ({z[k + n]:.17g})*{c[k]}" for k in range(n))
    out.append(f"{z[-1]:.17g} + {c[-1]} + {cross}")
    return ParamSurface.from_strings(n, out, S.domain)


@pytest.mark.parametrize("np_", [(1, 1), (1, 2), (2, 2), (2, 3)])
def test_spherical_below_riemannian_and_translation_invariant(rng, np_):
    n, p = np_
    for _ in range(3):
        S = random_surface(rng, n, p)
        sm = spherical_measure(S, KOR).value
        assert sm <= riemannian_volume(S).value * (1 + 1e-12)
        T = left_translate(S, rng.normal(size=2 * n + 1))
        assert spherical_measure(T, KOR).value == pytest.approx(sm, rel=1e-8)


def test_thread_independence():
    S = paraboloid_h1()
    assert spherical_measure(S, KOR) == spherical_measure(S, KOR, IntegrationConfig(threads=3))
    tau = PVector.basis(1, 1, 3)
    assert metric_factor(KOR, tau, FAST) == metric_factor(KOR, tau, IntegrationConfig(mc_samples=200_000, threads=4))


# ---------------------------------------------------------------------------
# metric factors

def test_metric_factor_values():
    tau = PVector.basis(1, 1, 3)
    for method in ("stratified", "sobol"):
        cfg = IntegrationConfig(mc_method=method)
        r = metric_factor(MAXD, tau, cfg)
        assert abs(r.value - 4.0) <= 3 * r.error_estimate
        r = metric_factor(KOR, tau, cfg)
        assert abs(r.value - KORANYI_THETA_2) <= 3 * r.error_estimate
        assert r.method == "mc" and r.samples_or_nodes >= 10 ** 6 * 0.99


def test_metric_factor_rejects_bad_tau():
    with pytest.raises(NotVerticalError):
        metric_factor(KOR, PVector.basis(1, 1, 2))
    with pytest.raises(NotSimpleError):
        metric_factor(KOR, PVector.basis(2, 1, 2, 5) + PVector.basis(2, 3, 4, 5))


def random_vertical(rng, n, p):
    vs = [PVector.vector(n, rng.normal(size=2 * n + 1)) for _ in range(p - 1)]
    return mv.wedge_all(vs + [PVector.basis(n, 2 * n + 1)]) * float(rng.uniform(0.2, 3))


def radial_sum(s, t):
    return s + 2 * np.sqrt(np.abs(t))


@pytest.mark.parametrize("spec", [KOR, MAXD, DistanceSpec.radial(radial_sum, "sum")], ids=lambda s: s.label)
@pytest.mark.parametrize("np_", [(1, 2), (2, 3)])
def test_metric_factor_constancy(rng, spec, np_):
    n, p = np_
    vals, ses = [], []
    for i in range(20):
        tau = random_vertical(rng, n, p)
        assert tau.is_vertical
        r = metric_factor(spec, tau, IntegrationConfig(mc_samples=100_000, seed=1000 + i))
        vals.append(r.value)
        ses.append(r.error_estimate)
    assert np.std(vals, ddof=1) < 3 * np.mean(ses)


def test_rescaled_metric_factor(rng):
    tau = PVector.basis(1, 1, 3)
    base = metric_factor(KOR, tau, FAST)
    # a along the horizontal part of tau (or zero): theta~ = theta / |lambda|
    for lam, a in [(2.0, (0.0, 0.0)), (0.5, (0.0, 0.0)), (-3.0, (0.7, 0.0))]:
        r = metric_factor(KOR, tau, FAST.with_seed(7), MetricSpec(lam, a))
        band = 3 * math.hypot(r.error_estimate, base.error_estimate / abs(lam))
        assert abs(r.value - base.value / abs(lam)) < band
    # general a: the slice jacobian is sqrt(1 + |a_perp|^2) / |lambda|
    for lam, a in [(1.0, (0.0, 0.5)), (2.0, (0.3, -0.4))]:
        factor = math.sqrt(1 + a[1] ** 2) / abs(lam)
        r = metric_factor(KOR, tau, FAST.with_seed(8), MetricSpec(lam, a))
        band = 3 * math.hypot(r.error_estimate, base.error_estimate * factor)
        assert abs(r.value - base.value * factor) < band
        assert abs(r.value - base.value / abs(lam)) > band


@pytest.mark.parametrize("lam", [0.5, 2.0, -1.5])
def test_rescaled_ball_volume(lam, rng):
    a = tuple(rng.normal(size=2))
    v = ball_volume(KOR, 1, FAST)
    vt = ball_volume(KOR, 1, FAST.with_seed(3), MetricSpec(lam, a))
    assert abs(vt.value - v.value / abs(lam)) < 3 * math.hypot(vt.error_estimate, v.error_estimate / abs(lam))


def test_koranyi_ball_volume_oracle():
    # |B_1| = int_{|t|<1/4} pi sqrt(1 - 16 t^2) dt = pi^2 / 8
    v = ball_volume(KOR, 1, IntegrationConfig())
    assert abs(v.value - math.pi ** 2 / 8) < 3 * v.error_estimate


# ---------------------------------------------------------------------------
# rescaling invariance

def test_rescaled_invariance_standard_is_identical():
    S = paraboloid_h1()
    a, b = rescaled_measure_invariance(S, MetricSpec.standard(1), KOR, FAST)
    assert a is b


@pytest.mark.parametrize("lam", [0.5, 2.0])
@pytest.mark.parametrize("spec", [KOR, MAXD], ids=lambda s: s.label)
def test_rescaled_invariance(lam, spec, rng):
    S = paraboloid_h1()
    a = tuple(rng.uniform(-1, 1, size=2))
    resc, std = rescaled_measure_invariance(S, MetricSpec(lam, a), spec, FAST)
    assert abs(resc.value - std.value) < 3 * math.hypot(resc.error_estimate, std.error_estimate)


def test_rescaled_invariance_h2(rng):
    S = ParamSurface.from_strings(2, ["u1", "u2", "u3", "0", "(u1^2+u2^2+u3^2)/2"], [(0, 1)] * 3)
    resc, std = rescaled_measure_invariance(S, MetricSpec(2.0, tuple(rng.uniform(-1, 1, 4))), KOR, FAST)
    assert abs(resc.value - std.value) < 3 * math.hypot(resc.error_estimate, std.error_estimate)


# ---------------------------------------------------------------------------
# blow-up

def test_vertical_line_quotient_is_two():
    V = ParamSurface.from_strings(1, ["0", "0", "u1"], [(-1, 1)])
    for r in (0.5, 0.1, 2.0 ** -6):
        q = blowup_quotient(V, [0.0], r, MAXD)
        assert abs(q.value - 2.0) <= max(q.error_estimate, 1e-9)
        assert abs(q.value - 2.0) < 1e-4


def test_paraboloid_blowup_converges():
    S = paraboloid_h1(((-1, 2), (-1, 2)))
    u0 = [0.5, 0.25]
    tv = mv.norm(vertical_tangent(S, u0))
    limit = KORANYI_THETA_2 / tv
    errs = [abs(blowup_quotient(S, u0, 2.0 ** -k, KOR).value - limit) for k in range(2, 7)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] / limit < 0.02
    lim = blowup_limit(S, u0, KOR)
    assert abs(lim.value - limit) < 3 * lim.error_estimate


def test_characteristic_point_flagged():
    S = paraboloid_h1(((-1, 1), (-1, 1)))
    q = blowup_quotient(S, [0.0, 0.0], 0.1, KOR)
    assert any("characteristic" in note for note in q.notes)


def test_ball_touching_boundary():
    S = paraboloid_h1()
    with pytest.raises(BallTouchesBoundaryError):
        blowup_quotient(S, [0.5, 0.5], 1.0, KOR)
    with pytest.raises(BallTouchesBoundaryError):
        blowup_quotient(S, [0.0, 0.5], 0.01, KOR)
    with pytest.raises(ValueError):
        blowup_quotient(S, [0.5, 0.5], 0.0, KOR)
