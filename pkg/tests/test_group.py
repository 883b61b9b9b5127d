import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from hmeasure.errors import DimensionError, DistanceSpecError, EvaluationError
from hmeasure.group import (DistanceSpec, GroupPoint, Poly, PolyVectorField, bracket_table,
                            coords_to_frame, dilate, distance, frame_at, group_inv, group_mul,
                            lie_bracket, standard_frame)


def law_oracle(x, y):
    # written out independently of the library: x.y for H^n
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = (len(x) - 1) // 2
    out = x + y
    out[-1] = x[-1] + y[-1] + sum(x[k] * y[k + n] - x[k + n] * y[k] for k in range(n))
    return out


def pt(*c):
    return GroupPoint.of(*c)


coord = st.floats(-5, 5, allow_nan=False)


@st.composite
def points(draw, n=None):
    n = n or draw(st.integers(1, 4))
    return GroupPoint(n, np.array(draw(st.lists(coord, min_size=2 * n + 1, max_size=2 * n + 1))))


@st.composite
def triples(draw):
    n = draw(st.integers(1, 4))
    return draw(points(n)), draw(points(n)), draw(points(n))


def test_mul_example():
    assert group_mul(pt(1, 0, 0), pt(0, 1, 0)).coords.tolist() == [1, 1, 1]


def test_identity_and_inverse_examples():
    x = pt(1, 2, 3)
    assert group_mul(x, GroupPoint.identity(1)) == x
    assert group_inv(x).coords.tolist() == [-1, -2, -3]
    assert group_inv(GroupPoint.identity(2)) == GroupPoint.identity(2)
    assert np.all(group_mul(x, pt(-1, -2, -3)).coords == 0)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        group_mul(pt(1, 0, 0), pt(0, 0, 0, 0, 0))
    with pytest.raises(DimensionError):
        GroupPoint.of(1, 2)
    with pytest.raises(ValueError):
        GroupPoint.of(1, np.nan, 0)


def test_coords_are_read_only():
    x = pt(1, 2, 3)
    with pytest.raises(ValueError):
        x.coords[0] = 5


@given(triples())
def test_associativity_and_oracle(t):
    x, y, z = t
    lhs = group_mul(group_mul(x, y), z).coords
    rhs = group_mul(x, group_mul(y, z)).coords
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, np.max(np.abs(lhs)))
    assert np.allclose(group_mul(x, y).coords, law_oracle(x.coords, y.coords), rtol=0, atol=1e-12)


@given(points())
def test_inverse_property(x):
    assert np.max(np.abs(group_mul(x, group_inv(x)).coords)) < 1e-12
    assert np.max(np.abs(group_mul(group_inv(x), x).coords)) < 1e-12


def test_dilate_examples():
    assert dilate(2, pt(1, 1, 1)).coords.tolist() == [2, 2, 4]
    x = pt(0.3, -1.2, 2.5)
    assert dilate(1.0, x) == x
    for r in (0, -1.0):
        with pytest.raises(ValueError):
            dilate(r, x)


@given(triples(), st.floats(0.1, 5), st.floats(0.1, 5))
def test_dilation_homomorphism(t, r, s):
    x, y, _ = t
    lhs = dilate(r, group_mul(x, y)).coords
    rhs = group_mul(dilate(r, x), dilate(r, y)).coords
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
    assert np.allclose(dilate(r, dilate(s, x)).coords, dilate(r * s, x).coords, rtol=1e-12, atol=1e-12)


def test_distance_examples():
    o = GroupPoint.identity(1)
    assert distance(DistanceSpec.koranyi(), o, pt(1, 0, 0)) == pytest.approx(1.0, abs=1e-15)
    assert distance(DistanceSpec.koranyi(), o, pt(0, 0, 1)) == pytest.approx(2.0, abs=1e-15)
    assert distance(DistanceSpec.maxdist(), o, pt(0, 0, 4)) == pytest.approx(2.0, abs=1e-15)
    with pytest.raises(DimensionError):
        distance(DistanceSpec.koranyi(), o, GroupPoint.identity(2))


def koranyi_profile(s, t):
    return (s ** 4 + 16 * t * t) ** 0.25


SPECS = [DistanceSpec.koranyi(), DistanceSpec.maxdist(), DistanceSpec.radial(koranyi_profile)]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.label)
@given(t=triples(), r=st.floats(0.05, 20))
def test_distance_invariances(spec, t, r):
    x, y, z = t
    d = distance(spec, x, y)
    assert distance(spec, group_mul(z, x), group_mul(z, y)) == pytest.approx(d, rel=1e-9, abs=1e-9)
    o = GroupPoint.identity(x.n)
    g = distance(spec, o, x)
    assert distance(spec, o, dilate(r, x)) == pytest.approx(r * g, rel=1e-12, abs=1e-300)


def test_radial_matches_koranyi(rng):
    spec = DistanceSpec.radial(koranyi_profile)
    x = rng.normal(size=(50, 5))
    assert np.allclose(spec.gauge(x), DistanceSpec.koranyi().gauge(x), rtol=1e-14)


def test_radial_profile_rejections():
    with pytest.raises(DistanceSpecError):
        DistanceSpec.radial(lambda s, t: s + np.abs(t))  # not homogeneous
    with pytest.raises(DistanceSpecError):
        DistanceSpec.radial(lambda s, t: s)  # vanishes on the vertical axis
    with pytest.raises(DistanceSpecError):
        DistanceSpec.radial(lambda s, t: s / 0.0 + t)
    spec = DistanceSpec.custom(lambda x: np.where(x[..., 0] > 1, np.inf, 1.0))
    with pytest.raises(EvaluationError):
        distance(spec, GroupPoint.identity(1), pt(2, 0, 0))


def test_bounds_contain_ball(rng):
    for spec in SPECS + [DistanceSpec.radial(lambda s, t: np.maximum(s, 2 * np.sqrt(np.abs(t))))]:
        rh, rv = spec.bounds(2)
        x = rng.uniform(-3, 3, size=(200000, 5))
        inside = x[spec.gauge(x) < 1]
        assert np.all(np.linalg.norm(inside[:, :-1], axis=1) <= rh)
        assert np.all(np.abs(inside[:, -1]) <= rv)


def test_frame_examples():
    F = frame_at(GroupPoint.identity(2))
    assert np.array_equal(F, np.eye(5))
    F = frame_at(pt(1, 2, 0))
    assert F.tolist() == [[1, 0, -2], [0, 1, 1], [0, 0, 1]]


@given(points())
def test_frame_determinant_and_roundtrip(x):
    F = frame_at(x)
    assert np.linalg.det(F) == pytest.approx(1.0, abs=1e-9)
    v = np.arange(1.0, 2 * x.n + 2)
    h = coords_to_frame(x, v)
    assert np.allclose(h @ F, v, rtol=0, atol=1e-12 * max(1.0, np.abs(x.coords).max() ** 2) * 10)


def test_coords_to_frame_paraboloid():
    u1, u2 = 0.7, -0.4
    x = pt(u1, u2, (u1 ** 2 + u2 ** 2) / 2)
    assert np.allclose(coords_to_frame(x, [1, 0, u1]), [1, 0, u1 + u2], atol=1e-15)
    assert np.array_equal(coords_to_frame(GroupPoint.identity(1), [3, 4, 5]), [3, 4, 5])
    with pytest.raises(DimensionError):
        coords_to_frame(x, [1, 0])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_bracket_table(n):
    frame = standard_frame(n)
    Z = frame[-1]
    for (i, j), br in bracket_table(n).items():
        if i <= n and j == i + n:
            assert br == 2.0 * Z
        else:
            assert br.is_zero(), (i, j)


def test_bracket_antisymmetry_and_self():
    X1, X2, Z = standard_frame(1)
    assert lie_bracket(X1, X1).is_zero()
    assert lie_bracket(X2, X1) == -1.0 * lie_bracket(X1, X2)
    # a non-frame field: V = x1^2 d_3, [X2, V] = 0 and [X1, V] = 2 x1 d_3
    V = PolyVectorField((Poly(3), Poly(3), Poly.var(3, 0) * Poly.var(3, 0)))
    assert lie_bracket(X2, V).is_zero()
    assert lie_bracket(X1, V) == PolyVectorField((Poly(3), Poly(3), Poly.var(3, 0, 2.0)))
