import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from app.geometry.heisenberg import (
    IDENTITY,
    Dilation,
    GroupElement,
    commutator,
    dilate,
    dilate_arrays,
    from_symmetric,
    inverse,
    koranyi_ball_volume,
    koranyi_distance,
    koranyi_gauge,
    koranyi_gauge_array,
    multiply,
    multiply_arrays,
    to_symmetric,
)
from app.utils.config import InvalidExperimentUsage

small_ints = st.integers(min_value=-50, max_value=50)
integer_elements = st.builds(GroupElement, small_ints, small_ints, small_ints)
reals = st.floats(min_value=-3, max_value=3, allow_nan=False)
real_elements = st.builds(GroupElement, reals, reals, reals)


@pytest.mark.parametrize(
    "g, h, expected",
    [
        ((1, 0, 0), (0, 1, 0), (1, 1, 1)),
        ((0, 1, 0), (1, 0, 0), (1, 1, 0)),
        ((2, 3, 5), (-2, -3, 1), (0, 0, 0)),
        ((0, 0, 7), (4, 4, 4), (4, 4, 11)),
    ],
    ids=["ab", "ba", "inverse_pair_with_center", "central_translation"]
)
def test_group_law(g, h, expected):
    assert multiply(GroupElement(*g), GroupElement(*h)).as_tuple() == expected


def test_commutator_of_generators_is_center():
    assert commutator(GroupElement(1, 0, 0), GroupElement(0, 1, 0)) == GroupElement(0, 0, 1)


@given(integer_elements, integer_elements, integer_elements)
def test_associativity_on_integer_points(g, h, k):
    assert (g * h) * k == g * (h * k)


@given(integer_elements)
def test_inverse_on_integer_points(g):
    assert g * inverse(g) == IDENTITY
    assert inverse(g) * g == IDENTITY


@given(integer_elements, integer_elements)
def test_commutator_is_central(g, h):
    com = commutator(g, h)
    assert com.a == 0 and com.b == 0
    assert com.c == g.a * h.b - g.b * h.a


@given(integer_elements, integer_elements, st.integers(min_value=1, max_value=5))
def test_dilation_is_automorphism(g, h, r):
    assert dilate(g * h, r) == dilate(g, r) * dilate(h, r)


@given(real_elements, st.floats(min_value=0.1, max_value=10))
def test_gauge_is_homogeneous(g, r):
    assert koranyi_gauge(dilate(g, r)) == pytest.approx(r * koranyi_gauge(g), rel=1e-9, abs=1e-6)


@given(real_elements, real_elements, real_elements)
def test_koranyi_distance_is_left_invariant(g, h, x):
    assert koranyi_distance(x * g, x * h) == pytest.approx(koranyi_distance(g, h), rel=1e-7, abs=1e-6)


@given(real_elements)
def test_gauge_is_inversion_symmetric(g):
    assert koranyi_gauge(inverse(g)) == pytest.approx(koranyi_gauge(g), rel=1e-9, abs=1e-6)


@pytest.mark.parametrize(
    "g, expected",
    [
        ((3, 4, 6), 5.0),
        ((0, 0, 1), 2.0),
        ((1, 0, 0), 1.0),
        ((0, 0, 0), 0.0),
    ],
    ids=["horizontal", "vertical", "unit_a", "identity"]
)
def test_koranyi_gauge_values(g, expected):
    assert koranyi_gauge(GroupElement(*g)) == pytest.approx(expected)


def test_array_forms_agree_with_scalar_forms():
    rng = np.random.default_rng(3)
    p = rng.normal(size=(20, 3))
    q = rng.normal(size=(20, 3))
    products = multiply_arrays(p, q)
    for i in range(20):
        g, h = GroupElement.from_array(p[i]), GroupElement.from_array(q[i])
        np.testing.assert_allclose(products[i], (g * h).as_array())
        assert koranyi_gauge_array(p[i]) == pytest.approx(koranyi_gauge(g))
    np.testing.assert_allclose(from_symmetric(to_symmetric(p)), p)


def test_dilation_preimage_and_compose():
    x = GroupElement(0.3, -0.2, 0.1)
    outer = Dilation(2.0, x)
    inner = Dilation(0.5, GroupElement(0.1, 0.1, -0.4))
    points = np.random.default_rng(0).uniform(-1, 1, size=(50, 3))

    np.testing.assert_allclose(outer.preimage(outer.apply(points)), points, atol=1e-12)
    np.testing.assert_allclose(outer.compose(inner).apply(points), outer.apply(inner.apply(points)), atol=1e-12)
    assert outer.compose(inner).r == 1.0
    assert outer.jacobian == 16.0


def test_dilation_scales_distances():
    d = Dilation(0.25, GroupElement(1, 2, 3))
    g, h = GroupElement(0.4, 0.1, -0.3), GroupElement(-0.2, 0.5, 0.2)
    assert koranyi_distance(d(g), d(h)) == pytest.approx(0.25 * koranyi_distance(g, h))


def test_ball_volume_scales_with_fourth_power():
    assert koranyi_ball_volume(1.0) == pytest.approx(math.pi ** 2 / 8)
    assert koranyi_ball_volume(0.5) == pytest.approx(koranyi_ball_volume(1.0) / 16)


@pytest.mark.parametrize("r", [0, -1.0, float("nan")], ids=["zero", "negative", "nan"])
def test_nonpositive_dilation_raises(r):
    with pytest.raises(InvalidExperimentUsage):
        dilate(GroupElement(1, 1, 1), r)
    with pytest.raises(InvalidExperimentUsage):
        Dilation(r)
    with pytest.raises(InvalidExperimentUsage):
        dilate_arrays(np.zeros((2, 3)), r)
