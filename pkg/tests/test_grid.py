from unittest import mock

import numpy as np
import pytest

from app.bv.grid import GridGeometry, GridSet, PerimeterField, ball_clipped_fraction, ball_voxels
from app.bv.perimeter import (
    ball_perimeter_ratio,
    crossing_sites,
    grid_function_variation,
    lipschitz_diagnostic,
    mollified_perimeter,
    perimeter,
    slice_grid_function,
    total_perimeter_measure,
)
from app.geometry.heisenberg import IDENTITY, GroupElement, koranyi_distance_array
from app.utils.config import InvalidExperimentUsage, MissingInputError, OutsideGridError


@pytest.fixture
def geometry():
    return GridGeometry(((-1, 1),) * 3, (16, 16, 32))


@pytest.fixture
def half_space(geometry):
    return GridSet.from_predicate(geometry, lambda p: p[:, 0] >= 0)


def generic_set(geometry):
    return GridSet.from_predicate(geometry, lambda p: p[:, 0] + p[:, 1] ** 2 + p[:, 2] >= 0.05)


def test_geometry_basics(geometry):
    assert geometry.size == 16 * 16 * 32
    np.testing.assert_allclose(geometry.spacing, [0.125, 0.125, 0.0625])
    assert geometry.centers.shape == (geometry.size, 3)
    assert geometry.q_snap_error <= geometry.spacing[2] / 2 + 1e-12

    index, inside = geometry.locate([[0.01, -0.01, 0.99], [1.5, 0, 0]])
    assert inside.tolist() == [True, False]
    np.testing.assert_allclose(geometry.centers[index[0]], [0.0625, -0.0625, 0.96875])


@pytest.mark.parametrize(
    "bounds, resolution",
    [
        (((-1, 1), (-1, 1), (1, -1)), (4, 4, 4)),
        (((-1, 1),) * 3, (4, 1, 4)),
        (((-1, 1),) * 2, (4, 4)),
    ],
    ids=["decreasing_bounds", "single_voxel_axis", "two_axes"]
)
def test_invalid_geometry_raises(bounds, resolution):
    with pytest.raises(InvalidExperimentUsage):
        GridGeometry(bounds, resolution)


def test_every_voxel_is_on_one_q_line(geometry):
    lines = geometry.q_lines
    assert np.unique(lines.head).size == lines.head.size
    assert np.unique(lines.tail).size == lines.tail.size


def test_half_space_perimeter(geometry, half_space):
    field = perimeter(half_space)
    assert field.total() == pytest.approx(4.0, rel=1e-12)
    assert perimeter(half_space, lines=geometry.q_lines).total() == 0.0

    sites, weights = crossing_sites(half_space)
    assert weights.sum() == pytest.approx(field.total())
    np.testing.assert_allclose(sites[:, 0], 0.0, atol=1e-12)


def test_mollified_perimeter_agrees_on_half_space(half_space):
    estimate = mollified_perimeter(half_space)
    assert estimate["l1"] == pytest.approx(4.0, rel=1e-9)
    assert estimate["l2"] == pytest.approx(4.0, rel=1e-9)


def test_perimeter_is_complement_symmetric(geometry):
    E = generic_set(geometry)
    assert perimeter(E).total() == perimeter(E.complement()).total()
    assert perimeter(E).total() > 0


def test_perimeter_is_additive_over_regions(geometry):
    E = generic_set(geometry)
    region = geometry.centers[:, 2] > 0.3
    total = perimeter(E).total()
    assert perimeter(E, region).total() + perimeter(E, ~region).total() == pytest.approx(total, rel=1e-12)


def test_integer_function_slices_recover_variation(geometry):
    centers = geometry.centers
    values = np.floor(3 * centers[:, 0]) + np.floor(2 * centers[:, 2]) - np.floor(centers[:, 1])
    sigma = slice_grid_function(values, step=1.0)
    assert total_perimeter_measure(sigma, geometry).total() == pytest.approx(
        grid_function_variation(values, geometry), rel=1e-10)


def test_slice_levels_and_phase():
    values = np.array([-0.9, -0.4, 0.3, 0.9])
    sigma = slice_grid_function(values, step=0.5, phase=0.5)
    assert sigma.weights.tolist() == [0.5] * len(sigma)
    np.testing.assert_array_equal(sigma.cuts[0].membership, [True, False, False, False])
    assert len(sigma) == 4
    assert sigma.mass() == pytest.approx(0.5 * (1 + 2 + 2 + 1))

    with pytest.raises(InvalidExperimentUsage):
        slice_grid_function(values, step=0.5, phase=1.0)
    with pytest.raises(InvalidExperimentUsage):
        slice_grid_function(values, step=-1.0)


def test_total_perimeter_needs_matching_grid(geometry):
    with pytest.raises(InvalidExperimentUsage):
        total_perimeter_measure(slice_grid_function(np.arange(5.0)), geometry)


def test_ball_voxels_and_clipping(geometry):
    x = GroupElement(0.1, -0.1, 0.05)
    voxels = ball_voxels(geometry, x, 0.5)
    assert voxels.size > 0
    assert (koranyi_distance_array(geometry.centers[voxels], x.as_array()) <= 0.5).all()
    assert ball_clipped_fraction(geometry, x, 0.5) == 0.0

    edge = GroupElement(0.9, 0.0, 0.0)
    assert ball_clipped_fraction(geometry, edge, 0.5) > 0
    with pytest.raises(OutsideGridError) as excinfo:
        ball_voxels(geometry, edge, 0.5)
    assert excinfo.value.exit_code == 7
    assert excinfo.value.payload["clipped_fraction"] > 0


@pytest.mark.parametrize(
    "center, r",
    [
        ((0.7, 0.0, 0.0), 0.35),
        ((-0.7, 0.0, 0.0), 0.35),
        ((0.0, 0.7, 0.0), 0.35),
        ((0.0, -0.7, 0.0), 0.35),
        ((0.0, 0.0, 0.95), 0.5),
        ((0.0, 0.0, -0.95), 0.5),
    ],
    ids=["a_tip", "minus_a_tip", "b_tip", "minus_b_tip", "upper_pole", "lower_pole"]
)
def test_ball_tips_outside_the_box_are_clipped(geometry, center, r):
    # A cloud holding only the centre fits; the protruding tip must still count.
    with mock.patch("app.bv.grid.reference_ball_cloud", return_value=np.zeros((1, 3))):
        assert 0 < ball_clipped_fraction(geometry, GroupElement(*center), r) < 1
        assert ball_clipped_fraction(geometry, IDENTITY, 0.5) == 0.0
    with pytest.raises(OutsideGridError):
        ball_voxels(geometry, GroupElement(*center), r)


def test_ball_perimeter_ratio_of_half_space(geometry, half_space):
    field = perimeter(half_space)
    ratio = ball_perimeter_ratio(field, IDENTITY, 0.5)
    assert 0 < ratio < np.inf
    sweep = [(IDENTITY, 0.5), (GroupElement(0.3, 0, 0), 0.4)]
    sigma = slice_grid_function(half_space.indicator(), levels=[0.5], step=1.0)
    diagnostic = lipschitz_diagnostic(sigma, geometry, sweep)
    assert diagnostic["sup_ratio"] == pytest.approx(ratio)
    assert diagnostic["argmax"] == [[0.0, 0.0, 0.0], 0.5]


def test_lookup(geometry, half_space):
    points = np.array([[0.2, 0.0, 0.0], [-0.2, 0.5, -0.5]])
    assert half_space.lookup(points).tolist() == [True, False]
    with pytest.raises(OutsideGridError):
        half_space.lookup([[2.0, 0.0, 0.0]])
    assert half_space.lookup([[2.0, 0.0, 0.0]], allow_outside=True).tolist() == [False]


def test_grid_set_codec(geometry):
    E = generic_set(geometry)
    restored = GridSet.from_bytes(E.to_bytes())
    assert restored.geometry == geometry
    np.testing.assert_array_equal(restored.membership, E.membership)
    assert restored.volume == pytest.approx(E.volume)


@pytest.mark.parametrize(
    "data",
    [b"HC", b"XXXX" + bytes(80), None],
    ids=["short", "bad_magic", "truncated"]
)
def test_grid_set_codec_errors(geometry, data):
    if data is None:
        data = generic_set(geometry).to_bytes()[:-10]
    with pytest.raises(MissingInputError):
        GridSet.from_bytes(data)


def test_perimeter_field_csv(geometry, half_space):
    field = perimeter(half_space)
    restored = PerimeterField.from_csv(geometry, field.to_csv())
    np.testing.assert_array_equal(restored.density, field.density)
