import math

import numpy as np
import pytest

from app.bv.cut_families import half_space_family
from app.bv.grid import GridGeometry
from app.bv.halfspaces import HalfSpace
from app.bv.perimeter import slice_grid_function
from app.geometry.heisenberg import IDENTITY, GroupElement, koranyi_gauge_array
from app.metrics.cuts import CutMeasure
from app.tasks.collapse_tasks import (
    center_collapse,
    difference_quotient_profile,
    horizontal_control,
    moving_char_check,
    moving_characteristic_map,
    scale_comparison,
    scale_comparison_sweep,
    unit_ball_pairs,
)
from app.tasks.experiment_tasks import build_sigma
from app.utils.config import InvalidExperimentUsage, OutsideGridError

GENERIC = GroupElement(0.031, -0.017, 0.013)
T_LIST = [0.2, 0.1, 0.05, 0.025]


@pytest.fixture(scope="module")
def tall_geometry():
    return GridGeometry(((-1, 1),) * 3, (8, 8, 64))


def sliced(geometry, coordinate):
    dc = geometry.spacing[2]
    return slice_grid_function(geometry.centers[:, coordinate], step=dc, phase=0.25)


def test_half_space_family_does_not_see_the_center(tall_geometry):
    family = half_space_family(32, spacing=0.05, seed=1)
    report = center_collapse(family, tall_geometry, GENERIC, T_LIST)
    assert report.ratios == [0.0] * 4
    assert report.left_invariance_error < 1e-9
    np.testing.assert_allclose(report.denominators, [2 * math.sqrt(math.pi * t) for t in T_LIST], rtol=1e-9)


def test_horizontal_slices_do_not_see_the_center(tall_geometry):
    report = center_collapse(sliced(tall_geometry, 0), tall_geometry, GENERIC, T_LIST)
    assert report.ratios == [0.0] * 4


def test_vertical_slices_collapse_like_square_root(tall_geometry):
    report = center_collapse(sliced(tall_geometry, 2), tall_geometry, GENERIC, T_LIST)
    ratios = report.ratios
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    np.testing.assert_allclose(report.numerators[:2], T_LIST[:2], rtol=0.05)
    assert report.resolution_floor == pytest.approx(2 * tall_geometry.spacing[2])
    assert report.slope == pytest.approx(0.5, abs=0.15)
    assert [row["fitted"] for row in report.rows()] == [True, True, False, False]


def test_horizontal_control_keeps_unit_ratio(tall_geometry):
    family = half_space_family(64, spacing=0.02, seed=0)
    report = horizontal_control(family, tall_geometry, GENERIC, T_LIST)
    assert report.denominators == pytest.approx(T_LIST)
    assert all(0.5 < ratio < 1.5 for ratio in report.ratios)


def test_collapse_validation(tall_geometry):
    family = half_space_family(4, spacing=0.1)
    with pytest.raises(InvalidExperimentUsage):
        center_collapse(family, tall_geometry, GENERIC, [0.1, -0.1])
    with pytest.raises(OutsideGridError):
        center_collapse(family, tall_geometry, GroupElement(0, 0, 0.9), [0.2])


def test_unit_ball_pairs():
    p, q = unit_ball_pairs(8, seed=0)
    assert p.shape == q.shape
    assert 0 < len(p) < 256
    assert (koranyi_gauge_array(p) <= 1).all() and (koranyi_gauge_array(q) <= 1).all()


@pytest.fixture(scope="module")
def scale_geometry():
    return GridGeometry(((-1, 1),) * 3, (24, 24, 48))


def test_scale_comparison_on_a_half_space(scale_geometry):
    sigma = CutMeasure(scale_geometry.size, [(HalfSpace(IDENTITY, 0.0).to_grid_set(scale_geometry).as_cut(), 1.0)])
    # a crossing site of the boundary plane
    x = GroupElement(0.0, float(scale_geometry.axis_centers(1)[12]), float(scale_geometry.axis_centers(2)[24]))
    report = scale_comparison(sigma, scale_geometry, x, [1.5, 0.15], delta=0.1, eps=0.1,
                              pairs_log2=8, workers=1)
    assert report.discrepancies[0] is None
    assert report.skipped[0]["r"] == 1.5
    assert report.skipped[0]["exit_code"] == 7
    assert report.discrepancies[1] == 0.0
    assert report.bad_parts[1] == 0.0
    assert report.triangle_holds[1]
    assert report.parameters[1]["R0"] == pytest.approx(0.375)
    assert len(report.rows()) == 2


def test_scale_discrepancy_falls_on_smooth_slices():
    geometry = GridGeometry(((-0.5, 0.5),) * 3, (32, 32, 64))
    sigma = build_sigma({"function": "a+b2+c", "step": 2 * float(geometry.spacing[2])}, geometry, {})
    # in the c-layer of x the level sets sit on voxel faces
    x = GroupElement(0.0, 0.0, float(geometry.axis_centers(2)[32]))
    report = scale_comparison(sigma, geometry, x, [0.4, 0.05], delta=0.1, eps=0.2, pairs_log2=12, workers=2)
    assert report.skipped == []
    large, small = report.discrepancies
    assert large >= 2 * small
    assert report.diagnostics[0]["good"] == 0
    assert report.diagnostics[1]["good"] > 0
    assert all(report.triangle_holds)


def test_scale_comparison_validation(scale_geometry):
    sigma = CutMeasure(scale_geometry.size, [])
    with pytest.raises(InvalidExperimentUsage):
        scale_comparison(sigma, scale_geometry, IDENTITY, [0.1, 0.2], 0.1, 0.1)
    with pytest.raises(InvalidExperimentUsage):
        scale_comparison(sigma, scale_geometry, IDENTITY, [0.2, 0.1], 0.1, 0.1, R0_factor=2.0)


def test_scale_comparison_sweep_of_empty_measure(scale_geometry):
    sigma = CutMeasure(scale_geometry.size, [])
    reports = scale_comparison_sweep(sigma, scale_geometry, IDENTITY, [0.15], deltas=(0.2, 0.1), epss=(0.1,),
                                     pairs_log2=6, workers=1)
    assert len(reports) == 2
    assert [report.parameters[0]["delta"] for report in reports] == [0.2, 0.1]
    assert all(report.discrepancies == [0.0] for report in reports)


@pytest.mark.parametrize("n, bound", [(2, 0.0), (100, 1e-12)], ids=["two_points", "hundred_points"])
def test_moving_characteristic_function_is_isometric(n, bound):
    assert moving_char_check(n) <= bound


def test_moving_characteristic_map_shape():
    f = moving_characteristic_map(5)
    assert f.shape == (5, 4)
    np.testing.assert_array_equal(f.values[2], [1, 1, 0, 0])
    with pytest.raises(InvalidExperimentUsage):
        moving_characteristic_map(1)


def test_difference_quotient_profile():
    rows = difference_quotient_profile(101, 0.5, [0.1, 0.05])
    for row, h in zip(rows, [0.1, 0.05]):
        assert row["h"] == pytest.approx(h)
        assert row["mass"] == pytest.approx(h)
        assert row["support_lo"] == pytest.approx(0.5)
        assert row["support_hi"] == pytest.approx(0.5 + h)
        assert row["quotient_mass"] == pytest.approx(1.0)
    with pytest.raises(InvalidExperimentUsage):
        difference_quotient_profile(101, 0.95, [0.1])
