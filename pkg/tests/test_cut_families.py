import math

import numpy as np
import pytest

from app.bv.cut_families import (
    HalfSpaceMeasure,
    bad_mass_decay,
    good_bad_cuts,
    half_space_family,
    straighten,
)
from app.bv.grid import GridGeometry, GridSet
from app.bv.halfspaces import HalfSpace
from app.geometry.heisenberg import IDENTITY
from app.metrics.cuts import CutMeasure
from app.tasks.collapse_tasks import check_center_saturation
from app.tasks.experiment_tasks import build_sigma
from app.utils.config import InvalidExperimentUsage


@pytest.fixture(scope="module")
def geometry():
    return GridGeometry(((-1, 1),) * 3, (24, 24, 48))


def half_space_sigma(geometry, *thetas):
    return CutMeasure(geometry.size, [(HalfSpace(IDENTITY, theta).to_grid_set(geometry).as_cut(), 1.0)
                                      for theta in thetas])


def angle_gap(theta, target):
    gap = (theta - target) % (2 * math.pi)
    return min(gap, 2 * math.pi - gap)


def test_half_space_family_approximates_projection_distance():
    family = half_space_family(64, spacing=0.02, extent=0.5, seed=0)
    assert len(family) % 64 == 0
    assert family.mass() == pytest.approx(math.pi * 0.02 / 128 * len(family), rel=1e-12)

    p = np.array([[0.1, 0.0, 0.3], [-0.1, 0.1, 0.0], [0.0, 0.0, 0.0]])
    q = np.array([[0.3, 0.0, -0.2], [0.1, -0.1, 0.5], [0.0, 0.0, 0.4]])
    expected = np.hypot(p[:, 0] - q[:, 0], p[:, 1] - q[:, 1])
    distance = family.distance(p, q)
    np.testing.assert_allclose(distance[:2], expected[:2], rtol=0.05)
    assert distance[2] == 0.0


def test_half_space_family_is_saturated_along_the_center():
    family = half_space_family(16, spacing=0.05, seed=2)
    points = np.random.default_rng(0).uniform(-0.4, 0.4, size=(50, 3))
    assert check_center_saturation(family, points, 0.3)


def test_half_space_family_validation():
    with pytest.raises(InvalidExperimentUsage):
        half_space_family(0)
    with pytest.raises(InvalidExperimentUsage):
        half_space_family(4, spacing=0.0)


def test_half_space_measure_on_grid(geometry):
    measure = HalfSpaceMeasure([(HalfSpace(IDENTITY, 0.0), 0.5), (HalfSpace(IDENTITY, math.pi / 2), 0.25)])
    sigma = measure.to_cut_measure(geometry)
    assert sigma.n == geometry.size
    assert sigma.weights.tolist() == [0.5, 0.25]
    assert measure.to_dict()["atoms"][1]["weight"] == 0.25
    assert HalfSpaceMeasure().distance(np.zeros((3, 3)), np.ones((3, 3))).tolist() == [0.0, 0.0, 0.0]


def test_bad_mass_is_nonincreasing(geometry):
    sigma = half_space_sigma(geometry, 0.0)
    report = bad_mass_decay(sigma, geometry, eps=0.1, R_list=[0.4, 0.2], site_budget=48, seed=3, workers=2)
    assert len(report.masses) == 2
    assert report.total_mass == pytest.approx(4.0)
    assert report.total_mass >= report.masses[0] >= report.masses[1] >= 0
    assert report.masses[0] > 0
    assert report.sites_evaluated == 48
    assert report.to_dict()["R"] == [0.4, 0.2]


def test_bad_mass_decays_on_smooth_slices():
    geometry = GridGeometry(((-1, 1),) * 3, (48, 48, 96))
    sigma = build_sigma({"function": "a+b2+c", "step": 4 * float(geometry.spacing[2])}, geometry, {})
    report = bad_mass_decay(sigma, geometry, eps=0.15, R_list=[0.4, 0.2, 0.1, 0.05], seed=0, workers=4)
    masses = report.masses
    assert all(a >= b for a, b in zip(masses, masses[1:]))
    assert 0 < masses[-1] < 0.25 * masses[0]
    assert masses[0] <= report.total_mass * (1 + 1e-9)


def test_bad_mass_needs_decreasing_radii(geometry):
    with pytest.raises(InvalidExperimentUsage):
        bad_mass_decay(half_space_sigma(geometry, 0.0), geometry, 0.1, [0.2, 0.4])


def test_good_and_bad_cuts(geometry):
    slab = GridSet.from_predicate(geometry, lambda p: p[:, 2] >= 0).as_cut()
    sigma = CutMeasure(geometry.size, [(HalfSpace(IDENTITY, 0.0).to_grid_set(geometry).as_cut(), 1.0), (slab, 0.5)])
    report = good_bad_cuts(sigma, geometry, IDENTITY, delta=0.1, eps=0.1, r=0.2, R0=0.45)
    assert report.good == [0]
    assert report.bad == [1]
    assert 0 in report.witnesses
    assert report.diagnostics["good_mass"] == 1.0
    assert report.diagnostics["good_mass_constant"] == pytest.approx(1.0 * 0.1 / 0.2)
    assert report.diagnostics["half_space_constant"] is not None


def test_good_bad_needs_small_r(geometry):
    with pytest.raises(InvalidExperimentUsage):
        good_bad_cuts(half_space_sigma(geometry, 0.0), geometry, IDENTITY, 0.1, 0.1, r=0.3, R0=0.5)


@pytest.mark.parametrize("theta", [0.0, math.pi], ids=["a_positive", "a_negative"])
def test_straighten_recovers_half_space(geometry, theta):
    sigma = half_space_sigma(geometry, theta)
    result = straighten(sigma, geometry, IDENTITY, delta=0.1, eps=0.1, r=0.2, R0=0.45)
    assert len(result.measure) == 1
    H, weight = result.measure.atoms[0]
    assert weight == 1.0
    assert abs(H.basepoint.a) < 1e-12
    assert angle_gap(H.normal_angle, theta) < 0.15
    assert result.closeness[0] == 0.0
    assert result.demoted == []
    assert len(result.good_part(sigma)) == 1
    assert len(result.bad_part(sigma)) == 0
    assert result.to_dict()["half_spaces"]["atoms"][0]["weight"] == 1.0
