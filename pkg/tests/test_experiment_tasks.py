import numpy as np
import pytest

from app.bv.cut_families import HalfSpaceMeasure
from app.bv.grid import GridGeometry
from app.metrics.cuts import CutMeasure
from app.tasks.experiment_tasks import (
    _basepoints,
    build_geometry,
    build_set,
    build_sigma,
    horizontal_gradient,
    perform_cayley_ball,
    perform_coarea,
)
from app.utils.config import InvalidExperimentUsage
from app.utils.storage_utils import write_json


@pytest.mark.parametrize(
    "function, point, expected",
    [
        ("a", [0.3, -0.2, 0.1], 1.0),
        ("c", [0.5, 0.0, 0.0], 0.5),
        ("c", [0.0, 0.4, 0.2], 0.0),
        ("a+c", [0.0, 0.0, 0.0], 1.0),
    ],
    ids=["a", "c_off_axis", "c_characteristic", "a_plus_c"]
)
def test_horizontal_gradient(function, point, expected):
    assert horizontal_gradient(function, [point])[0] == pytest.approx(expected, abs=1e-8)


def test_random_basepoints_avoid_characteristic_points():
    points = _basepoints({"seed": 0, "basepoint_count": 3, "function": "c"})
    assert len(points) == 3
    gradient = horizontal_gradient("c", np.array([p.as_array() for p in points]))
    assert (gradient > 0).all()


def test_explicit_basepoints():
    points = _basepoints({"seed": 0, "basepoint_count": 3, "basepoints": [[0.1, 0.2, 0.3]]})
    assert [p.as_tuple() for p in points] == [(0.1, 0.2, 0.3)]


def test_build_geometry_uses_resolution():
    geometry = build_geometry({"resolution": [4, 4, 8], "half_width": 0.5})
    assert geometry == GridGeometry(((-0.5, 0.5),) * 3, (4, 4, 8))


def test_build_set_from_half_space():
    geometry = build_geometry({"resolution": [4, 4, 4], "half_width": 1.0})
    E = build_set({"half_space_angle": 0.0}, geometry, {})
    assert E.membership.sum() == geometry.size // 2


def test_build_sigma_sources(tmp_path):
    geometry = build_geometry({"resolution": [4, 4, 8], "half_width": 1.0})
    family = build_sigma({"half_space_family": 4}, geometry, {}, allow_half_spaces=True)
    assert isinstance(family, HalfSpaceMeasure)
    assert build_sigma({"half_space_family": 4}, geometry, {}).n == geometry.size

    path = write_json(str(tmp_path / "sigma.json"), CutMeasure(5, []).to_dict())
    inputs = {}
    with pytest.raises(InvalidExperimentUsage):
        build_sigma({"cut_measure_file": path}, geometry, inputs)
    assert "cut_measure_file" in inputs


def test_perform_cayley_ball():
    output = perform_cayley_ball({"k": 2, "generators": None})
    assert output.result["sizes"] == [5, 17]
    assert output.rows == [{"k": 1, "size": 5}, {"k": 2, "size": 17}]
    assert set(output.artifacts) == {"space.json", "edges.txt"}


def test_perform_cayley_ball_radius_zero():
    output = perform_cayley_ball({"k": 0, "generators": None})
    assert output.result["n"] == 1
    assert output.result["sizes"] == []
    assert output.artifacts["edges.txt"] == ""


def test_perform_coarea():
    output = perform_coarea({"resolution": [4, 4, 6], "half_width": 1.0, "trials": 5, "levels": 3, "seed": 0})
    assert output.result["trials"] == 5
    assert output.result["max_coarea_error"] <= 1e-9
    assert output.result["max_perimeter_error"] <= 1e-9
