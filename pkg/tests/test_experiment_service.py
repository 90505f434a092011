import json
import os
from unittest import mock

import pytest

from app.services.experiment_service import config_hash, load_config, run_config, run_experiment, validate_params
from app.tasks.experiment_tasks import TaskOutput
from app.utils.config import InvalidExperimentUsage, MissingInputError


def fake_task(params):
    return TaskOutput(result={"value": params["n"]}, rows=[{"i": 0, "v": 1.5}],
                      artifacts={"extra.txt": "text", "blob.bin": b"\x00\x01", "data.json": {"a": 1}})


@pytest.fixture
def patched_tasks():
    with mock.patch.dict("app.tasks.experiment_tasks.TASKS", {"moving-char": fake_task}):
        yield


@pytest.mark.parametrize(
    "command, params",
    [
        ("no-such-command", {}),
        ("moving-char", {"unknown": 1}),
        ("moving-char", {"n": 1}),
        ("distortion", {}),
        ("distortion", {"graph": "path4", "cayley": 2}),
        ("alpha", {"function": "a", "half_space_angle": 0.0}),
    ],
    ids=["unknown_command", "unknown_field", "out_of_range", "no_source", "two_sources", "two_set_sources"]
)
def test_validate_params_rejects(command, params):
    with pytest.raises(InvalidExperimentUsage) as excinfo:
        validate_params(command, params)
    assert excinfo.value.exit_code == 3


def test_validate_params_fills_defaults():
    params = validate_params("collapse", {"function": "c"})
    assert params["t"] == [0.2, 0.1, 0.05, 0.025]
    assert params["direction"] == "both"
    assert params["phase"] == 0.25


def test_run_experiment_writes_artifacts(tmp_path, patched_tasks):
    summary = run_experiment("moving-char", {"n": 7}, output_dir=str(tmp_path))
    stem = f"moving-char-{summary['config_hash'][:12]}"
    assert summary["paths"]["result"] == os.path.join(str(tmp_path), f"{stem}.json")
    assert sorted(os.listdir(tmp_path)) == sorted(
        f"{stem}.{suffix}" for suffix in ["json", "csv", "extra.txt", "blob.bin", "data.json"])

    document = json.loads(open(summary["paths"]["result"]).read())
    assert document["result"] == {"value": 7}
    assert document["config"]["params"]["h"] == [0.1, 0.05, 0.02]
    assert document["config_hash"] == config_hash("moving-char", document["config"]["params"], 0)
    assert "timestamp" in document["run_info"]
    assert open(summary["paths"]["blob.bin"], "rb").read() == b"\x00\x01"


def test_reruns_share_the_config_hash(tmp_path, patched_tasks):
    first = run_experiment("moving-char", {"n": 7}, output_dir=str(tmp_path))
    second = run_experiment("moving-char", {"n": 7}, output_dir=str(tmp_path))
    other = run_experiment("moving-char", {"n": 8}, output_dir=str(tmp_path))
    assert first["config_hash"] == second["config_hash"]
    assert first["config_hash"] != other["config_hash"]


def test_seed_override(tmp_path):
    with mock.patch.dict("app.tasks.experiment_tasks.TASKS",
                         {"slice": lambda params: TaskOutput(result={"seed": params["seed"]})}):
        summary = run_experiment("slice", {"seed": 1}, seed=5, output_dir=str(tmp_path))
    assert summary["result"] == {"seed": 5}


def write_config(tmp_path, config):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return str(path)


def test_load_config_rejects_unknown_fields(tmp_path):
    with pytest.raises(InvalidExperimentUsage):
        load_config(write_config(tmp_path, {"command": "moving-char", "colour": "red"}))
    with pytest.raises(InvalidExperimentUsage):
        load_config(write_config(tmp_path, {"command": "moving-char", "format_version": 2}))
    with pytest.raises(MissingInputError):
        load_config(str(tmp_path / "absent.json"))


def test_run_config_uses_its_output_dir(tmp_path, patched_tasks):
    output_dir = tmp_path / "out"
    path = write_config(tmp_path, {"command": "moving-char", "params": {"n": 3}, "output_dir": str(output_dir)})
    summary = run_config(path)
    assert summary["result"] == {"value": 3}
    assert os.path.dirname(summary["paths"]["result"]) == str(output_dir)


def seed_task(params):
    return TaskOutput(result={"seed": params["seed"]})


@pytest.mark.parametrize(
    "config, expected",
    [
        ({"params": {"seed": 3}}, 3),
        ({"seed": 4}, 4),
        ({"seed": 2, "params": {"seed": 2}}, 2),
        ({}, 0),
    ],
    ids=["params_seed", "top_level_seed", "agreeing_seeds", "no_seed"]
)
def test_run_config_seed(tmp_path, config, expected):
    path = write_config(tmp_path, {"command": "slice", "output_dir": str(tmp_path), **config})
    with mock.patch.dict("app.tasks.experiment_tasks.TASKS", {"slice": seed_task}):
        assert run_config(path)["result"] == {"seed": expected}


def test_run_config_rejects_conflicting_seeds(tmp_path):
    path = write_config(tmp_path, {"command": "slice", "params": {"seed": 1}, "seed": 7, "output_dir": str(tmp_path)})
    with mock.patch.dict("app.tasks.experiment_tasks.TASKS", {"slice": seed_task}):
        with pytest.raises(InvalidExperimentUsage) as excinfo:
            run_config(path)
    assert excinfo.value.payload == {"seed": 7, "params_seed": 1}


def test_cayley_ball_accepts_radius_zero():
    assert validate_params("cayley-ball", {"k": 0}) == {"k": 0, "generators": None}
    with pytest.raises(InvalidExperimentUsage):
        validate_params("cayley-ball", {"k": -1})
