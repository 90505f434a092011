import os
from unittest import mock

import pytest

from app.utils.config import (
    Config,
    DevelopmentConfig,
    InvalidExperimentUsage,
    MissingInputError,
    NumericalError,
    OutsideGridError,
    OverCapError,
    ProductionConfig,
    get_config,
    get_env,
)


@pytest.mark.parametrize(
    "env, expected",
    [
        ({"HEISENCUT_ENV": "production"}, ProductionConfig),
        ({"HEISENCUT_ENV": "development"}, DevelopmentConfig),
        ({}, DevelopmentConfig),
    ],
    ids=["production", "development", "unset"]
)
def test_get_config(env, expected):
    with mock.patch.dict(os.environ, env, clear=True):
        assert get_config() is expected


def test_get_env_required():
    with mock.patch.dict(os.environ, {}, clear=True):
        assert get_env("HEISENCUT_MISSING", "fallback") == "fallback"
        with pytest.raises(RuntimeError):
            get_env("HEISENCUT_MISSING", required=True)


@pytest.mark.parametrize(
    "error_class, exit_code, kind",
    [
        (InvalidExperimentUsage, 3, "invalid_usage"),
        (MissingInputError, 4, "missing_input"),
        (OverCapError, 5, "over_cap"),
        (NumericalError, 6, "numerical"),
        (OutsideGridError, 7, "outside_grid"),
    ],
    ids=["invalid_usage", "missing_input", "over_cap", "numerical", "outside_grid"]
)
def test_error_payloads(error_class, exit_code, kind):
    error = error_class("went wrong", payload={"detail": 1})
    assert isinstance(error, InvalidExperimentUsage)
    assert error.to_dict() == {"detail": 1, "error": kind, "message": "went wrong", "exit_code": exit_code}


def test_error_exit_code_override():
    assert InvalidExperimentUsage("x", exit_code=9).to_dict()["exit_code"] == 9


@pytest.mark.parametrize("config_class", [DevelopmentConfig, ProductionConfig], ids=["development", "production"])
def test_log_level_is_shared(config_class):
    assert "LOG_LEVEL" not in vars(config_class)
    assert config_class.LOG_LEVEL == Config.LOG_LEVEL
