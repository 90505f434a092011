"""Configuration and error types shared by the library and the command line."""

# License: MIT

import os

from dotenv import load_dotenv


load_dotenv()


def get_env(name: str, default=None, required=False):
    value = os.environ.get(name, default)
    if required and value is None:
        raise RuntimeError(f"Missing required environment variable: {name}")
    return value


def _parse_resolution(value: str) -> tuple[int, int, int]:
    parts = tuple(int(p) for p in str(value).split(","))
    if len(parts) != 3:
        raise RuntimeError(f"HEISENCUT_GRID_RESOLUTION needs three integers, got: {value}")
    return parts


class Config:
    """Base configuration class."""

    OUTPUT_DIR = get_env("HEISENCUT_OUTPUT_DIR", "results")

    # Size caps:
    MAX_CAYLEY_RADIUS = int(get_env("HEISENCUT_MAX_CAYLEY_RADIUS", 6))
    MAX_ENUM_POINTS = int(get_env("HEISENCUT_MAX_ENUM_POINTS", 16))
    EXHAUSTIVE_SEPARATION_POINTS = int(get_env("HEISENCUT_EXHAUSTIVE_SEPARATION_POINTS", 18))
    DENSE_LP_ROWS = int(get_env("HEISENCUT_DENSE_LP_ROWS", 600))
    # Seconds per column generation run; 0 disables the clock.
    COLGEN_TIME_LIMIT = float(get_env("HEISENCUT_COLGEN_TIME_LIMIT", 120))

    # Numerics:
    GRID_RESOLUTION = _parse_resolution(get_env("HEISENCUT_GRID_RESOLUTION", "96,96,192"))
    CC_TOL = float(get_env("HEISENCUT_CC_TOL", 1e-10))
    WORKERS = int(get_env("HEISENCUT_WORKERS", 4))

    LOG_LEVEL = get_env("HEISENCUT_LOG_LEVEL", "INFO")


class DevelopmentConfig(Config):
    """Development configuration class."""
    DEBUG = True


class ProductionConfig(Config):
    """Production configuration class."""
    DEBUG = False


def get_config() -> type[Config]:
    """
    Selects the configuration class from the environment.

    :return: ProductionConfig when HEISENCUT_ENV is "production", DevelopmentConfig otherwise.
    """
    if os.environ.get("HEISENCUT_ENV", "development") == "production":
        return ProductionConfig
    return DevelopmentConfig


class InvalidExperimentUsage(Exception):
    """A parameter or schema violation. Base of every error the command line reports."""

    exit_code = 3
    kind = "invalid_usage"

    def __init__(self, message, exit_code=None, payload=None):
        super().__init__(message)
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        self.payload = payload

    def to_dict(self):
        rv = dict(self.payload or ())
        rv["error"] = self.kind
        rv["message"] = self.message
        rv["exit_code"] = self.exit_code
        return rv


class MissingInputError(InvalidExperimentUsage):
    exit_code = 4
    kind = "missing_input"


class OverCapError(InvalidExperimentUsage):
    exit_code = 5
    kind = "over_cap"


class NumericalError(InvalidExperimentUsage):
    exit_code = 6
    kind = "numerical"


class OutsideGridError(InvalidExperimentUsage):
    """A ball or a point lookup left the grid box; payload carries the clipped fraction."""

    exit_code = 7
    kind = "outside_grid"
