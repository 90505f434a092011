"""Service methods to validate experiment configs, run them and persist their results."""

# License: MIT

import datetime
import logging
import os

from marshmallow import ValidationError

from app.experiments.commands.schemas import COMMAND_SCHEMAS, FORMAT_VERSION, ExperimentConfigSchema
from app.tasks.experiment_tasks import TASKS
from app.utils.config import InvalidExperimentUsage, get_config
from app.utils.storage_utils import payload_hash, read_json, write_bytes, write_csv, write_json, write_text

logger = logging.getLogger(__name__)

LIBRARY_VERSION = "0.1.0"


def validate_params(command: str, params: dict) -> dict:
    """
    Loads command parameters through the command's schema, filling defaults.

    :raises InvalidExperimentUsage: On unknown commands, unknown fields or invalid values.
    """
    if command not in COMMAND_SCHEMAS:
        raise InvalidExperimentUsage(f"Unknown command: {command}", payload={"commands": sorted(COMMAND_SCHEMAS)})
    try:
        return COMMAND_SCHEMAS[command]().load(params)
    except ValidationError as e:
        raise InvalidExperimentUsage(f"Invalid parameters for {command}", payload={"errors": e.messages}) from e


def load_config(path: str) -> dict:
    """Reads and validates an experiment config file; parameters are validated against their command."""
    try:
        config = ExperimentConfigSchema().load(read_json(path))
    except ValidationError as e:
        raise InvalidExperimentUsage(f"Invalid experiment config: {path}", payload={"errors": e.messages}) from e
    return config


def config_hash(command: str, params: dict, seed: int) -> str:
    return payload_hash({"command": command, "params": params, "seed": seed, "format_version": FORMAT_VERSION})


def run_experiment(command: str, params: dict, seed: int | None = None, output_dir: str | None = None) -> dict:
    """
    Runs one experiment and writes <output_dir>/<command>-<hash>.json with its .csv plot data and
    any further artifacts next to it.

    The result document embeds the config, its hash, the hashes of input files and the library
    version. The timestamp lives under run_info only, so reruns differ in that field alone.

    :param command: Command name.
    :param params: Raw parameters; validated here.
    :param seed: Overrides the parameters' seed when the command takes one.
    :param output_dir: Defaults to HEISENCUT_OUTPUT_DIR.
    :return: Summary with the written paths and the result payload.
    """
    params = dict(params)
    if seed is not None and "seed" in getattr(COMMAND_SCHEMAS.get(command), "_declared_fields", {}):
        params["seed"] = seed
    params = validate_params(command, params)
    seed = params.get("seed", 0 if seed is None else seed)
    digest = config_hash(command, params, seed)
    output_dir = output_dir or get_config().OUTPUT_DIR
    stem = os.path.join(output_dir, f"{command}-{digest[:12]}")

    logger.info(f"Running {command} with config hash {digest[:12]}")
    output = TASKS[command](params)

    document = {
        "format_version": FORMAT_VERSION,
        "library_version": LIBRARY_VERSION,
        "command": command,
        "config": {"command": command, "params": params, "seed": seed, "format_version": FORMAT_VERSION},
        "config_hash": digest,
        "inputs": output.inputs,
        "result": output.result,
        "run_info": {"timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()},
    }
    paths = {"result": write_json(f"{stem}.json", document), "plot_data": write_csv(f"{stem}.csv", output.rows)}
    for suffix, content in output.artifacts.items():
        path = f"{stem}.{suffix}"
        if isinstance(content, bytes):
            paths[suffix] = write_bytes(path, content)
        elif isinstance(content, str):
            paths[suffix] = write_text(path, content)
        else:
            paths[suffix] = write_json(path, content)
    logger.info(f"Wrote {', '.join(paths.values())}")
    return {"command": command, "config_hash": digest, "paths": paths, "result": output.result}


def run_config(path: str, output_dir: str | None = None) -> dict:
    """
    Runs the experiment described by a config file.

    The top-level seed applies to the parameters when they carry none.

    :raises InvalidExperimentUsage: If the top-level seed and params["seed"] disagree.
    """
    config = load_config(path)
    seed = config["seed"]
    params_seed = config["params"].get("seed")
    if seed is not None and params_seed is not None and params_seed != seed:
        raise InvalidExperimentUsage(
            f"Config seed {seed} disagrees with params seed {params_seed}",
            payload={"seed": seed, "params_seed": params_seed},
        )
    return run_experiment(config["command"], config["params"], seed, output_dir or config.get("output_dir"))
