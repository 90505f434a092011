"""Utility methods for reading experiment inputs and writing result artifacts."""

# License: MIT

import csv
import hashlib
import json
import logging
import os

from app.bv.grid import GridSet
from app.metrics.cayley import FiniteMetricSpace
from app.metrics.cuts import CutMeasure, L1Map
from app.utils.config import MissingInputError

logger = logging.getLogger(__name__)


def _builtin(value):
    # numpy scalars and arrays
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def canonical_json(payload) -> str:
    """Sorted keys and fixed separators; equal payloads give equal text."""
    return json.dumps(payload, sort_keys=True, indent=2, default=_builtin) + "\n"


def payload_hash(payload) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=_builtin)
    return hashlib.sha256(text.encode()).hexdigest()


def file_hash(path: str) -> str:
    """SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(_existing(path), "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _existing(path: str) -> str:
    if not path or not os.path.isfile(path):
        raise MissingInputError(f"Input file not found: {path}", payload={"path": path})
    return path


def read_json(path: str) -> dict:
    with open(_existing(path)) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise MissingInputError(f"Input file is not valid JSON: {path}: {e}", payload={"path": path}) from e


def load_metric_space(path: str) -> FiniteMetricSpace:
    space = FiniteMetricSpace.from_dict(read_json(path))
    logger.info(f"Loaded metric space {space.name} with {space.n} points from {path}")
    return space


def load_cut_measure(path: str) -> CutMeasure:
    return CutMeasure.from_dict(read_json(path))


def load_l1_map(path: str) -> L1Map:
    return L1Map.from_dict(read_json(path))


def load_grid_set(path: str) -> GridSet:
    with open(_existing(path), "rb") as f:
        return GridSet.from_bytes(f.read())


def write_text(path: str, text: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)
    return path


def write_json(path: str, payload) -> str:
    return write_text(path, canonical_json(payload))


def write_bytes(path: str, data: bytes) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as f:
        f.write(data)
    return path


def write_csv(path: str, rows: list[dict]) -> str:
    """One row per dict; the header is the union of keys in first-seen order."""
    fieldnames = []
    for row in rows:
        fieldnames.extend(key for key in row if key not in fieldnames)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: json.dumps(value) if isinstance(value, (list, dict)) else value
                             for key, value in row.items()})
    return path
