import json

import numpy as np
import pytest

from app.metrics.cayley import named_graph
from app.utils.config import MissingInputError
from app.utils.storage_utils import (
    canonical_json,
    file_hash,
    load_metric_space,
    payload_hash,
    read_json,
    write_csv,
    write_json,
)


def test_canonical_json_ignores_key_order():
    assert canonical_json({"b": 1, "a": [1, 2]}) == canonical_json({"a": [1, 2], "b": 1})
    assert payload_hash({"b": 1, "a": 2}) == payload_hash({"a": 2, "b": 1})
    assert payload_hash({"a": 1}) != payload_hash({"a": 2})


def test_canonical_json_converts_numpy():
    assert json.loads(canonical_json({"x": np.arange(3), "y": np.float64(0.5)})) == {"x": [0, 1, 2], "y": 0.5}
    with pytest.raises(TypeError):
        canonical_json({"x": object()})


@pytest.mark.parametrize(
    "content",
    [None, "{not json"],
    ids=["missing", "invalid"]
)
def test_read_json_errors(tmp_path, content):
    path = tmp_path / "input.json"
    if content is not None:
        path.write_text(content)
    with pytest.raises(MissingInputError) as excinfo:
        read_json(str(path))
    assert excinfo.value.exit_code == 4
    assert excinfo.value.to_dict()["path"] == str(path)


def test_metric_space_file(tmp_path):
    space = named_graph("cycle5")
    path = write_json(str(tmp_path / "nested" / "space.json"), space.to_dict())
    loaded = load_metric_space(path)
    np.testing.assert_array_equal(loaded.dist, space.dist)
    assert file_hash(path) == file_hash(path)
    with pytest.raises(MissingInputError):
        file_hash(str(tmp_path / "absent.json"))


def test_write_csv_header_union(tmp_path):
    path = write_csv(str(tmp_path / "rows.csv"), [{"k": 1, "size": 5}, {"k": 2, "extra": [1, 2]}])
    lines = open(path).read().splitlines()
    assert lines[0] == "k,size,extra"
    assert lines[1] == "1,5,"
    assert lines[2] == '2,,"[1, 2]"'
