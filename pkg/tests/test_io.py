import csv
import dataclasses
import hashlib
import json
import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liouvlab import io as lio
from liouvlab.errors import ConfigError


# --- float formatting -----------------------------------------------------------


def test_fmt_float_short_decimals_are_exact():
    assert lio.fmt_float(0.525) == "0.525"
    assert lio.fmt_float(-3.35) == "-3.35"
    assert lio.fmt_float(0.0) == "0"
    assert lio.fmt_float(np.float64(2.0)) == "2"


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_fmt_float_round_trips_to_twelve_digits(x):
    back = float(lio.fmt_float(x))
    assert abs(back - x) <= 1e-11 * max(1.0, abs(x))


# --- CSV ---------------------------------------------------------------------------


def test_write_csv_layout(tmp_path):
    path = tmp_path / "sub" / "table.csv"
    out = lio.write_csv(path, ["J", "label", "count", "flag"],
                        [[0.525, "ep", 3, True], [1.0 / 3.0, "x", -1, False]])
    assert out == path
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 3  # header and two rows, CRLF-terminated
    lines = raw.decode().split("\r\n")
    assert lines[0] == "J,label,count,flag"
    assert lines[1] == "0.525,ep,3,1"
    assert lines[2] == "0.333333333333,x,-1,0"


def test_write_csv_reads_back_with_stdlib(tmp_path):
    path = tmp_path / "t.csv"
    lio.write_csv(path, ["a", "b"], [[1.5, 2.5], [3.0, 4.0]])
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows == [["a", "b"], ["1.5", "2.5"], ["3", "4"]]


# --- JSON ---------------------------------------------------------------------------


def test_json_serialization_of_numeric_types(tmp_path):
    path = tmp_path / "doc.json"
    lio.write_json(path, {
        "z": 1.0 + 2.0j,
        "arr": np.array([1.0, 2.0]),
        "grid": np.arange(4).reshape(2, 2),
        "n": np.int64(7),
        "x": np.float64(0.5),
        "ok": np.bool_(True),
        "none": None,
        "path": path,
    })
    doc = json.loads(path.read_text())
    assert doc["z"] == {"re": 1.0, "im": 2.0}
    assert doc["arr"] == [1.0, 2.0]
    assert doc["grid"] == [[0, 1], [2, 3]]
    assert doc["n"] == 7 and doc["x"] == 0.5 and doc["ok"] is True
    assert doc["none"] is None
    assert doc["path"].endswith("doc.json")
    assert path.read_text().endswith("\n")


def test_json_rejects_unknown_types(tmp_path):
    with pytest.raises(TypeError):
        lio.write_json(tmp_path / "bad.json", {"obj": object()})


def test_json_output_is_deterministic(tmp_path):
    doc = {"b": 1, "a": [2, {"d": 3, "c": 4}]}
    p1 = lio.write_json(tmp_path / "one.json", doc)
    p2 = lio.write_json(tmp_path / "two.json", doc)
    assert p1.read_bytes() == p2.read_bytes()


# --- hashing and manifests -----------------------------------------------------------


def test_sha256_file_matches_hashlib_across_chunks(tmp_path):
    data = bytes(range(256)) * 600  # > one 64 KiB chunk
    path = tmp_path / "blob.bin"
    path.write_bytes(data)
    assert lio.sha256_file(path) == hashlib.sha256(data).hexdigest()


def test_manifest_build_and_validate(tmp_path):
    f1 = tmp_path / "a.csv"
    f2 = tmp_path / "b.json"
    f1.write_text("J\r\n1\r\n")
    f2.write_text("{}\n")
    started = time.monotonic()
    manifest = lio.build_manifest("spectrum", "1", {"system": {"gamma_e": 4.4}},
                                  [f1, f2], started)
    doc = dataclasses.asdict(manifest)
    lio.validate_manifest(doc)  # must not raise
    assert doc["experiment"] == "spectrum"
    assert [e["name"] for e in doc["files"]] == ["a.csv", "b.json"]
    assert all(len(e["sha256"]) == 64 for e in doc["files"])
    assert doc["files"][0]["bytes"] == len("J\r\n1\r\n")

    again = lio.build_manifest("spectrum", "1", {}, [f1, f2], started)
    assert [e["sha256"] for e in again.files] == [e["sha256"] for e in manifest.files]


def test_manifest_validation_rejects_malformed_documents(tmp_path):
    f1 = tmp_path / "a.csv"
    f1.write_text("x\r\n")
    good = dataclasses.asdict(
        lio.build_manifest("spectrum", "1", {}, [f1], time.monotonic()))

    with pytest.raises(ConfigError):
        lio.validate_manifest([])
    for key in ("experiment", "config", "files", "duration_s"):
        broken = dict(good)
        del broken[key]
        with pytest.raises(ConfigError):
            lio.validate_manifest(broken)
    broken = dict(good, files="nope")
    with pytest.raises(ConfigError):
        lio.validate_manifest(broken)
    broken = dict(good, files=[{"name": "a.csv", "sha256": "00"}])
    with pytest.raises(ConfigError):
        lio.validate_manifest(broken)
    broken = dict(good, files=[dict(good["files"][0], bytes="12")])
    with pytest.raises(ConfigError):
        lio.validate_manifest(broken)
