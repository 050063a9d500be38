import json

import numpy as np
import pytest

from mide_lab.artifacts import MANIFEST, ArtifactWriter, exit_status, failed_rows
from mide_lab.grid import Geometry, GridFunction
from mide_lab.tables import read_table

CHECKS = {"check": str, "value": float, "status": str}


@pytest.fixture
def writer(tmp_path):
    return ArtifactWriter(tmp_path)


def test_table_roundtrip(writer):
    rows = [{"check": "a", "value": np.float64(1.5), "status": "PASS"}, {"check": "b", "value": 2.0, "status": "PASS"}]
    path = writer.table("demo_checks", CHECKS, rows)
    assert path.read_text().splitlines()[0] == "check,value,status"
    assert read_table(path) == [
        {"check": "a", "value": 1.5, "status": "PASS"},
        {"check": "b", "value": 2.0, "status": "PASS"},
    ]


def test_read_missing_table(tmp_path):
    with pytest.raises(ValueError):
        read_table(tmp_path / "absent.csv")


def test_status_query(writer, tmp_path):
    writer.table("first", CHECKS, [{"check": "a", "value": 1.0, "status": "PASS"}])
    writer.table("second", CHECKS, [{"check": "b", "value": 1.0, "status": "FAIL"}, {"check": "c", "value": 0.0, "status": "INFO"}])
    writer.table("history", {"step": int, "residual": float}, [{"step": 0, "residual": 1.0}])
    assert failed_rows(tmp_path) == {"first": 0, "second": 1}
    assert exit_status(tmp_path) == 1


def test_all_passing_exits_zero(writer, tmp_path):
    writer.table("checks", CHECKS, [{"check": "a", "value": 1.0, "status": "PASS"}])
    assert exit_status(tmp_path) == 0


@pytest.mark.parametrize("verdict", ["SKIP", "FAIL", ""])
def test_any_other_status_fails_the_run(writer, tmp_path, verdict):
    writer.table("checks", CHECKS, [
        {"check": "a", "value": 1.0, "status": "PASS"},
        {"check": "b", "value": 1.0, "status": "UNCHARACTERIZED"},
        {"check": "c", "value": 1.0, "status": verdict},
    ])
    assert failed_rows(tmp_path) == {"checks": 1}
    assert exit_status(tmp_path) == 1


def test_manifest_lists_artifacts(writer, tmp_path):
    writer.table("solve_checks", CHECKS, [{"check": "a", "value": 1.0, "status": "PASS"}])
    writer.field("solution", GridFunction.constant(Geometry(1, 0, 8), 1.0))
    path = writer.manifest("toy-model", "solve", 7, "abc123")
    assert path.name == MANIFEST

    descriptor = json.loads(path.read_text())
    assert descriptor["name"] == "toy-model"
    assert [r["name"] for r in descriptor["resources"]] == ["solve-checks"]
    assert set(descriptor["sha256"]) == {"solve_checks.csv", "solution.grid"}
    assert descriptor["run"]["seed"] == 7
    assert descriptor["run"]["config_sha256"] == "abc123"
    assert "numpy" in descriptor["run"]["versions"]
