import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from mide_lab.cli import CONFIG_ERROR_EXIT, main

LEMMAS_CONFIG = Path(__file__).parents[1] / "configs" / "lemmas.yaml"
TINY_LEMMAS = {
    "kind": "lemmas",
    "name": "tiny-lemmas",
    "seed": 3,
    "block_triples": 5,
    "convolutions": 5,
    "closed_forms": 3,
    "trace_pairs": 11,
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY_LEMMAS))
    return path


def test_list_experiments(runner):
    result = runner.invoke(main, ["list-experiments"])
    assert result.exit_code == 0
    kinds = [line.split()[0] for line in result.output.splitlines()]
    assert kinds == sorted(["conditions", "estimates", "isaacs", "lemmas", "parabolic", "regularity", "solve"])


def test_validate_shipped_config(runner):
    result = runner.invoke(main, ["validate", str(LEMMAS_CONFIG)])
    assert result.exit_code == 0
    assert "lemmas experiment 'lemmas' is valid" in result.output


def test_unknown_key_exits_before_writing(runner, tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(TINY_LEMMAS | {"trials": 4}))
    out_dir = tmp_path / "runs"
    result = runner.invoke(main, ["run", str(path), "--out-dir", str(out_dir)])
    assert result.exit_code == CONFIG_ERROR_EXIT
    assert not out_dir.exists()


def test_missing_config(runner, tmp_path):
    result = runner.invoke(main, ["validate", str(tmp_path / "absent.yaml")])
    assert result.exit_code == CONFIG_ERROR_EXIT


def test_run_writes_manifest(runner, tiny_config, tmp_path):
    result = runner.invoke(main, ["run", str(tiny_config), "--out-dir", str(tmp_path / "runs")])
    assert result.exit_code == 0
    target = tmp_path / "runs" / "tiny-lemmas"
    manifest = json.loads((target / "datapackage.json").read_text())
    assert manifest["run"]["kind"] == "lemmas"
    assert manifest["run"]["seed"] == 3
    assert len(manifest["resources"]) == 4


def test_seed_override(runner, tiny_config, tmp_path):
    result = runner.invoke(main, ["run", str(tiny_config), "--out-dir", str(tmp_path), "--seed", "99", "--jobs", "2"])
    assert result.exit_code == 0
    manifest = json.loads((tmp_path / "tiny-lemmas" / "datapackage.json").read_text())
    assert manifest["run"]["seed"] == 99


def test_failing_rows_exit_one(runner, tiny_config, tmp_path, mocker):
    mocker.patch("mide_lab.cli.exit_status", return_value=1)
    result = runner.invoke(main, ["run", str(tiny_config), "--out-dir", str(tmp_path)])
    assert result.exit_code == 1


def test_out_dir_from_environment(runner, tiny_config, tmp_path):
    result = runner.invoke(main, ["run", str(tiny_config)], env={"MIDE_LAB_OUT_DIR": str(tmp_path / "env")})
    assert result.exit_code == 0
    assert (tmp_path / "env" / "tiny-lemmas" / "datapackage.json").exists()
