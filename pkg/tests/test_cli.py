import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from main import cli

SCENARIOS = Path(__file__).parent.parent / "scenarios"

SMALL = """\
name = small
tasks = focal, maslov

[system]
kind = morse_sturm
n = 1
interval = 0, 1
R = -(1.5*pi)**2

[expected]
focal_count = 1
maslov = {maslov}
"""


@pytest.fixture
def runner():
    return CliRunner()


def write_small(tmp_path, maslov=1):
    path = tmp_path / "small.ini"
    path.write_text(SMALL.format(maslov=maslov), encoding="utf-8")
    return path


def test_validate_prints_tasks(runner, tmp_path):
    result = runner.invoke(cli, ["validate", str(write_small(tmp_path))])
    assert result.exit_code == 0
    assert "small" in result.output
    assert "maslov" in result.output


def test_validate_rejects_broken_file(runner, tmp_path):
    path = tmp_path / "broken.ini"
    path.write_text("name = small\ntasks = maslov\n", encoding="utf-8")
    result = runner.invoke(cli, ["validate", str(path)])
    assert result.exit_code == 1


def test_run_writes_reports(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["run", str(write_small(tmp_path)), "--out", str(out), "--trace", "detV"])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "small__maslov.json").read_text(encoding="utf-8"))
    assert report["status"] == "ok"
    assert report["summary"]["maslov"] == 1
    trace = (out / "small__detV.csv").read_text(encoding="utf-8").splitlines()
    assert trace[0] == "t,det_v"
    assert 2 < len(trace) <= 402


def test_mismatch_exit_code(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["run", str(write_small(tmp_path, maslov=2)), "--out", str(out)])
    assert result.exit_code == 2
    report = json.loads((out / "small__maslov.json").read_text(encoding="utf-8"))
    assert report["status"] == "mismatch"


def test_endpoint_focal_exit_code(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["run", str(SCENARIOS / "focal_endpoint.ini"), "--out", str(out)])
    assert result.exit_code == 1
    focal = json.loads((out / "focal_endpoint__focal.json").read_text(encoding="utf-8"))
    maslov = json.loads((out / "focal_endpoint__maslov.json").read_text(encoding="utf-8"))
    assert focal["summary"]["endpoint_multiplicity"] == 1
    assert maslov["status"] == "failed"
    assert maslov["error_kind"] == "EndpointFocalError"


def test_worst_exit_code_wins(runner, tmp_path):
    out = tmp_path / "out"
    missing = tmp_path / "absent.ini"
    result = runner.invoke(cli, ["run", str(write_small(tmp_path, maslov=2)), str(missing), "--out", str(out)])
    assert result.exit_code == 1


def test_trace_without_source_fails(runner, tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL.format(maslov=1).replace("tasks = focal, maslov", "tasks = focal"), encoding="utf-8")
    result = runner.invoke(cli, ["run", str(path), "--out", str(tmp_path / "out"), "--trace", "eigenflow"])
    assert result.exit_code == 1
