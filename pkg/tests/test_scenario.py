from pathlib import Path

import numpy as np
import pytest

from app.schemas.report import TaskReport, TaskStatus, normalized
from app.schemas.scenario import CheckKind, ScenarioError, TaskKind, load_scenario, parse_scenario
from app.services.scenario_runner import apply_overrides, compare_expected, run_scenario_file

SCENARIOS = sorted((Path(__file__).parent.parent / "scenarios").glob("*.ini"))


def system_scenario(**overrides):
    data = {
        "name": "sample",
        "tasks": ["maslov"],
        "system": {"kind": "morse_sturm", "n": "1", "interval": ["0", "1"], "R": "-(3.5*pi)**2"},
    }
    data.update(overrides)
    return data


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_shipped_scenarios_parse(path):
    scenario = load_scenario(path)
    assert scenario.name == path.stem
    assert scenario.tasks


def test_system_scenario_defaults():
    scenario = parse_scenario(system_scenario())
    assert scenario.tasks == [TaskKind.maslov]
    assert scenario.system.interval == (0.0, 1.0)
    assert scenario.options.checks == [CheckKind.theorem]
    assert scenario.options.focal_options().steps == scenario.options.steps


def test_matrix_lists_are_joined_back():
    data = system_scenario()
    data["system"] = dict(data["system"], n="2", g=["1", "0; 0", "-1"])
    assert parse_scenario(data).system.g == "1, 0; 0, -1"


def test_interval_must_be_increasing():
    data = system_scenario()
    data["system"] = dict(data["system"], interval=["1", "0"])
    with pytest.raises(ScenarioError) as err:
        parse_scenario(data)
    assert err.value.field == "system.interval"


def test_exactly_one_block():
    data = system_scenario(manifold={"kind": "flat", "p": ["0", "0"], "q": ["1", "1"]})
    with pytest.raises(ScenarioError, match="exactly one"):
        parse_scenario(data)


def test_manifold_tasks_are_checked():
    data = {"name": "m", "tasks": "integrate", "manifold": {"kind": "flat", "p": ["0", "0"], "q": ["1", "1"]}}
    with pytest.raises(ScenarioError, match="not available"):
        parse_scenario(data)


def test_endpoint_dimensions_must_agree():
    data = {"name": "m", "tasks": "geodesic-count", "manifold": {"kind": "flat", "p": ["0", "0"], "q": ["1"]}}
    with pytest.raises(ScenarioError):
        parse_scenario(data)


def test_unknown_task():
    with pytest.raises(ScenarioError) as err:
        parse_scenario(system_scenario(tasks="solve"))
    assert err.value.field.startswith("tasks")


def test_grid_and_expressions():
    data = {
        "name": "m",
        "tasks": "geodesic-count",
        "manifold": {
            "kind": "stationary_sphere",
            "p": ["pi/2", "0", "0"],
            "q": ["pi/2", "pi/2", "1"],
            "velocity_bound": "4*pi",
            "grid": {"phi": ["-4*pi", "4*pi", "17"]},
        },
    }
    manifold = parse_scenario(data).manifold
    assert len(manifold.grid["phi"]) == 17
    assert manifold.grid["phi"][0] == pytest.approx(-4 * np.pi)
    assert manifold.velocity_bound == pytest.approx(4 * np.pi)
    assert manifold.poincare == {0: 1}


def test_expected_literals():
    expected = {"maslov": "3", "stable": "true", "indices": ["0", "1"], "counts": {"0": "1"}, "sigma": "0.5"}
    scenario = parse_scenario(system_scenario(expected=expected))
    assert scenario.expected == {"maslov": 3, "stable": True, "indices": [0, 1], "counts": {"0": 1}, "sigma": 0.5}


def test_syntax_error_reports_line(tmp_path):
    path = tmp_path / "broken.ini"
    path.write_text("name = a\nname = b\n", encoding="utf-8")
    with pytest.raises(ScenarioError) as err:
        load_scenario(path)
    assert err.value.line == 2


def test_missing_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "absent.ini")


def test_compare_expected_normalizes_values():
    assert compare_expected({"maslov": np.int64(3), "holds": np.bool_(True)}, {"maslov": 3, "holds": True}) == []
    assert compare_expected({"maslov": 2}, {"maslov": 3}) == ["maslov: expected 3, got 2"]
    assert compare_expected({"maslov": 2}, {"other": 3}) == []


def test_overrides_expand_mesh_and_tolerance():
    options = parse_scenario(system_scenario()).options
    updated = apply_overrides(options, mesh=50, tol=1e-6, traces=["detV"])
    assert updated.meshes == [50, 100, 200]
    assert updated.mesh == 50
    assert updated.inertia_tol == updated.rank_tol == 1e-6
    assert [t.value if hasattr(t, "value") else t for t in updated.traces] == ["detV"]


def test_report_json_is_deterministic():
    report = TaskReport(scenario="s", task="maslov", status=TaskStatus.ok,
                        summary={"b": 1, "a": -0.0}, result={"x": float("nan"), "y": 1 / 3})
    text = report.to_json()
    assert text.index('"a"') < text.index('"b"')
    assert normalized(1 / 3) == round(1 / 3, 12)
    assert normalized(-0.0) == 0.0
    assert normalized(float("inf")) == "inf"


EXPECTED_FAILURES = {"focal_endpoint": {"maslov": "EndpointFocalError"}}


@pytest.mark.slow
@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_shipped_scenarios_run_reproducibly(path, tmp_path):
    first = run_scenario_file(str(path), str(tmp_path / "first"))
    second = run_scenario_file(str(path), str(tmp_path / "second"))
    assert first.error is None and second.error is None
    failures = EXPECTED_FAILURES.get(path.stem, {})

    for report in first.reports:
        if report.task in failures:
            assert report.status == TaskStatus.failed
            assert report.error_kind == failures[report.task]
        else:
            assert report.status == TaskStatus.ok, f"{report.task}: {report.error or report.mismatches}"

    written = sorted(p.name for p in (tmp_path / "first").glob("*.json"))
    assert written == sorted(p.name for p in (tmp_path / "second").glob("*.json"))
    assert len(written) == len(first.reports)
    for name in written:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()
