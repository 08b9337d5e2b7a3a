from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from nasverify.core.report import parse_report
from nasverify.main import cli, cli_main
from nasverify.uppaal import parse_xta


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def test_check_satisfied(runner, models_dir):
    result = runner.invoke(cli, ["check", str(models_dir / "two_stage.yaml")])
    assert result.exit_code == 0
    assert "SATISFIED (bound 8 ticks)" in result.output


def test_check_violated_with_trace(runner, models_dir, tmp_path):
    trace = tmp_path / "trace.json"
    result = runner.invoke(cli, ["check", str(models_dir / "two_stage.yaml"), "--bound", "7", "--trace", str(trace)])
    assert result.exit_code == 1
    assert "VIOLATED" in result.output
    steps = json.loads(trace.read_text(encoding="utf-8"))
    assert steps[0]["description"] == "initial"
    assert steps[-1]["mode"] == "armed"


@pytest.mark.parametrize("order", ["bfs", "dfs", "random"])
def test_machine_format_parses_back(runner, models_dir, order):
    args = ["check", str(models_dir / "two_stage.yaml"), "--format", "machine", "--quiet", "--order", order, "--seed", "1"]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0
    report = parse_report(result.stdout)
    assert report.verdict == "satisfied"
    assert report.bound_ticks == 8
    assert report.static_estimate_ticks == (3, 8)
    assert report.states_explored > 0


def test_state_cap_exits_with_two(runner, models_dir):
    result = runner.invoke(cli, ["check", str(models_dir / "two_stage.yaml"), "--max-states", "1", "--quiet"])
    assert result.exit_code == 2
    assert "EXHAUSTED" in result.output


def test_wcrt(runner, models_dir):
    result = runner.invoke(cli, ["wcrt", str(models_dir / "two_stage.yaml"), "--quiet"])
    assert result.exit_code == 0
    assert "(worst case 8 ticks)" in result.output


def test_simulate_writes_csv(runner, models_dir, tmp_path):
    csv = tmp_path / "boiler.csv"
    args = ["simulate", str(models_dir / "steam_boiler.yaml"), "--horizon", "5", "--dt", "0.01", "--output", str(csv)]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0
    assert "SIMULATED (bound 5000 ticks)" in result.output
    assert len(csv.read_text(encoding="utf-8").splitlines()) == 502


def test_simulate_samples_the_chain_latency(runner, models_dir):
    args = ["simulate", str(models_dir / "steam_boiler.yaml"), "--horizon", "1", "--dt", "0.1", "--samples", "20"]
    result = runner.invoke(cli, [*args, "--format", "machine", "--quiet", "--seed", "5"])
    assert result.exit_code == 0
    report = parse_report(result.stdout)
    assert any(m.startswith("chain latency over 20 samples") for m in report.messages)
    again = runner.invoke(cli, [*args, "--format", "machine", "--quiet", "--seed", "5"])
    assert parse_report(again.stdout).messages == report.messages


def test_simulate_rejects_zero_samples(runner, models_dir):
    args = ["simulate", str(models_dir / "steam_boiler.yaml"), "--horizon", "1", "--dt", "0.1", "--samples", "0"]
    result = runner.invoke(cli, args)
    assert result.exit_code == 2
    assert "--samples" in result.output


def test_simulate_without_boiler_fails(runner, models_dir):
    result = runner.invoke(cli, ["simulate", str(models_dir / "two_stage.yaml"), "--horizon", "1", "--dt", "0.1"])
    assert result.exit_code == 2
    assert "no boiler section" in result.output


def test_export(runner, models_dir, tmp_path):
    out = tmp_path / "two_stage.xta"
    result = runner.invoke(cli, ["export", str(models_dir / "two_stage.yaml"), "-o", str(out)])
    assert result.exit_code == 0
    model = parse_xta(out.read_text(encoding="utf-8"))
    assert [p.name for p in model.processes] == ["Controller", "Drive", "Sink"]
    query = (tmp_path / "two_stage.q").read_text(encoding="utf-8")
    assert "within 8 ticks" in query
    assert "A[] not (armed && z > 8)" in query


def test_validate(runner, models_dir):
    assert runner.invoke(cli, ["validate", str(models_dir / "two_stage.yaml")]).exit_code == 0
    result = runner.invoke(cli, ["validate", str(models_dir / "bad_channels.yaml")])
    assert result.exit_code == 2
    assert "INVALID" in result.output
    assert "middle" in result.output


def test_cli_main_returns_exit_codes(models_dir, tmp_path):
    assert cli_main(["check", str(models_dir / "two_stage.yaml"), "--quiet"]) == 0
    assert cli_main(["check", str(models_dir / "two_stage.yaml"), "--bound", "7", "--quiet"]) == 1
    assert cli_main(["check", str(tmp_path / "missing.yaml")]) == 2
    broken = tmp_path / "broken.yaml"
    broken.write_text("schema_version: 1\nresolution: 1\ncomponents: []\n", encoding="utf-8")
    assert cli_main(["check", str(broken)]) == 2


def test_negative_bound_is_a_usage_error(runner, models_dir, tmp_path):
    model = str(models_dir / "two_stage.yaml")
    assert cli_main(["check", model, "--bound", "-1", "--quiet"]) == 2
    assert cli_main(["export", model, "-o", str(tmp_path / "m.xta"), "--bound", "-1"]) == 2
    result = runner.invoke(cli, ["check", model, "--bound", "-1"])
    assert result.exit_code == 2
    assert "--bound" in result.output


def test_bound_must_fit_the_resolution(models_dir):
    assert cli_main(["check", str(models_dir / "steam_boiler.yaml"), "--bound", "0.05", "--quiet"]) == 2
