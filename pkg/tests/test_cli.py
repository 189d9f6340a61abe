"""Tests for CLI commands."""

import json
from unittest.mock import patch

import pytest
from click.testing import CliRunner

from ellipsoidpack.__version__ import __version__
from ellipsoidpack.cli import cli
from ellipsoidpack.errors import DomainError, ResourceError
from ellipsoidpack.evolve import default_horizon
from ellipsoidpack.models import CheckResult, Status, VerificationSummary
from ellipsoidpack.reporters.trajectory_reporter import TrajectoryReporter

FAST_DT = repr(default_horizon(2) / 200.0)


@pytest.fixture
def runner():
    """Create a CLI runner."""
    return CliRunner()


def json_line(output: str) -> dict:
    lines = [line for line in output.splitlines() if line.startswith("{")]
    assert lines, output
    return json.loads(lines[-1])


def run_args(out, *extra):
    return ["run", "--n", "2", "--lattice", "Zn", "--seed", "7", "--dt-max", FAST_DT,
            "--out", str(out), *extra]


def test_cli_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_cli_help(runner):
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for command in ("run", "ensemble", "verify", "siegel", "shell-integral"):
        assert command in result.output


def test_run_help_lists_flags(runner):
    result = runner.invoke(cli, ["run", "--help"])
    assert result.exit_code == 0
    for flag in ("--n", "--lattice", "--seed", "--dt-max", "--eps-contact", "--a0", "--config"):
        assert flag in result.output


def test_run_writes_outputs(runner, tmp_path):
    result = runner.invoke(cli, run_args(tmp_path))
    assert result.exit_code == 0, result.output

    for name in ("trajectory.jsonl", "density.json", "packing_lattice.basis", "manifest.json"):
        assert (tmp_path / name).exists()

    records, final = TrajectoryReporter.load(tmp_path / "trajectory.jsonl")
    assert records[-1]["event"] == "frozen"
    assert final["stream_id"] == "7"
    assert len(final["contacts"]) == 3

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["stream_id"] == "7"
    assert manifest["termination"] == "frozen"
    assert manifest["config"]["n"] == 2
    assert manifest["version"] == __version__

    density = json.loads((tmp_path / "density.json").read_text())
    assert density["final_volume_ratio"] > 0.0
    assert 0.0 < density["packing_density"] <= 1.0


def test_run_is_reproducible(runner, tmp_path):
    first = runner.invoke(cli, run_args(tmp_path / "a"))
    second = runner.invoke(cli, run_args(tmp_path / "b"))
    assert first.exit_code == 0 and second.exit_code == 0
    a = (tmp_path / "a" / "trajectory.jsonl").read_bytes()
    b = (tmp_path / "b" / "trajectory.jsonl").read_bytes()
    assert a == b


def test_config_file_matches_flags(runner, tmp_path):
    config = tmp_path / "run.conf"
    config.write_text(f"n = 2\nlattice = Zn\nseed = 7\ndt-max = {FAST_DT}\n")
    from_file = runner.invoke(cli, ["run", "--config", str(config), "--out", str(tmp_path / "f")])
    from_flags = runner.invoke(cli, run_args(tmp_path / "g"))
    assert from_file.exit_code == 0, from_file.output
    assert from_flags.exit_code == 0
    assert (tmp_path / "f" / "trajectory.jsonl").read_bytes() == (
        tmp_path / "g" / "trajectory.jsonl"
    ).read_bytes()


def test_flags_override_config_file(runner, tmp_path):
    config = tmp_path / "run.yml"
    config.write_text("n: 3\nseed: 1\n")
    result = runner.invoke(cli, run_args(tmp_path / "o", "--config", str(config)))
    assert result.exit_code == 0, result.output
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["n"] == 2
    assert manifest["seed"] == 7


def test_run_non_free_start_exits_2(runner, tmp_path):
    result = runner.invoke(cli, run_args(tmp_path, "--a0", "0.25"))
    assert result.exit_code == 2
    assert "inside" in result.output


def test_run_invalid_lattice_exits_2(runner, tmp_path):
    result = runner.invoke(cli, ["run", "--lattice", "A2", "--out", str(tmp_path)])
    assert result.exit_code == 2
    assert "Invalid lattice" in result.output


def test_run_unknown_config_key_exits_2(runner, tmp_path):
    config = tmp_path / "bad.conf"
    config.write_text("dimension = 3\n")
    result = runner.invoke(cli, ["run", "--config", str(config)])
    assert result.exit_code == 2
    assert "Unknown configuration key" in result.output


def test_run_resource_error_exits_3(runner, tmp_path):
    with patch(
        "ellipsoidpack.cli.run_trajectory", side_effect=ResourceError("contact cap exceeded")
    ):
        result = runner.invoke(cli, run_args(tmp_path))
    assert result.exit_code == 3
    assert "contact cap exceeded" in result.output


def test_run_final_domain_failure_exits_3(runner, tmp_path):
    with patch(
        "ellipsoidpack.cli.density_report", side_effect=DomainError("final A is not L-free")
    ):
        result = runner.invoke(cli, run_args(tmp_path))
    assert result.exit_code == 3
    assert "density check" in result.output
    assert "not L-free" in result.output


def test_run_interrupted_exits_130(runner, tmp_path):
    with patch("ellipsoidpack.cli.run_trajectory", side_effect=KeyboardInterrupt):
        result = runner.invoke(cli, run_args(tmp_path))
    assert result.exit_code == 130


def test_ensemble_writes_reports(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["ensemble", "--n", "2", "--count", "3", "--seed", "2", "--dt-max", FAST_DT,
         "--out", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output

    for index in range(3):
        assert (tmp_path / f"trajectory_{index:05d}.jsonl").exists()
    lines = (tmp_path / "ensemble.csv").read_text().splitlines()
    assert len(lines) == 513
    assert lines[0] == "t,mean_logdet,se_logdet,mean_contacts,mean_dimF"
    assert float(lines[1].split(",")[0]) == 0.0
    assert float(lines[-1].split(",")[0]) == default_horizon(2)

    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["report_type"] == "ensemble"
    assert summary["count"] == 3
    assert summary["horizon"] == default_horizon(2)
    assert summary["metadata"]["failed"] == []
    assert "<!DOCTYPE html>" in (tmp_path / "report.html").read_text()


def test_ensemble_member_failure_exits_2(runner, tmp_path):
    result = runner.invoke(
        cli,
        ["ensemble", "--count", "2", "--a0", "0.25", "--dt-max", FAST_DT, "--out", str(tmp_path)],
    )
    assert result.exit_code == 2
    assert "DomainError" in result.output
    assert not (tmp_path / "ensemble.csv").exists()


def test_verify_lattice_suite(runner, tmp_path):
    result = runner.invoke(
        cli, ["verify", "--suite", "lattice", "--samples", "100", "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    assert "All checks passed" in result.output
    assert "**Result:** PASS" in (tmp_path / "verification.md").read_text()


def test_verify_failure_exits_1(runner):
    summary = VerificationSummary(suite="evolve")
    summary.checks.append(CheckResult("determinism", Status.FAIL, "records differ"))
    with patch("ellipsoidpack.cli.run_suite", return_value=summary):
        result = runner.invoke(cli, ["verify", "--suite", "evolve"])
    assert result.exit_code == 1
    assert "First failure: determinism: records differ" in result.output


def test_verify_rejects_unknown_suite(runner):
    result = runner.invoke(cli, ["verify", "--suite", "everything"])
    assert result.exit_code == 2


def test_siegel_prints_json(runner, tmp_path):
    result = runner.invoke(
        cli, ["siegel", "--n", "2", "--samples", "300", "--seed", "1", "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    data = json_line(result.output)
    assert data["kind"] == "exact2d"
    assert data["radius"] == 0.5
    assert data["samples"] == 300
    assert data["target"] == pytest.approx(0.25)
    assert json.loads((tmp_path / "siegel.json").read_text())["report_type"] == "siegel"


def test_shell_integral_truncated(runner):
    result = runner.invoke(cli, ["shell-integral", "--n", "8", "--truncate"])
    assert result.exit_code == 0, result.output
    data = json_line(result.output)
    assert data["n"] == 8
    assert data["truncated"] is True
    assert data["value"] > 0.0


def test_shell_integral_singular_range_exits_2(runner):
    result = runner.invoke(cli, ["shell-integral", "--n", "8"])
    assert result.exit_code == 2


def test_shell_integral_small_t(runner, tmp_path):
    result = runner.invoke(
        cli, ["shell-integral", "--n", "8", "--t", "1e-10", "--a0", "1.1", "--out", str(tmp_path)]
    )
    assert result.exit_code == 0, result.output
    data = json_line(result.output)
    assert data["truncated"] is False
    assert (tmp_path / "shell_integral.json").exists()


def test_shell_integral_rejects_auto(runner):
    result = runner.invoke(cli, ["shell-integral", "--a0", "auto"])
    assert result.exit_code == 2


def test_json_logs_flag(runner, tmp_path):
    result = runner.invoke(cli, ["--json-logs", *run_args(tmp_path)])
    assert result.exit_code == 0, result.output
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["json_logs"] is True
