"""
Tests for the saddle-flow command line.

Run with: python -m pytest saddle_flow/test_cli.py -v
"""

import json
import os
from unittest.mock import patch

import pytest

from saddle_flow.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main, parse_and_validate


def usage_error(argv, capsys) -> str:
    with pytest.raises(SystemExit) as exc:
        parse_and_validate(argv)
    assert exc.value.code == EXIT_USAGE
    return capsys.readouterr().err


class TestParsing:
    """Flag validation and defaults"""

    def test_run_defaults(self):
        cfg = parse_and_validate(["run"])
        spec = cfg.experiment
        assert cfg.command == "run"
        assert spec.flow == "ah"
        assert spec.problem == "example1"
        assert spec.integrator.method == "adaptive-dp54"
        assert spec.integrator.horizon == 50.0

    def test_theta_out_of_range(self, capsys):
        err = usage_error(["run", "--flow", "aah", "--theta", "0.9"], capsys)
        assert "--theta" in err

    def test_aah_flag_without_aah_flow(self, capsys):
        err = usage_error(["run", "--flow", "ah", "--nu", "4"], capsys)
        assert "--nu" in err

    def test_aah_flags_accepted(self):
        cfg = parse_and_validate(["run", "--flow", "aah", "--nu", "5", "--theta", "0.25", "--mu0", "1", "1"])
        assert cfg.experiment.aah.nu == 5.0
        assert cfg.experiment.mu0 == [1.0, 1.0]

    def test_sample_interval_not_multiple(self, capsys):
        err = usage_error(["run", "--method", "fixed-rk4", "--step", "0.003"], capsys)
        assert "--sample-interval" in err

    def test_non_positive_horizon(self, capsys):
        usage_error(["run", "--horizon", "0"], capsys)

    def test_unknown_problem(self, capsys):
        usage_error(["run", "--problem", "example9"], capsys)

    def test_jobs_must_be_positive(self, capsys):
        err = usage_error(["replicate", "fig2", "--jobs", "0"], capsys)
        assert "--jobs" in err

    def test_rates_must_be_positive(self, capsys):
        err = usage_error(["rates", "--beta", "-1"], capsys)
        assert "--beta" in err

    def test_out_from_environment(self, tmp_path):
        with patch.dict(os.environ, {"SADDLE_FLOW_OUT": str(tmp_path)}):
            cfg = parse_and_validate(["run"])
        assert cfg.out_dir == str(tmp_path)
        assert cfg.experiment.out_dir == str(tmp_path)


class TestCommands:
    """main() end to end"""

    def test_rates_example1(self, capsys):
        assert main(["rates"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "rho = 0.25" in out
        assert "case (i)" in out
        assert "predicted err_sq exponent = 0.5" in out

    def test_rates_critical(self, capsys):
        assert main(["rates", "--alpha", "2", "--beta", "1", "--gamma", "2", "--scalar-hessian"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "case (ii)" in out
        assert "regime = critical" in out
        assert "t^2" in out

    def test_run_writes_curve(self, tmp_path, capsys):
        argv = ["run", "--horizon", "5", "--curve", "short", "--out", str(tmp_path)]
        assert main(argv) == EXIT_OK
        summary = json.loads(capsys.readouterr().out)
        assert summary["curve"] == "short"
        assert (tmp_path / "short.csv").exists()

    def test_validate_example1(self, capsys):
        assert main(["validate", "--problem", "example1"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "PASS certified-saddle" in out
        assert "FAIL" not in out

    def test_validate_critical_example2(self, capsys):
        assert main(["validate", "--problem", "example2", "--alpha", "2"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "PASS rate-consistency" in out
        assert "PASS dual-rate" in out

    def test_validate_infeasible_file(self, tmp_path, capsys):
        path = tmp_path / "infeasible.json"
        path.write_text(
            json.dumps({"Q": [[1.0, 0.0], [0.0, 1.0]], "q": [0.0, 0.0], "A": [[1.0, 0.0], [1.0, 0.0]], "b": [1.0, 2.0]})
        )
        assert main(["validate", "--problem-file", str(path)]) == EXIT_FAILURE
        assert "no saddle point" in capsys.readouterr().err

    def test_missing_problem_file(self, tmp_path, capsys):
        assert main(["run", "--problem-file", str(tmp_path / "absent.json")]) == EXIT_FAILURE
        assert "❌" in capsys.readouterr().err

    def test_wrong_initial_length(self, capsys):
        assert main(["run", "--horizon", "2", "--x0", "1", "2", "3"]) == EXIT_FAILURE
        assert "x0" in capsys.readouterr().err
