"""Tests for the imbed command line."""

from __future__ import annotations

import json
from unittest.mock import patch

import pandas as pd
import pytest
from click.testing import CliRunner

from imbed_toolkit.cli import main
from imbed_toolkit.errors import SingularityError


def _write_config(tmp_path, doc: dict, name: str = "run.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _zero_family(dim: int = 2) -> dict:
    return {"A": {"dim": dim, "entries": [[0.0, 0.0]] * (dim * dim)}}


@pytest.fixture
def runner():
    return CliRunner()


class TestScan:
    def test_zero_family_keeps_d_at_one(self, runner, tmp_path):
        config = _write_config(tmp_path, {
            "scenario": "scan",
            "family": _zero_family(),
            "path": [0, 2],
            "output": {"formats": ["csv", "json"]},
        })
        out = tmp_path / "zero"
        result = runner.invoke(main, ["scan", "--config", config, "--out", str(out)])
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "zero.trajectory.csv")
        assert list(frame.columns) == ["lambda_re", "lambda_im", "d_re", "d_im", "residual",
                                       "step_size"]
        assert (frame["d_re"] == 1.0).all()
        assert frame["lambda_re"].iloc[-1] == 2.0
        payload = json.loads((tmp_path / "zero.trajectory.json").read_text())
        assert "trajectory" in payload

    def test_correspondence_report(self, runner, tmp_path):
        config = _write_config(tmp_path, {
            "scenario": "scan",
            "kernel": {"name": "exponential_absdiff", "params": {"c": 1}},
            "grid": {"n": 16},
            "path": [0, 0.6, 1.2],
            "correspondence": True,
            "output": {"formats": ["csv", "json"]},
        })
        result = runner.invoke(main, ["scan", "-c", config, "-o", str(tmp_path / "corr")])
        assert result.exit_code == 0, result.output
        assert "classical vs general" in result.output
        frame = pd.read_csv(tmp_path / "corr.correspondence.csv")
        assert frame["lambda_re"].tolist() == [0.6, 1.2]
        assert (frame["determinant_residual"] < 1e-6).all()
        assert (frame["resolvent_residual"] < 1e-6).all()
        payload = json.loads((tmp_path / "corr.correspondence.json").read_text())
        assert len(payload["reports"]) == 2

    def test_symmetrize_warns_on_asymmetric_kernel(self, runner, tmp_path, caplog):
        config = _write_config(tmp_path, {
            "scenario": "scan",
            "kernel": {"kind": "separable",
                       "factors": [[{"name": "constant", "params": {"c": 1}},
                                    {"name": "power", "params": {"p": 2}}]]},
            "grid": {"n": 6},
            "path": [0, 1],
            "symmetrize": True,
        })
        with caplog.at_level("WARNING", logger="imbed_toolkit.cli"):
            result = runner.invoke(main, ["scan", "-c", config, "-o", str(tmp_path / "sym")])
        assert result.exit_code == 0, result.output
        assert "not symmetric" in caplog.text

    def test_csv_uses_unix_line_endings(self, runner, tmp_path):
        config = _write_config(tmp_path, {"scenario": "scan", "family": _zero_family(1),
                                          "path": [0, 1]})
        runner.invoke(main, ["scan", "-c", config, "-o", str(tmp_path / "run")])
        assert b"\r\n" not in (tmp_path / "run.trajectory.csv").read_bytes()

    def test_singularity_exit_code(self, runner, tmp_path):
        config = _write_config(tmp_path, {"scenario": "scan", "family": _zero_family(),
                                          "path": [0, 4]})
        out = tmp_path / "sing"
        with patch("imbed_toolkit.cli.march",
                   side_effect=SingularityError("d vanished", lam=3.0, d=0j)):
            result = runner.invoke(main, ["scan", "--config", config, "--out", str(out)])
        assert result.exit_code == 3
        record = json.loads((tmp_path / "sing.error.json").read_text())
        assert record == {"error_kind": "SingularityError", "lambda": [3.0, 0.0],
                          "message": "d vanished"}


class TestEigs:
    def test_product_xy(self, runner, tmp_path):
        config = _write_config(tmp_path, {
            "scenario": "eigs",
            "kernel": {"kind": "builtin", "name": "product_xy"},
            "grid": {"rule": "gauss_legendre", "n": 8},
            "path": [0, 4],
        })
        result = runner.invoke(main, ["eigs", "-c", config, "-o", str(tmp_path / "eig")])
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "eig.eigenvalues.csv")
        assert len(frame) == 1
        assert frame["lambda_re"].iloc[0] == pytest.approx(3.0, abs=1e-8)

    def test_no_zero_exit_code(self, runner, tmp_path):
        config = _write_config(tmp_path, {
            "scenario": "eigs",
            "kernel": {"name": "product_xy"},
            "grid": {"n": 4},
            "path": [0, 1],
        })
        result = runner.invoke(main, ["eigs", "-c", config, "-o", str(tmp_path / "none")])
        assert result.exit_code == 4
        record = json.loads((tmp_path / "none.error.json").read_text())
        assert record["error_kind"] == "NoBracketError"


class TestSolve:
    def test_product_xy(self, runner, tmp_path):
        config = _write_config(tmp_path, {
            "scenario": "solve",
            "kernel": {"name": "product_xy"},
            "grid": {"n": 8},
            "lambda": 1.0,
            "phi": {"name": "power", "params": {"p": 1}},
        })
        result = runner.invoke(main, ["solve", "-c", config, "-o", str(tmp_path / "sol")])
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "sol.solution.csv")
        assert (frame["psi_re"] - 1.5 * frame["x"]).abs().max() < 1e-7


class TestHammerstein:
    def test_flags_bifurcation(self, runner, tmp_path):
        config = _write_config(tmp_path, {
            "scenario": "hammerstein",
            "kernel": {"name": "sine_product", "params": {"n": 1}},
            "grid": {"n": 16},
            "hammerstein": {"nonlinearity": "linear", "lambda_start": 1.5,
                            "lambda_end": 2.5, "step": 0.1},
            "output": {"formats": ["csv", "json"]},
        })
        result = runner.invoke(main, ["hammerstein", "-c", config, "-o", str(tmp_path / "br")])
        assert result.exit_code == 0, result.output
        assert "Bifurcation candidate" in result.output
        frame = pd.read_csv(tmp_path / "br.branches.csv")
        assert list(frame.columns) == ["lambda", "branch_id", "d_lin_re", "d_lin_im",
                                       "amplitude", "newton_iters"]
        payload = json.loads((tmp_path / "br.branches.json").read_text())
        flagged = [s["lambda"] for s in payload["states"] if s["is_bifurcation"]]
        assert flagged
        assert all(abs(lam - 2.0) < 1e-6 for lam in flagged)
        assert len(payload["nodes"]) == 16


class TestSelftest:
    def test_byte_identical_reruns(self, runner, tmp_path):
        config = _write_config(tmp_path, {"scenario": "selftest", "selftest": {"cases": 6}})
        for name in ("first", "second"):
            result = runner.invoke(main, ["selftest", "-c", config, "--seed", "42",
                                          "--out", str(tmp_path / name)])
            assert result.exit_code == 0, result.output
        first = (tmp_path / "first.selftest.csv").read_bytes()
        assert first == (tmp_path / "second.selftest.csv").read_bytes()
        assert len(pd.read_csv(tmp_path / "first.selftest.csv")) == 6

    def test_seed_changes_cases(self, runner, tmp_path):
        config = _write_config(tmp_path, {"scenario": "selftest", "selftest": {"cases": 6}})
        for seed in ("1", "2"):
            runner.invoke(main, ["selftest", "-c", config, "-s", seed,
                                 "-o", str(tmp_path / f"s{seed}")])
        assert (tmp_path / "s1.selftest.csv").read_bytes() != (
            tmp_path / "s2.selftest.csv"
        ).read_bytes()


class TestConfigErrors:
    def test_missing_path(self, runner, tmp_path):
        config = _write_config(tmp_path, {"scenario": "scan", "family": _zero_family()})
        out = tmp_path / "bad"
        result = runner.invoke(main, ["scan", "-c", config, "-o", str(out)])
        assert result.exit_code == 2
        assert "ConfigError" in result.output
        record = json.loads((tmp_path / "bad.error.json").read_text())
        assert record["error_kind"] == "ConfigError"
        assert record["lambda"] is None

    def test_invalid_json(self, runner, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        result = runner.invoke(main, ["scan", "-c", str(path)])
        assert result.exit_code == 2

    def test_scenario_mismatch(self, runner, tmp_path):
        config = _write_config(tmp_path, {"scenario": "eigs", "family": _zero_family(),
                                          "path": [0, 1]})
        result = runner.invoke(main, ["scan", "-c", config, "-o", str(tmp_path / "x")])
        assert result.exit_code == 2

    def test_unknown_integrator_setting(self, runner, tmp_path):
        config = _write_config(tmp_path, {"scenario": "scan", "family": _zero_family(),
                                          "path": [0, 1], "integrator": {"order": 8}})
        result = runner.invoke(main, ["scan", "-c", config, "-o", str(tmp_path / "x")])
        assert result.exit_code == 2

    def test_phi_longer_than_family(self, runner, tmp_path):
        config = _write_config(tmp_path, {"scenario": "solve", "family": _zero_family(2),
                                          "lambda": 1.0, "phi": [1.0, 2.0, 3.0]})
        result = runner.invoke(main, ["solve", "-c", config, "-o", str(tmp_path / "phi")])
        assert result.exit_code == 2
        record = json.loads((tmp_path / "phi.error.json").read_text())
        assert record["error_kind"] == "ConfigError"
        assert "dimension 2" in record["message"]

    def test_library_value_error_keeps_record(self, runner, tmp_path):
        config = _write_config(tmp_path, {"scenario": "scan", "family": _zero_family(),
                                          "path": [0, 1]})
        with patch("imbed_toolkit.cli.march", side_effect=ValueError("bad waypoint")):
            result = runner.invoke(main, ["scan", "-c", config, "-o", str(tmp_path / "val")])
        assert result.exit_code == 2
        record = json.loads((tmp_path / "val.error.json").read_text())
        assert record == {"error_kind": "ConfigError", "lambda": None,
                          "message": "bad waypoint"}


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "version" in result.output
