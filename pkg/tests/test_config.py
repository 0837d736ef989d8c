"""Tests for run configuration parsing."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from imbed_toolkit.config import load_run_config, parse_complex, parse_run_config
from imbed_toolkit.errors import ConfigError
from imbed_toolkit.fredholm_frontend import FunctionSpec


class TestParseComplex:
    def test_number(self):
        assert parse_complex(2, "x") == 2 + 0j

    def test_pair(self):
        assert parse_complex([1.5, -0.5], "x") == 1.5 - 0.5j

    @pytest.mark.parametrize("value", [[1.0], "abc", True, float("nan")])
    def test_rejects(self, value):
        with pytest.raises(ConfigError):
            parse_complex(value, "x")


class TestParseRunConfig:
    def test_scan_with_family(self):
        config = parse_run_config({
            "scenario": "scan",
            "family": {"A": {"dim": 1, "entries": [[1.0, 0.0]]}},
            "path": [0, [1, 1]],
            "integrator": {"method": "rk4", "steps_per_segment": 20},
        })
        assert config.family.dim == 1
        assert config.path.end == 1 + 1j
        assert config.integrator.method == "rk4"
        assert config.output_prefix == Path("scan")
        assert config.formats == ("csv",)

    def test_kernel_and_grid(self):
        config = parse_run_config({
            "scenario": "eigs",
            "kernel": {"kind": "builtin", "name": "exponential_absdiff", "params": {"c": 2},
                       "domain": [0, 2]},
            "grid": {"rule": "trapezoid", "n": 9},
            "path": {"waypoints": [0, 5]},
        })
        assert config.kernel.params == {"c": 2.0}
        assert config.grid.rule == "trapezoid"
        assert (config.grid.a, config.grid.b) == (0.0, 2.0)

    def test_separable_kernel(self):
        config = parse_run_config({
            "scenario": "solve",
            "kernel": {"kind": "separable",
                       "factors": [[{"name": "power", "params": {"p": 1}},
                                    {"name": "constant"}]]},
            "lambda": 0.5,
            "phi": [1, 2, 3, 4],
            "grid": {"n": 4},
        })
        assert config.kernel.kind == "separable"
        assert config.phi == (1 + 0j, 2 + 0j, 3 + 0j, 4 + 0j)

    def test_overrides(self):
        config = parse_run_config({"scenario": "selftest", "seed": 3}, out="tmp/run", seed=9)
        assert config.seed == 9
        assert config.output_prefix == Path("tmp/run")

    def test_hammerstein_defaults(self):
        config = parse_run_config({
            "scenario": "hammerstein",
            "kernel": {"name": "sine_product"},
            "hammerstein": {"lambda_start": 1.0, "lambda_end": 2.5, "step": 0.1,
                            "switch": {"direction": -1}},
        })
        settings = config.hammerstein
        assert settings.nonlinearity == "cubic"
        assert settings.psi0 == FunctionSpec("constant", {"c": 0.0})
        assert settings.continuation.bifurcation_tol == 1e-3
        assert settings.switch.direction == -1
        assert settings.switch.amplitude == 1.0

    @pytest.mark.parametrize(
        "doc, match",
        [
            ({"scenario": "fit"}, "scenario"),
            ({"scenario": "scan", "path": [0, 1]}, "kernel"),
            ({"scenario": "solve", "family": {"A": {"dim": 1, "entries": [[0, 0]]}}},
             "lambda"),
            ({"scenario": "selftest", "output": {"formats": ["xml"]}}, "formats"),
            ({"scenario": "selftest", "refine_tol": 0}, "refine_tol"),
            ({"scenario": "eigs", "kernel": {"name": "nope"}, "path": [0, 1]}, "kernel"),
            ({"scenario": "scan", "kernel": {"name": "zero"}, "path": [0]}, "path"),
            ({"scenario": "hammerstein", "kernel": {"name": "zero"},
              "hammerstein": {"lambda_start": 0, "lambda_end": 1}}, "step"),
            ({"scenario": "hammerstein", "kernel": {"name": "zero"},
              "hammerstein": {"nonlinearity": "relu", "lambda_start": 0, "lambda_end": 1,
                              "step": 0.1}}, "nonlinearity"),
            ({"scenario": "solve", "family": {"A": {"dim": 2, "entries": [[0, 0]] * 4}},
              "lambda": 1, "phi": [1, 2, 3]}, "dimension 2"),
            ({"scenario": "solve", "family": {"A": {"dim": 1, "entries": [[0, 0]]}},
              "lambda": 1, "phi": {"name": "constant", "params": {"c": 1}}}, "vector of samples"),
            ({"scenario": "solve", "kernel": {"name": "zero"}, "grid": {"n": 4},
              "lambda": 1, "phi": [1, 2]}, "4 nodes"),
            ({"scenario": "scan", "family": {"A": {"dim": 2, "entries": [[0, 0]] * 3}},
              "path": [0, 1]}, "family"),
            ({"scenario": "scan", "family": {"A": {"dim": 1, "entries": [[0, 0]]}},
              "path": [0, 1], "correspondence": True}, "correspondence"),
        ],
    )
    def test_rejects(self, doc, match):
        with pytest.raises(ConfigError, match=match):
            parse_run_config(doc)


class TestLoadRunConfig:
    def test_tabulated_kernel_relative_to_config(self, tmp_path):
        (tmp_path / "k.csv").write_text("x,0,1\n0,0,0\n1,0,1\n")
        path = tmp_path / "run.json"
        path.write_text(json.dumps({
            "scenario": "eigs",
            "kernel": {"kind": "tabulated", "csv": "k.csv"},
            "grid": {"n": 4},
            "path": [0, 4],
        }))
        config = load_run_config(path)
        assert config.kernel.kind == "tabulated"
        assert config.grid.size == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="Cannot read"):
            load_run_config(tmp_path / "absent.json")
