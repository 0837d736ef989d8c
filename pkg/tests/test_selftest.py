"""Tests for the seeded invariant suite and artifact writers."""

from __future__ import annotations

import json
import math

import numpy as np
import pandas as pd
import pytest

from imbed_toolkit.errors import IoError
from imbed_toolkit.export import (
    FLOAT_FORMAT,
    correspondence_frame,
    trajectory_frame,
    trajectory_json,
    write_csv,
    write_json,
)
from imbed_toolkit.fredholm_frontend import KernelSpec, QuadratureGrid, correspondence_check
from imbed_toolkit.imbedding_engine import ImbeddingState, IntegratorConfig
from imbed_toolkit.selftest import (
    SELFTEST_COLUMNS,
    check_operator,
    random_operator,
    run_selftest,
)


class TestRandomOperator:
    def test_entries_in_disc(self):
        A = random_operator(np.random.default_rng(0), 6)
        assert A.shape == (6, 6)
        assert np.max(np.abs(A)) <= 0.5


class TestCheckOperator:
    def test_errors_small(self):
        A = random_operator(np.random.default_rng(3), 5)
        errors = check_operator(A, IntegratorConfig())
        assert errors["det_error"] < 1e-9
        assert errors["identity_error"] < 1e-9
        assert errors["bootstrap_error"] < 1e-7

    def test_bootstrap_skipped_without_config(self):
        errors = check_operator(random_operator(np.random.default_rng(3), 3), None)
        assert math.isnan(errors["bootstrap_error"])


class TestRunSelftest:
    def test_passes(self):
        report = run_selftest(42, cases=20, bootstrap_cases=5)
        assert report.passed, report.failures
        assert list(report.frame.columns) == SELFTEST_COLUMNS
        assert len(report.frame) == 20
        assert report.frame["bootstrap_error"].notna().sum() == 5

    def test_deterministic(self):
        first = run_selftest(7, cases=10, bootstrap_cases=0)
        second = run_selftest(7, cases=10, bootstrap_cases=0)
        pd.testing.assert_frame_equal(first.frame, second.frame)

    def test_invalid_cases(self):
        with pytest.raises(ValueError, match="cases"):
            run_selftest(0, cases=0)


class TestWriters:
    def test_csv_round_trips_floats(self, tmp_path):
        frame = pd.DataFrame({"value": [1 / 3, 2.0**-40]})
        path = write_csv(frame, tmp_path / "out" / "values.csv")
        text = path.read_text()
        assert (FLOAT_FORMAT % (1 / 3)) in text
        assert pd.read_csv(path)["value"].tolist() == [1 / 3, 2.0**-40]

    def test_json_sorted(self, tmp_path):
        path = write_json({"b": 1, "a": 2}, tmp_path / "x.json")
        assert path.read_text().index('"a"') < path.read_text().index('"b"')

    def test_unwritable_target(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(IoError):
            write_csv(pd.DataFrame({"a": [1]}), blocker / "sub" / "x.csv")

    def test_trajectory(self):
        states = [
            ImbeddingState(lam=0j, d=1 + 0j, D=np.eye(2), waypoint=0),
            ImbeddingState(lam=1 + 0j, d=2 - 1j, D=np.eye(2), residual=1e-12, step_size=1.0,
                           waypoint=1),
        ]
        frame = trajectory_frame(states)
        assert frame["d_im"].tolist() == [0.0, -1.0]
        payload = trajectory_json(states)
        assert json.loads(json.dumps(payload)) == payload

    def test_correspondence_frame(self):
        report = correspondence_check(KernelSpec.builtin("product_xy"),
                                      QuadratureGrid.gauss_legendre(4), 1.0, IntegratorConfig())
        frame = correspondence_frame([report])
        assert frame["d_general_re"].iloc[0] == pytest.approx(2.0 / 3.0, abs=1e-8)
        assert frame["determinant_residual"].iloc[0] < 1e-7
