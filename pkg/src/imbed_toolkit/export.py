"""Deterministic CSV and JSON artifacts.

CSV files use 17 significant digits, '.' as decimal separator and '\\n'
line endings so repeated runs with the same inputs are byte-identical.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from imbed_toolkit.errors import IoError
from imbed_toolkit.fredholm_frontend import CorrespondenceReport
from imbed_toolkit.hammerstein_solver import ContinuationState
from imbed_toolkit.imbedding_engine import ImbeddingState
from imbed_toolkit.operator_core import operator_to_json

TRAJECTORY_COLUMNS = ["lambda_re", "lambda_im", "d_re", "d_im", "residual", "step_size"]
BRANCH_COLUMNS = ["lambda", "branch_id", "d_lin_re", "d_lin_im", "amplitude", "newton_iters"]
FLOAT_FORMAT = "%.17g"


def _pair(z: complex) -> list[float]:
    return [float(complex(z).real), float(complex(z).imag)]


def trajectory_frame(states: Iterable[ImbeddingState]) -> pd.DataFrame:
    rows = [
        {
            "lambda_re": s.lam.real,
            "lambda_im": s.lam.imag,
            "d_re": s.d.real,
            "d_im": s.d.imag,
            "residual": s.residual,
            "step_size": s.step_size,
        }
        for s in states
    ]
    return pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)


def trajectory_json(states: Sequence[ImbeddingState], snapshots: bool = True) -> dict[str, Any]:
    """Trajectory records; states on a waypoint carry their D snapshot."""
    records = []
    for s in states:
        record: dict[str, Any] = {
            "lambda": _pair(s.lam),
            "d": _pair(s.d),
            "residual": s.residual,
            "step_size": s.step_size,
            "waypoint": s.waypoint,
        }
        if snapshots and s.waypoint is not None:
            record["D"] = operator_to_json(s.D)
        records.append(record)
    return {"trajectory": records}


def eigen_frame(pairs: Sequence[tuple[complex, Any]]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"index": i, "lambda_re": lam.real, "lambda_im": lam.imag} for i, (lam, _) in
         enumerate(pairs)],
        columns=["index", "lambda_re", "lambda_im"],
    )


def eigen_json(pairs: Sequence[tuple[complex, Any]]) -> dict[str, Any]:
    return {
        "eigenvalues": [
            {"lambda": _pair(lam), "eigenvector": [_pair(z) for z in np.asarray(vec)]}
            for lam, vec in pairs
        ]
    }


def branch_frame(states: Iterable[ContinuationState]) -> pd.DataFrame:
    rows = [
        {
            "lambda": s.lam,
            "branch_id": s.branch_id,
            "d_lin_re": s.d_lin.real,
            "d_lin_im": s.d_lin.imag,
            "amplitude": s.amplitude,
            "newton_iters": s.newton_iters,
        }
        for s in states
    ]
    return pd.DataFrame(rows, columns=BRANCH_COLUMNS)


def branch_json(states: Sequence[ContinuationState], nodes: Any = None) -> dict[str, Any]:
    """Branch records with per-node ψ dumps and bifurcation flags."""
    out: dict[str, Any] = {
        "states": [
            {
                "lambda": s.lam,
                "branch_id": s.branch_id,
                "d_lin": _pair(s.d_lin),
                "amplitude": s.amplitude,
                "newton_iters": s.newton_iters,
                "residual": s.residual,
                "is_bifurcation": s.is_bifurcation,
                "psi": [_pair(z) for z in s.psi],
            }
            for s in states
        ]
    }
    if nodes is not None:
        out["nodes"] = [float(x) for x in nodes]
    return out


def solution_frame(nodes: Any, psi: Any) -> pd.DataFrame:
    values = np.asarray(psi, dtype=np.complex128)
    return pd.DataFrame({"x": np.asarray(nodes, dtype=float), "psi_re": values.real,
                         "psi_im": values.imag})


def correspondence_frame(reports: Iterable[CorrespondenceReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "lambda_re": r.lam.real,
                "lambda_im": r.lam.imag,
                "d_classical_re": r.d_classical.real,
                "d_classical_im": r.d_classical.imag,
                "d_general_re": r.d_general.real,
                "d_general_im": r.d_general.imag,
                "kernel_residual": r.kernel_residual,
                "determinant_residual": r.determinant_residual,
                "resolvent_residual": r.resolvent_residual,
            }
            for r in reports
        ]
    )


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise IoError(f"Cannot write {target}: {exc}") from exc
    return target


def write_json(payload: dict[str, Any], path: str | Path) -> Path:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"Cannot write {target}: {exc}") from exc
    return target
