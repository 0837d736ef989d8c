"""Seeded invariant suite on random dense operators.

Operators of dimension 1..8 have entries drawn uniformly from the disc of
radius 0.5. Each case checks the determinant series against LU, the
D identities, the partial-trace recursion, the β_k identity and, for the
first ``bootstrap_cases`` cases, the ξ-bootstrap.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from imbed_toolkit.imbedding_engine import IntegratorConfig, OperatorFamily, bootstrap_state
from imbed_toolkit.operator_core import (
    DiscreteOperator,
    d_operator_series,
    determinant_and_adjugate,
    exterior_power_traces,
    fredholm_det_series,
    partial_trace,
    plemelj_smithies_beta,
)

logger = logging.getLogger(__name__)

SELFTEST_COLUMNS = [
    "case",
    "dim",
    "det_error",
    "identity_error",
    "commutator_error",
    "partial_trace_error",
    "beta_error",
    "bootstrap_error",
]
ALGEBRA_TOL = 1e-9
BOOTSTRAP_TOL = 1e-7


@dataclass(frozen=True)
class SelftestReport:
    frame: pd.DataFrame
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures


def random_operator(rng: np.random.Generator, dim: int, radius: float = 0.5) -> DiscreteOperator:
    """Entries uniform in the disc of the given radius."""
    r = radius * np.sqrt(rng.random((dim, dim)))
    theta = 2.0 * np.pi * rng.random((dim, dim))
    return r * np.exp(1j * theta)


def _partial_trace_error(A: DiscreteOperator) -> float:
    dim = A.shape[0]
    e = exterior_power_traces(A, dim)
    eye = np.eye(dim)
    worst = float(np.max(np.abs(partial_trace(A, 1) - eye)))
    for k in range(2, dim + 2):
        lhs = k * partial_trace(A, k) + (k - 1) * A @ partial_trace(A, k - 1)
        rhs = (e[k - 1] if k - 1 <= dim else 0.0) * eye
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def _beta_error(A: DiscreteOperator) -> float:
    worst = 0.0
    for k in range(1, A.shape[0] + 1):
        direct = plemelj_smithies_beta(A, k)
        via_trace = math.factorial(k) * A @ partial_trace(A, k)
        scale = 1.0 + float(np.max(np.abs(via_trace)))
        worst = max(worst, float(np.max(np.abs(direct - via_trace))) / scale)
    return worst


def check_operator(A: DiscreteOperator, cfg: IntegratorConfig | None) -> dict[str, float]:
    """Error of every invariant on one operator; the bootstrap runs when ``cfg`` is given."""
    det, adj = determinant_and_adjugate(A)
    series = fredholm_det_series(A, tol=1e-16).value
    D = d_operator_series(A)
    eye = np.eye(A.shape[0])
    scale = 1.0 + abs(det)
    left = np.max(np.abs(D + A @ D - det * eye))
    right = np.max(np.abs(D + D @ A - det * eye))
    AD = A @ D
    errors = {
        "det_error": abs(series - det) / max(abs(det), 1e-300),
        "identity_error": float(max(left, right)) / scale,
        "commutator_error": float(np.max(np.abs(AD - D @ A))) / (1.0 + float(np.max(np.abs(AD)))),
        "partial_trace_error": _partial_trace_error(A),
        "beta_error": _beta_error(A),
        "bootstrap_error": math.nan,
    }
    if cfg is not None:
        state = bootstrap_state(OperatorFamily.linear(A), 1.0, cfg)
        d_err = abs(state.d - det) / max(abs(det), 1e-300)
        D_err = float(np.max(np.abs(state.D - adj))) / max(1.0, float(np.max(np.abs(adj))))
        errors["bootstrap_error"] = max(d_err, D_err)
    return errors


def run_selftest(
    seed: int,
    cases: int = 200,
    bootstrap_cases: int = 50,
    max_dim: int = 8,
    cfg: IntegratorConfig | None = None,
) -> SelftestReport:
    """Run the invariant suite on ``cases`` random operators drawn from PCG64(seed)."""
    if cases < 1:
        raise ValueError(f"cases must be >= 1, got {cases}")
    cfg = cfg or IntegratorConfig()
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = []
    failures: list[str] = []
    for case in range(cases):
        dim = int(rng.integers(1, max_dim + 1))
        A = random_operator(rng, dim)
        errors = check_operator(A, cfg if case < bootstrap_cases else None)
        rows.append({"case": case, "dim": dim, **errors})
        for name, value in errors.items():
            limit = BOOTSTRAP_TOL if name == "bootstrap_error" else ALGEBRA_TOL
            if not math.isnan(value) and value > limit:
                failures.append(f"case {case} (dim {dim}): {name} = {value:.3e}")
    for failure in failures:
        logger.warning("Selftest failure: %s", failure)
    logger.info("Selftest seed=%d: %d cases, %d failures", seed, cases, len(failures))
    return SelftestReport(frame=pd.DataFrame(rows, columns=SELFTEST_COLUMNS), failures=failures)
