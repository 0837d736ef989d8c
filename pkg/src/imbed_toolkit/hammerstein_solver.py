"""Hammerstein equations ψ(x) = λ∫K(x,y)F(y, ψ(y))dy on a Nyström grid.

Newton's method linearizes around the current iterate; each linear solve
[I - λKW diag(∂F/∂ψ)]δ = -r goes through the imbedding engine, whose
determinant d_lin doubles as the bifurcation indicator along a λ-march.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any

import numpy as np
import numpy.typing as npt

from imbed_toolkit.errors import (
    ConsistencyError,
    DomainMismatchError,
    NoBracketError,
    NonConvergenceError,
    SingularityError,
)
from imbed_toolkit.fredholm_frontend import KernelSpec, QuadratureGrid, sample_phi
from imbed_toolkit.imbedding_engine import (
    ImbeddingState,
    IntegratorConfig,
    LambdaPath,
    OperatorFamily,
    bootstrap_state,
    find_eigenvalues,
    solve,
)

logger = logging.getLogger(__name__)

ComplexVector = npt.NDArray[np.complex128]
Nonlinearity = Callable[[Any, ComplexVector], ComplexVector]

NONLINEARITIES = ("linear", "cubic", "sine", "tanh")


def nonlinearity(name: str, **params: float) -> tuple[Nonlinearity, Nonlinearity]:
    """Builtin (F, ∂F/∂ψ) pairs.

    ``linear``: ψ. ``cubic(a)``: ψ + aψ³. ``sine``: sin ψ. ``tanh``: tanh ψ.
    """
    if name == "linear":
        return (lambda y, psi: psi, lambda y, psi: np.ones_like(psi))
    if name == "cubic":
        a = params.get("a", 1.0)
        if not math.isfinite(a):
            raise ValueError(f"cubic coefficient must be finite, got {a}")
        return (lambda y, psi: psi + a * psi**3, lambda y, psi: 1.0 + 3.0 * a * psi**2)
    if name == "sine":
        return (lambda y, psi: np.sin(psi), lambda y, psi: np.cos(psi))
    if name == "tanh":
        return (lambda y, psi: np.tanh(psi), lambda y, psi: 1.0 / np.cosh(psi) ** 2)
    raise ValueError(f"Unknown nonlinearity {name!r}; expected one of {NONLINEARITIES}")


_PROBES = (-1.0, -0.3, 0.0, 0.2, 0.7, 1.1)


@dataclass(frozen=True, eq=False)
class NonlinearProblem:
    """Kernel, grid and nonlinearity of a discretized Hammerstein equation.

    ``dF`` is checked against central differences of ``F`` on sample values
    at every node when the problem is built.
    """

    kernel: KernelSpec
    grid: QuadratureGrid
    F: Nonlinearity
    dF: Nonlinearity

    def __post_init__(self) -> None:
        y = self.grid.nodes
        h = 1e-6
        for p in _PROBES:
            psi = np.full(y.size, p, dtype=np.complex128)
            value = np.asarray(self.F(y, psi), dtype=np.complex128)
            slope = np.asarray(self.dF(y, psi), dtype=np.complex128)
            if not (np.all(np.isfinite(value)) and np.all(np.isfinite(slope))):
                raise ValueError(f"F or dF is not finite at psi={p}")
            fd = (np.asarray(self.F(y, psi + h)) - np.asarray(self.F(y, psi - h))) / (2 * h)
            if np.any(np.abs(fd - slope) > 1e-5 * (1.0 + np.abs(slope))):
                raise ValueError(f"dF disagrees with finite differences of F at psi={p}")

    @classmethod
    def from_name(
        cls, kernel: KernelSpec, grid: QuadratureGrid, name: str, **params: float
    ) -> NonlinearProblem:
        F, dF = nonlinearity(name, **params)
        return cls(kernel=kernel, grid=grid, F=F, dF=dF)

    @cached_property
    def KW(self) -> npt.NDArray[np.float64]:
        if abs(self.kernel.a - self.grid.a) > 1e-14 or abs(self.kernel.b - self.grid.b) > 1e-14:
            raise DomainMismatchError(
                f"Kernel domain {self.kernel.domain} differs from grid [{self.grid.a}, "
                f"{self.grid.b}]"
            )
        return self.kernel.evaluate(self.grid.nodes, self.grid.nodes) * self.grid.weights[None, :]

    @property
    def size(self) -> int:
        return self.grid.size

    def residual(self, lam: float, psi: ComplexVector) -> ComplexVector:
        """ψ - λ K W F(ψ)."""
        return psi - lam * (self.KW @ self.F(self.grid.nodes, psi))

    def linearized_slope(self, lam: float, psi: ComplexVector) -> npt.NDArray[np.complex128]:
        """-λ K W diag(∂F/∂ψ), so the Newton matrix is I plus this."""
        return -lam * self.KW * np.asarray(self.dF(self.grid.nodes, psi))[None, :]


@dataclass(frozen=True)
class ContinuationState:
    """Converged solution on a branch with its bifurcation indicator."""

    lam: float
    psi: ComplexVector
    d_lin: complex
    branch_id: int = 0
    newton_iters: int = 0
    residual: float = 0.0
    is_bifurcation: bool = False

    @property
    def amplitude(self) -> float:
        return float(np.linalg.norm(self.psi))


@dataclass(frozen=True)
class ContinuationConfig:
    """Newton, bracketing and integration settings for a branch march.

    Attributes:
        newton_tol: Converged when ‖ψ - λKW F(ψ)‖∞ drops below this.
        max_iters: Newton iteration cap.
        bifurcation_tol: States with |d_lin| below this are flagged.
        bracket_tol: Width to which sign changes of d_lin are bisected.
        integrator: Settings for the imbedding linear solves.
    """

    newton_tol: float = 1e-10
    max_iters: int = 25
    bifurcation_tol: float = 1e-3
    bracket_tol: float = 1e-8
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        for name in ("newton_tol", "bifurcation_tol", "bracket_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


def _linearize(
    problem: NonlinearProblem, lam: float, psi: ComplexVector, cfg: IntegratorConfig
) -> tuple[OperatorFamily, ImbeddingState]:
    family = OperatorFamily.linear(problem.linearized_slope(lam, psi))
    return family, bootstrap_state(family, 1.0, cfg)


def newton_solve(
    problem: NonlinearProblem,
    lam: float,
    psi0: Any,
    newton_tol: float = 1e-10,
    max_iters: int = 25,
    cfg: IntegratorConfig | None = None,
    branch_id: int = 0,
) -> ContinuationState:
    """Newton iteration for ψ = λKW F(ψ) with imbedding linear solves.

    Each step bootstraps the family μ ↦ μ·(-λKW diag ∂F/∂ψ) from μ = 0 to 1
    and solves for the correction with the resulting D/d.

    Raises:
        NonConvergenceError: after ``max_iters`` corrections.
        SingularityError: when the linearized determinant vanishes.
        ConsistencyError: when a correction fails the linear-solve residual check.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    cfg = cfg or IntegratorConfig()
    psi = sample_phi(psi0, problem.grid).copy()
    iters = 0
    while True:
        r = problem.residual(lam, psi)
        norm = float(np.max(np.abs(r)))
        if not math.isfinite(norm):
            raise NonConvergenceError(
                f"Newton diverged at lambda={lam} after {iters} iterations",
                lam=lam,
                iterations=iters,
            )
        try:
            family, state = _linearize(problem, lam, psi, cfg)
        except SingularityError as err:
            raise SingularityError(
                f"Linearized determinant vanishes at lambda={lam}", lam=lam, d=err.d
            ) from err
        if norm < newton_tol:
            logger.debug("Newton converged at lambda=%.10g in %d iterations", lam, iters)
            return ContinuationState(
                lam=float(lam),
                psi=psi,
                d_lin=state.d,
                branch_id=branch_id,
                newton_iters=iters,
                residual=norm,
            )
        if iters >= max_iters:
            raise NonConvergenceError(
                f"Newton residual {norm:.3e} above {newton_tol:.1e} after {iters} iterations "
                f"at lambda={lam}",
                lam=lam,
                iterations=iters,
            )
        psi = psi + solve(state, -r, cfg, family)
        iters += 1


def _solve_at(
    problem: NonlinearProblem,
    lam: float,
    psi0: ComplexVector,
    cfg: ContinuationConfig,
    branch_id: int,
    nudge: float,
) -> ContinuationState:
    try:
        return newton_solve(problem, lam, psi0, cfg.newton_tol, cfg.max_iters, cfg.integrator,
                            branch_id)
    except (SingularityError, ConsistencyError):
        logger.debug("Singular linearization at lambda=%.10g; nudging by %.1e", lam, nudge)
        return newton_solve(problem, lam + nudge, psi0, cfg.newton_tol, cfg.max_iters,
                            cfg.integrator, branch_id)


def _bisect_bifurcation(
    problem: NonlinearProblem,
    left: ContinuationState,
    right: ContinuationState,
    cfg: ContinuationConfig,
) -> ContinuationState:
    a, b = left, right
    while abs(b.lam - a.lam) > cfg.bracket_tol:
        m = 0.5 * (a.lam + b.lam)
        try:
            mid = newton_solve(problem, m, a.psi, cfg.newton_tol, cfg.max_iters, cfg.integrator,
                               a.branch_id)
        except (SingularityError, ConsistencyError) as err:
            logger.debug("d_lin vanished during bisection at lambda=%.12g", m)
            d_mid = err.d if isinstance(err, SingularityError) else None
            mid = ContinuationState(lam=m, psi=a.psi, d_lin=complex(d_mid or 0.0),
                                    branch_id=a.branch_id)
            return replace(mid, is_bifurcation=True)
        if np.sign(mid.d_lin.real) == np.sign(a.d_lin.real):
            a = mid
        else:
            b = mid
    best = a if abs(a.d_lin) <= abs(b.d_lin) else b
    return replace(best, is_bifurcation=True)


def continue_branch(
    problem: NonlinearProblem,
    lam_start: float,
    lam_end: float,
    step: float,
    psi0: Any,
    cfg: ContinuationConfig | None = None,
    branch_id: int = 0,
) -> list[ContinuationState]:
    """Natural-parameter continuation from ``lam_start`` to ``lam_end``.

    The previous solution predicts the next. Sign changes of d_lin between
    consecutive states are bisected to ``bracket_tol`` and the located point
    is inserted with ``is_bifurcation`` set; states with
    |d_lin| < ``bifurcation_tol`` are flagged as well.

    Raises:
        NonConvergenceError: propagated with the failing λ.
    """
    if step == 0 or not math.isfinite(step):
        raise ValueError(f"step must be finite and non-zero, got {step}")
    if lam_end != lam_start and math.copysign(1.0, step) != math.copysign(1.0, lam_end - lam_start):
        raise ValueError(f"step {step} points away from lambda_end={lam_end}")
    cfg = cfg or ContinuationConfig()
    n_steps = max(1, math.ceil(abs(lam_end - lam_start) / abs(step) - 1e-12))
    lams = [lam_start + k * step for k in range(n_steps)] + [lam_end]
    if lam_end == lam_start:
        lams = [lam_start]

    states: list[ContinuationState] = []
    psi = sample_phi(psi0, problem.grid)
    for lam in lams:
        state = _solve_at(problem, lam, psi, cfg, branch_id, 1e-6 * step)
        if abs(state.d_lin) < cfg.bifurcation_tol:
            state = replace(state, is_bifurcation=True)
        if states and np.sign(states[-1].d_lin.real) * np.sign(state.d_lin.real) < 0:
            located = _bisect_bifurcation(problem, states[-1], state, cfg)
            logger.info("Bifurcation candidate at lambda=%.10g (d_lin=%.2e)", located.lam,
                        abs(located.d_lin))
            states.append(located)
        states.append(state)
        psi = state.psi
    return states


def null_vector(
    problem: NonlinearProblem, state: ContinuationState, cfg: IntegratorConfig, refine_tol: float
) -> ComplexVector:
    """Near-null vector of I - λKW diag(∂F/∂ψ) at ``state``.

    The family μ ↦ I + μ·(-λKW diag ∂F/∂ψ) is scanned over μ ∈ [0.5, 1.5];
    the eigenvector of the zero closest to μ = 1 is returned.
    """
    family = OperatorFamily.linear(problem.linearized_slope(state.lam, state.psi))
    found = find_eigenvalues(family, LambdaPath((0.5, 1.5)), cfg, refine_tol)
    _, vector = min(found, key=lambda pair: abs(pair[0] - 1.0))
    return vector


def branch_switch(
    problem: NonlinearProblem,
    state: ContinuationState,
    direction: int,
    amplitude: float = 1.0,
    step: float = 0.1,
    cfg: ContinuationConfig | None = None,
) -> ContinuationState:
    """Jump from a bifurcation point onto the crossing branch.

    ψ is perturbed by direction·amplitude·v with v the unit near-null
    vector, and Newton is run at λ* + step. If that collapses back onto
    the input branch, λ* - step is tried. When both collapse the
    collapsed state is returned under the input branch id.

    Raises:
        NonConvergenceError: if the perturbed Newton fails on both sides.
    """
    if direction not in (1, -1):
        raise ValueError(f"direction must be +1 or -1, got {direction}")
    if step == 0:
        raise ValueError("step must be non-zero")
    cfg = cfg or ContinuationConfig()
    if abs(state.d_lin) >= cfg.bifurcation_tol:
        raise ValueError(
            f"|d_lin| = {abs(state.d_lin):.3e} at lambda={state.lam} is not below "
            f"bifurcation_tol {cfg.bifurcation_tol}"
        )
    try:
        v = null_vector(problem, state, cfg.integrator, refine_tol=cfg.bracket_tol)
    except NoBracketError as err:
        raise NonConvergenceError(
            f"No near-null direction at lambda={state.lam}", lam=state.lam
        ) from err
    guess = state.psi + direction * amplitude * v

    collapsed: ContinuationState | None = None
    failure: NonConvergenceError | None = None
    for lam in (state.lam + step, state.lam - step):
        try:
            candidate = _solve_at(problem, lam, guess, cfg, state.branch_id + 1, 1e-6 * step)
        except NonConvergenceError as err:
            failure = err
            continue
        try:
            original = _solve_at(problem, lam, state.psi, cfg, state.branch_id, 1e-6 * step)
            gap = float(np.max(np.abs(candidate.psi - original.psi)))
        except NonConvergenceError:
            gap = math.inf
        if gap > 1e-3 * amplitude:
            logger.info("Switched to branch %d at lambda=%.6g (amplitude %.4g)",
                        candidate.branch_id, candidate.lam, candidate.amplitude)
            return candidate
        collapsed = collapsed or replace(candidate, branch_id=state.branch_id)
    if collapsed is not None:
        logger.info("Perturbation decayed at lambda=%.6g; staying on branch %d",
                    collapsed.lam, collapsed.branch_id)
        return collapsed
    assert failure is not None
    raise failure
