"""Parameter imbedding for [I + f(λ)]ψ = φ.

The determinant d(λ) = det[I + f(λ)] and the operator D(λ) = d(λ)[I + f(λ)]^{-1}
obey the pair of initial value equations

    d'(λ) = Tr[f'(λ) D(λ)],
    D'(λ) = (D(λ) / d(λ)) [d'(λ) I - f'(λ) D(λ)],

which are integrated along piecewise-linear paths in the complex λ-plane.
Initial values at any λ0 come from the same equations in an auxiliary
parameter ξ for the family ξ·f(λ0), started from d = 1, D = I at ξ = 0.
"""

from __future__ import annotations

import cmath
import logging
import math
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field, replace
from itertools import pairwise
from typing import Any

import numpy as np
import numpy.typing as npt

from imbed_toolkit.errors import ConsistencyError, NoBracketError, SingularityError
from imbed_toolkit.integrators import IntegratorConfig, iter_segment
from imbed_toolkit.operator_core import DiscreteOperator, as_operator, determinant_and_adjugate

logger = logging.getLogger(__name__)

__all__ = [
    "IntegratorConfig",
    "ImbeddingState",
    "LambdaPath",
    "OperatorFamily",
    "bootstrap_state",
    "consistency_residual",
    "detour_path",
    "extract_eigenvector",
    "find_eigenvalues",
    "imbedding_rhs",
    "initialize_at",
    "integrate_path",
    "march",
    "resolvent_residuals",
    "solve",
]

DERIVATIVE_MODES = ("analytic", "central_difference")
# minimum number of steps an eigenvalue scan takes along its path
SCAN_RESOLUTION = 200
OperatorMap = Callable[[complex], Any]


@dataclass(frozen=True)
class OperatorFamily:
    """Analytic operator family λ ↦ f(λ) with its derivative.

    In ``central_difference`` mode the derivative is
    [f(λ+h) - f(λ-h)] / 2h with ``h`` fixed, or 1e-6·(1+|λ|) when ``h``
    is None. That fallback breaks analyticity at roundoff level.
    """

    dim: int
    f: OperatorMap
    df: OperatorMap | None = None
    derivative_mode: str = "analytic"
    h: float | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"Operator family dimension must be >= 1, got {self.dim}")
        if self.derivative_mode not in DERIVATIVE_MODES:
            raise ValueError(f"derivative_mode must be one of {DERIVATIVE_MODES}")
        if self.derivative_mode == "analytic" and self.df is None:
            raise ValueError("Analytic derivative mode needs df")
        if self.h is not None and not self.h > 0:
            raise ValueError(f"Central-difference step must be positive, got {self.h}")

    @classmethod
    def linear(cls, A: Any, B: Any = None) -> OperatorFamily:
        """f(λ) = B + λA, df/dλ = A."""
        slope = as_operator(A)
        offset = np.zeros_like(slope) if B is None else as_operator(B)
        if offset.shape != slope.shape:
            raise ValueError(f"Shapes differ: {offset.shape} vs {slope.shape}")
        return cls(
            dim=slope.shape[0],
            f=lambda lam: offset + lam * slope,
            df=lambda lam: slope,
        )

    @classmethod
    def from_callable(
        cls, f: OperatorMap, dim: int, df: OperatorMap | None = None, h: float | None = None
    ) -> OperatorFamily:
        """Wrap ``f``; without ``df`` the derivative falls back to central differences."""
        if df is not None:
            return cls(dim=dim, f=f, df=df)
        return cls(dim=dim, f=f, derivative_mode="central_difference", h=h)

    def evaluate(self, lam: complex) -> DiscreteOperator:
        return self._checked(self.f(lam), "f")

    def derivative(self, lam: complex) -> DiscreteOperator:
        if self.derivative_mode == "analytic":
            assert self.df is not None
            return self._checked(self.df(lam), "df")
        step = self.h if self.h is not None else 1e-6 * (1.0 + abs(lam))
        return (self.evaluate(lam + step) - self.evaluate(lam - step)) / (2.0 * step)

    def _checked(self, value: Any, name: str) -> DiscreteOperator:
        arr = as_operator(value)
        if arr.shape[0] != self.dim:
            raise ValueError(f"{name}(λ) has dimension {arr.shape[0]}, expected {self.dim}")
        return arr


@dataclass(frozen=True)
class ImbeddingState:
    """The triple (λ, d, D) plus bookkeeping from the march that produced it."""

    lam: complex
    d: complex
    D: DiscreteOperator
    residual: float = 0.0
    step_size: float = 0.0
    waypoint: int | None = None

    @property
    def dim(self) -> int:
        return int(self.D.shape[0])

    def resolvent(self) -> DiscreteOperator:
        """R = D / d."""
        return self.D / self.d


@dataclass(frozen=True)
class LambdaPath:
    """Piecewise-linear path through an ordered list of complex waypoints."""

    waypoints: tuple[complex, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        points = tuple(complex(w) for w in self.waypoints)
        if len(points) < 2:
            raise ValueError("A path needs at least 2 waypoints")
        for a, b in pairwise(points):
            if a == b:
                raise ValueError(f"Consecutive waypoints must differ, got {a} twice")
        if not all(cmath.isfinite(w) for w in points):
            raise ValueError("Waypoints must be finite")
        object.__setattr__(self, "waypoints", points)

    @classmethod
    def segment(cls, a: complex, b: complex) -> LambdaPath:
        return cls((a, b))

    @property
    def start(self) -> complex:
        return self.waypoints[0]

    @property
    def end(self) -> complex:
        return self.waypoints[-1]

    def segments(self) -> list[tuple[complex, complex]]:
        return list(pairwise(self.waypoints))

    def length(self) -> float:
        return sum(abs(b - a) for a, b in self.segments())

    def is_real(self) -> bool:
        return all(w.imag == 0.0 for w in self.waypoints)


XI_PATHS = (
    LambdaPath((0.0, 1.0)),
    LambdaPath((0.0, 0.5 + 0.5j, 1.0)),
    LambdaPath((0.0, 0.5 - 0.5j, 1.0)),
)


def consistency_residual(family: OperatorFamily, lam: complex, d: complex, D: Any) -> float:
    """max |D + f(λ) D - d I|."""
    f = family.evaluate(lam)
    eye = np.eye(family.dim, dtype=np.complex128)
    return float(np.max(np.abs(D + f @ D - d * eye)))


def resolvent_residuals(state: ImbeddingState, family: OperatorFamily) -> dict[str, float]:
    """Resolvent identities R + fR = I, R + Rf = I and the commutator [f, D].

    Returns:
        Dictionary with left, right (max-entry residuals of the two identities)
        and commutator (max |fD - Df| relative to 1 + max |fD|).
    """
    f = family.evaluate(state.lam)
    R = state.resolvent()
    eye = np.eye(state.dim, dtype=np.complex128)
    fD = f @ state.D
    return {
        "left": float(np.max(np.abs(R + f @ R - eye))),
        "right": float(np.max(np.abs(R + R @ f - eye))),
        "commutator": float(np.max(np.abs(fD - state.D @ f)) / (1.0 + np.max(np.abs(fD)))),
    }


def imbedding_rhs(
    state: ImbeddingState, family: OperatorFamily, singularity_threshold: float = 1e-10
) -> tuple[complex, DiscreteOperator]:
    """Right-hand side (d', D') of the imbedding equations at ``state``.

    Raises:
        SingularityError: if |d| <= singularity_threshold.
    """
    return _rhs(state.lam, state.d, state.D, family, singularity_threshold)


def _rhs(
    lam: complex, d: complex, D: DiscreteOperator, family: OperatorFamily, threshold: float
) -> tuple[complex, DiscreteOperator]:
    if abs(d) <= threshold:
        raise SingularityError(
            f"|d| = {abs(d):.3e} at lambda={lam} is below the singularity threshold",
            lam=lam,
            d=d,
        )
    fD = family.derivative(lam) @ D
    d_dot = complex(np.trace(fD))
    eye = np.eye(D.shape[0], dtype=np.complex128)
    D_dot = D @ (d_dot * eye - fD) / d
    return d_dot, D_dot


def _pack(d: complex, D: DiscreteOperator) -> npt.NDArray[np.complex128]:
    return np.concatenate(([d], D.ravel())).astype(np.complex128)


def _unpack(y: npt.NDArray[np.complex128], dim: int) -> tuple[complex, DiscreteOperator]:
    return complex(y[0]), y[1:].reshape(dim, dim)


def _iter_path(
    family: OperatorFamily, path: LambdaPath, init: ImbeddingState, cfg: IntegratorConfig
) -> Iterator[ImbeddingState]:
    if not cmath.isclose(init.lam, path.start, rel_tol=1e-12, abs_tol=1e-14):
        raise ValueError(f"Initial state at {init.lam} does not start the path at {path.start}")
    dim = family.dim
    if init.D.shape != (dim, dim):
        raise ValueError(f"Initial D has shape {init.D.shape}, expected {(dim, dim)}")
    residual = consistency_residual(family, init.lam, init.d, init.D)
    if residual >= cfg.consistency_tol:
        raise ValueError(
            f"Initial state residual {residual:.3e} exceeds consistency_tol {cfg.consistency_tol}"
        )
    yield replace(init, lam=path.start, residual=residual, waypoint=0)

    accepted = 0
    last_residual = residual

    def rhs(lam: complex, y: npt.NDArray[np.complex128]) -> npt.NDArray[np.complex128]:
        d, D = _unpack(y, dim)
        d_dot, D_dot = _rhs(lam, d, D, family, cfg.singularity_threshold)
        return _pack(d_dot, D_dot)

    def exact(lam: complex) -> npt.NDArray[np.complex128]:
        d, D = determinant_and_adjugate(family.evaluate(lam))
        return _pack(d, D)

    def post_step(
        lam: complex, y: npt.NDArray[np.complex128], step: float
    ) -> npt.NDArray[np.complex128]:
        nonlocal accepted, last_residual
        accepted += 1
        d, D = _unpack(y, dim)
        if abs(d) <= cfg.singularity_threshold:
            raise SingularityError(
                f"|d| = {abs(d):.3e} at lambda={lam} is below the singularity threshold",
                lam=lam,
                d=d,
            )
        if cfg.renormalize_every and accepted % cfg.renormalize_every == 0:
            y = exact(lam)
            d, D = _unpack(y, dim)
            logger.debug("Renormalized to the exact pair at lambda=%s", lam)
        last_residual = consistency_residual(family, lam, d, D)
        if last_residual >= cfg.consistency_tol:
            raise ConsistencyError(
                f"Residual {last_residual:.3e} at lambda={lam} exceeds consistency_tol "
                f"{cfg.consistency_tol:.1e}",
                lam=lam,
            )
        return y

    y0 = _pack(init.d, init.D)
    for index, (a, b) in enumerate(path.segments(), start=1):
        for sample in iter_segment(rhs, y0, a, b, cfg, post_step):
            d, D = _unpack(sample.y, dim)
            yield ImbeddingState(
                lam=sample.lam,
                d=d,
                D=D,
                residual=last_residual,
                step_size=sample.step,
                waypoint=index if sample.lam == b else None,
            )
            y0 = sample.y


def integrate_path(
    family: OperatorFamily, path: LambdaPath, init: ImbeddingState, cfg: IntegratorConfig
) -> list[ImbeddingState]:
    """Integrate (d, D) along ``path`` from ``init``.

    Returns every accepted state, starting with ``init`` and ending at the
    last waypoint. States that sit on a waypoint carry its index.

    Raises:
        SingularityError: when |d| dips below the threshold; ``last_state``
            holds the last accepted state.
        StepSizeError: when adaptive stepping stalls.
    """
    states: list[ImbeddingState] = []
    try:
        for state in _iter_path(family, path, init, cfg):
            states.append(state)
    except SingularityError as err:
        err.last_state = states[-1] if states else None
        raise
    return states


def detour_path(
    a: complex,
    b: complex,
    center: complex,
    radius: float,
    n_arc: int = 32,
    upper: bool = True,
) -> LambdaPath:
    """Straight path a -> b that bypasses ``center`` on a semicircle of ``radius``.

    ``upper`` takes the arc on the left of the direction of travel.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    u = (complex(b) - complex(a)) / abs(complex(b) - complex(a))
    sign = 1.0 if upper else -1.0
    thetas = np.linspace(math.pi, 0.0, n_arc + 1) * sign
    arc = [complex(center) + radius * u * cmath.exp(1j * t) for t in thetas]
    points: list[complex] = [complex(a)]
    for p in [*arc, complex(b)]:
        if p != points[-1]:
            points.append(p)
    return LambdaPath(tuple(points))


def march(
    family: OperatorFamily,
    path: LambdaPath,
    init: ImbeddingState,
    cfg: IntegratorConfig,
    max_detours: int = 8,
) -> list[ImbeddingState]:
    """:func:`integrate_path` with semicircular detours around zeros of d.

    When the march stalls at a zero of d the zero is estimated by a Newton
    step from the last accepted state. The path then bypasses it on a
    semicircle of ``cfg.detour_radius``, or 10x the last step by default.
    Waypoint indices refer to ``path``.
    """
    states: list[ImbeddingState] = []
    todo = list(path.waypoints[1:])
    current = init
    detours = 0
    while True:
        sub = LambdaPath((current.lam, *todo))
        reached = 0
        try:
            for state in _iter_path(family, sub, current, cfg):
                if state.waypoint == 0 and states:
                    continue
                states.append(state)
                if state.waypoint is not None:
                    reached = state.waypoint
            break
        except SingularityError as err:
            last = states[-1] if states else None
            err.last_state = last
            if last is None or detours >= max_detours:
                raise
            detours += 1
            target = sub.waypoints[reached + 1]
            d_dot, _ = _rhs(last.lam, last.d, last.D, family, 0.0)
            center = last.lam - last.d / d_dot if d_dot != 0 else complex(err.lam or last.lam)
            radius = cfg.detour_radius or 10.0 * max(last.step_size, 1e-6 * (1.0 + abs(center)))
            logger.info("Detouring around zero of d near lambda=%s (radius %.3g)", center, radius)
            detour = detour_path(last.lam, target, center, radius)
            todo = [*detour.waypoints[1:], *sub.waypoints[reached + 2:]]
            current = last

    out: list[ImbeddingState] = []
    k = 0
    for state in states:
        label = None
        if k < len(path.waypoints) and state.lam == path.waypoints[k]:
            label = k
            k += 1
        out.append(replace(state, waypoint=label))
    return out


def initialize_at(
    family: OperatorFamily,
    lambda0: complex,
    cfg: IntegratorConfig,
    xi_path: LambdaPath | None = None,
) -> ImbeddingState:
    """Initial values (d, D) at ``lambda0`` via imbedding in ξ.

    The auxiliary family ξ·f(λ0) starts from d = 1, D = I at ξ = 0 and is
    integrated to ξ = 1 along ``xi_path`` (the real segment by default).

    Raises:
        SingularityError: if d(ξ, λ0) vanishes along the ξ-path.
    """
    f0 = family.evaluate(lambda0)
    eye = np.eye(family.dim, dtype=np.complex128)
    if not np.any(f0):
        return ImbeddingState(lam=complex(lambda0), d=1.0 + 0j, D=eye)
    path = xi_path or XI_PATHS[0]
    if path.start != 0 or path.end != 1:
        raise ValueError(f"ξ-path must run from 0 to 1, got {path.start} -> {path.end}")
    aux = OperatorFamily.linear(f0)
    try:
        trajectory = integrate_path(aux, path, ImbeddingState(lam=0j, d=1.0 + 0j, D=eye), cfg)
    except SingularityError as err:
        raise SingularityError(
            f"d(xi, lambda0) vanished at xi={err.lam} while initializing at lambda0={lambda0}",
            lam=lambda0,
            d=err.d,
        ) from err
    final = trajectory[-1]
    return ImbeddingState(
        lam=complex(lambda0),
        d=final.d,
        D=final.D,
        residual=final.residual,
        step_size=final.step_size,
    )


def bootstrap_state(
    family: OperatorFamily, lambda0: complex, cfg: IntegratorConfig
) -> ImbeddingState:
    """:func:`initialize_at`, retrying along complex ξ-paths when ξ ∈ [0, 1] hits a zero.

    A path whose states drift past ``consistency_tol`` near a zero is retried the same way.
    """
    error: SingularityError | ConsistencyError | None = None
    for xi_path in XI_PATHS:
        try:
            return initialize_at(family, lambda0, cfg, xi_path=xi_path)
        except (SingularityError, ConsistencyError) as err:
            logger.debug("ξ-path %s failed at lambda0=%s: %s", xi_path.waypoints, lambda0, err)
            error = err
    assert error is not None
    raise error


def solve(
    state: ImbeddingState,
    phi: Sequence[complex] | npt.NDArray[Any],
    cfg: IntegratorConfig | None = None,
    family: OperatorFamily | None = None,
) -> npt.NDArray[np.complex128]:
    """ψ = (1/d) D φ.

    With ``family`` given the residual ‖(I + f)ψ - φ‖∞ is checked against
    ``consistency_tol``·‖φ‖∞.

    Raises:
        SingularityError: at |d| <= singularity_threshold.
        ConsistencyError: if the residual check fails.
    """
    cfg = cfg or IntegratorConfig()
    if abs(state.d) <= cfg.singularity_threshold:
        raise SingularityError(
            f"Cannot solve at lambda={state.lam}: |d| = {abs(state.d):.3e}",
            lam=state.lam,
            d=state.d,
        )
    vec = np.asarray(phi, dtype=np.complex128)
    if vec.shape != (state.dim,):
        raise ValueError(f"phi must have length {state.dim}, got shape {vec.shape}")
    psi = state.D @ vec / state.d
    if family is not None:
        lhs = psi + family.evaluate(state.lam) @ psi
        residual = float(np.max(np.abs(lhs - vec), initial=0.0))
        if residual > cfg.consistency_tol * float(np.max(np.abs(vec), initial=0.0)):
            raise ConsistencyError(
                f"Solve residual {residual:.3e} at lambda={state.lam} exceeds tolerance",
                lam=state.lam,
            )
    return psi


def extract_eigenvector(D: Any) -> npt.NDArray[np.complex128]:
    """Largest-norm column of D, unit length, largest entry real positive.

    Ties between columns go to the lowest index.
    """
    arr = as_operator(D)
    norms = np.linalg.norm(arr, axis=0)
    j = int(np.argmax(norms))
    if norms[j] == 0:
        raise ValueError("D vanishes identically; no eigenvector to extract")
    v = arr[:, j] / norms[j]
    k = int(np.argmax(np.abs(v)))
    return v * (np.conj(v[k]) / abs(v[k]))


def find_eigenvalues(
    family: OperatorFamily,
    scan: LambdaPath,
    cfg: IntegratorConfig,
    refine_tol: float,
    init: ImbeddingState | None = None,
) -> list[tuple[complex, npt.NDArray[np.complex128]]]:
    """Locate zeros of d(λ) along ``scan`` and return (λ_i, eigenvector) pairs.

    Adaptive steps along the scan are capped at 1/SCAN_RESOLUTION of its
    length so neighbouring zeros are not stepped over. On real scans with
    real d, sign changes of d are refined by bisection.
    Otherwise local minima of |d| are tested with the argument principle
    on shrinking circles.

    Raises:
        NoBracketError: when no zero is detected.
    """
    if refine_tol <= 0:
        raise ValueError(f"refine_tol must be positive, got {refine_tol}")
    fine = replace(
        cfg, singularity_threshold=min(cfg.singularity_threshold, 1e-3 * refine_tol)
    )
    start = init or bootstrap_state(family, scan.start, cfg)
    scan_cfg = replace(cfg, max_step=min(cfg.max_step, scan.length() / SCAN_RESOLUTION))
    trajectory = march(family, scan, start, scan_cfg)

    roots: list[ImbeddingState] = []
    if scan.is_real() and _is_real_valued(trajectory):
        on_axis = [s for s in trajectory if s.lam.imag == 0.0]
        for left, right in pairwise(on_axis):
            if abs(right.d) < refine_tol:
                roots.append(right)
            elif np.sign(left.d.real) * np.sign(right.d.real) < 0:
                roots.append(_bisect_zero(family, left, right.lam.real, fine, refine_tol))
    else:
        moduli = [abs(s.d) for s in trajectory]
        for i in range(1, len(trajectory) - 1):
            if moduli[i] < moduli[i - 1] and moduli[i] <= moduli[i + 1]:
                try:
                    roots.append(_contour_zero(family, trajectory, i, fine, refine_tol))
                except NoBracketError:
                    continue

    unique: list[ImbeddingState] = []
    for state in roots:
        if all(abs(state.lam - u.lam) > 1e-7 * (1.0 + abs(u.lam)) for u in unique):
            unique.append(state)
    if not unique:
        raise NoBracketError(f"No zero of d(lambda) detected along {scan.waypoints}")
    for state in unique:
        logger.info("Eigenvalue lambda=%s with |d|=%.2e", state.lam, abs(state.d))
    return [(s.lam, extract_eigenvector(s.D)) for s in unique]


def _is_real_valued(trajectory: list[ImbeddingState]) -> bool:
    scale = max(1.0, max(abs(s.d) for s in trajectory))
    return all(abs(s.d.imag) <= 1e-8 * scale for s in trajectory if s.lam.imag == 0.0)


def _state_at(
    family: OperatorFamily, origin: ImbeddingState, target: complex, cfg: IntegratorConfig
) -> ImbeddingState:
    # triangular path through the upper half plane keeps clear of real zeros
    a, b = origin.lam, complex(target)
    apex = 0.5 * (a + b) + 0.5j * abs(b - a)
    return integrate_path(family, LambdaPath((a, apex, b)), origin, cfg)[-1]


def _bisect_zero(
    family: OperatorFamily,
    left: ImbeddingState,
    right: float,
    cfg: IntegratorConfig,
    refine_tol: float,
) -> ImbeddingState:
    # every midpoint integrates from the bracket's left state, where |d| is not small
    a, b = left.lam.real, right
    sign_a = np.sign(left.d.real)
    mid_state = left
    for _ in range(200):
        m = 0.5 * (a + b)
        mid_state = replace(_state_at(family, left, m, cfg), lam=complex(m))
        logger.debug("Bisection lambda=%.16g |d|=%.3e", m, abs(mid_state.d))
        if abs(mid_state.d) < refine_tol:
            return mid_state
        if np.sign(mid_state.d.real) == sign_a:
            a = m
        else:
            b = m
        if abs(b - a) <= 4 * np.finfo(float).eps * (1.0 + abs(m)):
            break
    logger.warning("Bisection stopped at lambda=%s with |d|=%.3e", mid_state.lam, abs(mid_state.d))
    return mid_state


def _approach(
    family: OperatorFamily, origin: ImbeddingState, target: complex, cfg: IntegratorConfig
) -> ImbeddingState:
    # a march that hits the threshold just short of the zero ends at its last state
    try:
        return integrate_path(family, LambdaPath.segment(origin.lam, target), origin, cfg)[-1]
    except SingularityError as err:
        if err.last_state is None:
            raise
        logger.debug("Threshold reached within one step of lambda=%s", target)
        return err.last_state


def _contour_zero(
    family: OperatorFamily,
    trajectory: list[ImbeddingState],
    index: int,
    cfg: IntegratorConfig,
    refine_tol: float,
    n_points: int = 64,
    max_rounds: int = 12,
) -> ImbeddingState:
    start = trajectory[index]
    spacing = max(abs(trajectory[index + 1].lam - start.lam),
                  abs(trajectory[index - 1].lam - start.lam))
    d_dot, _ = _rhs(start.lam, start.d, start.D, family, 0.0)
    center = start.lam - start.d / d_dot if d_dot != 0 else start.lam
    radius = max(2.0 * abs(start.lam - center), spacing)
    u = (start.lam - center) / abs(start.lam - center) if start.lam != center else 1.0 + 0j
    rim = _approach(family, start, center + radius * u, cfg)
    located = rim
    for _ in range(max_rounds):
        theta0 = cmath.phase(rim.lam - center)
        thetas = theta0 + 2 * math.pi * np.arange(n_points + 1) / n_points
        circle = [rim.lam, *(center + radius * cmath.exp(1j * t) for t in thetas[1:-1]), rim.lam]
        states = integrate_path(family, LambdaPath(tuple(circle)), rim, cfg)
        phases = np.unwrap(np.angle([s.d for s in states]))
        winding = int(round((phases[-1] - phases[0]) / (2 * math.pi)))
        if winding == 0:
            raise NoBracketError(f"No zero inside the circle |lambda - {center}| = {radius:.3g}")
        if winding > 1:
            logger.warning("Circle around %s encloses %d zeros; using their centroid", center,
                           winding)
        # (1/2πi)∮ λ d'/d dλ by the trapezoid rule over the circle's vertices
        vertices = [s for s in states if s.waypoint is not None]
        g = np.array([
            s.lam * np.trace(family.derivative(s.lam) @ s.D) / s.d for s in vertices
        ])
        lams = np.array([s.lam for s in vertices])
        moment = np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(lams))
        new_center = complex(moment / (2j * math.pi * winding))
        radius /= 8.0
        edge = vertices[-1]
        u = (edge.lam - new_center) / abs(edge.lam - new_center)
        rim = integrate_path(
            family, LambdaPath.segment(edge.lam, new_center + radius * u), edge, cfg
        )[-1]
        located = _approach(family, rim, new_center, cfg)
        center = new_center
        if abs(located.d) < refine_tol:
            return located
    logger.warning("Contour refinement stopped at lambda=%s with |d|=%.3e", located.lam,
                   abs(located.d))
    return located
