"""Runge-Kutta drivers along straight segments of the complex plane.

A segment from ``lam_a`` to ``lam_b`` is parametrized as
lam = lam_a + t (lam_b - lam_a), t in [0, 1], so a complex-valued ODE
in lam becomes a real-time ODE in t with complex state. The adaptive
driver steps scipy's Dormand-Prince ``RK45`` one accepted step at a time
so callers can inspect, restart or abort between steps.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy.integrate import RK45

from imbed_toolkit.errors import StepSizeError

logger = logging.getLogger(__name__)

ComplexVector = npt.NDArray[np.complex128]
RightHandSide = Callable[[complex, ComplexVector], ComplexVector]
PostStep = Callable[[complex, ComplexVector, float], ComplexVector]

METHODS = ("rk45", "rk4")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings.

    Attributes:
        method: ``"rk45"`` (adaptive Dormand-Prince) or ``"rk4"`` (fixed step).
        steps_per_segment: Number of RK4 steps per path segment.
        rtol: Relative tolerance of the adaptive method.
        atol: Absolute tolerance of the adaptive method.
        min_step: Smallest accepted |Δλ| before the adaptive march is declared stalled.
        max_step: Largest |Δλ| the adaptive method may take.
        singularity_threshold: Abort when |d| falls to or below this value.
        consistency_tol: Bound on max|D + f D - d I| for every returned state.
        renormalize_every: Replace the state by the exact pair every N steps (0 = never).
        detour_radius: Radius of automatic contour detours (None = 10x the last step).
    """

    method: str = "rk45"
    steps_per_segment: int = 100
    rtol: float = 1e-8
    atol: float = 1e-10
    min_step: float = 1e-12
    max_step: float = math.inf
    singularity_threshold: float = 1e-10
    consistency_tol: float = 1e-6
    renormalize_every: int = 0
    detour_radius: float | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.steps_per_segment < 1:
            raise ValueError(f"steps_per_segment must be >= 1, got {self.steps_per_segment}")
        for name in ("rtol", "atol", "min_step", "max_step", "singularity_threshold",
                     "consistency_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.renormalize_every < 0:
            raise ValueError(f"renormalize_every must be >= 0, got {self.renormalize_every}")
        if self.detour_radius is not None and not self.detour_radius > 0:
            raise ValueError(f"detour_radius must be positive, got {self.detour_radius}")

    @classmethod
    def rk4_fixed(cls, steps_per_segment: int, **kwargs: Any) -> IntegratorConfig:
        return cls(method="rk4", steps_per_segment=steps_per_segment, **kwargs)

    @classmethod
    def rk45_adaptive(
        cls, rtol: float = 1e-8, atol: float = 1e-10, min_step: float = 1e-12, **kwargs: Any
    ) -> IntegratorConfig:
        return cls(method="rk45", rtol=rtol, atol=atol, min_step=min_step, **kwargs)


@dataclass(frozen=True)
class Sample:
    """Accepted step: position, state vector and |Δλ| of the step."""

    lam: complex
    y: ComplexVector
    step: float


def iter_segment(
    rhs: RightHandSide,
    y0: ComplexVector,
    lam_a: complex,
    lam_b: complex,
    cfg: IntegratorConfig,
    post_step: PostStep | None = None,
) -> Iterator[Sample]:
    """Yield accepted samples from lam_a to lam_b (lam_a itself excluded).

    ``post_step`` sees each accepted state and returns the state to
    continue from; returning a different array restarts the stepper there.
    The last sample lies exactly at ``lam_b``.
    """
    if lam_a == lam_b:
        raise ValueError("Segment endpoints must be distinct")
    if cfg.method == "rk4":
        yield from _iter_rk4(rhs, y0, complex(lam_a), complex(lam_b), cfg, post_step)
    else:
        yield from _iter_rk45(rhs, y0, complex(lam_a), complex(lam_b), cfg, post_step)


def _iter_rk4(
    rhs: RightHandSide,
    y0: ComplexVector,
    lam_a: complex,
    lam_b: complex,
    cfg: IntegratorConfig,
    post_step: PostStep | None,
) -> Iterator[Sample]:
    span = lam_b - lam_a
    n = cfg.steps_per_segment
    h = 1.0 / n
    y = np.array(y0, dtype=np.complex128)

    def fun(t: float, state: ComplexVector) -> ComplexVector:
        return span * rhs(lam_a + t * span, state)

    for i in range(n):
        t = i * h
        k1 = fun(t, y)
        k2 = fun(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = fun(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = fun(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        lam = lam_b if i == n - 1 else lam_a + (i + 1) * h * span
        if post_step is not None:
            y = post_step(lam, y, h * abs(span))
        yield Sample(lam=lam, y=y.copy(), step=h * abs(span))


def _iter_rk45(
    rhs: RightHandSide,
    y0: ComplexVector,
    lam_a: complex,
    lam_b: complex,
    cfg: IntegratorConfig,
    post_step: PostStep | None,
) -> Iterator[Sample]:
    span = lam_b - lam_a
    length = abs(span)

    def fun(t: float, state: ComplexVector) -> ComplexVector:
        return span * rhs(lam_a + t * span, state)

    def start(t0: float, state: ComplexVector) -> RK45:
        return RK45(
            fun, t0, np.array(state, dtype=np.complex128), 1.0,
            rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step / length,
        )

    solver = start(0.0, y0)
    while solver.status == "running":
        t_prev = solver.t
        message = solver.step()
        lam = lam_a + solver.t * span
        if solver.status == "failed":
            raise StepSizeError(
                f"Adaptive step failed at lambda={lam}: {message}",
                lam=lam,
                step=abs(solver.t - t_prev) * length,
            )
        step = (solver.t - t_prev) * length
        finished = solver.status == "finished"
        if finished:
            lam = lam_b
        elif step < cfg.min_step:
            raise StepSizeError(
                f"Step size {step:.3e} below min_step {cfg.min_step:.3e} at lambda={lam}",
                lam=lam,
                step=step,
            )
        y = solver.y
        if post_step is not None:
            replaced = post_step(lam, y, step)
            if replaced is not y and not finished:
                logger.debug("Restarting RK45 at lambda=%s", lam)
                solver = start(solver.t, replaced)
            y = replaced
        yield Sample(lam=lam, y=np.array(y, copy=True), step=step)
