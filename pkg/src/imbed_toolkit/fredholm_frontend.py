"""Nyström front end for Fredholm equations ψ(x) = λ∫K(x,y)ψ(y)dy + φ(x) on [a, b].

A kernel sampled on a quadrature grid becomes the operator family
f(λ) = -λ K W (W the diagonal weight matrix), so d(λ) = det(I - λKW).
The classical imbedding equations for d(λ) and D(x, y, λ) are integrated
here on the same grid as an independent cross-check of the generalized
engine.
"""

from __future__ import annotations

import cmath
import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from imbed_toolkit.errors import DomainMismatchError, SingularityError
from imbed_toolkit.imbedding_engine import (
    ImbeddingState,
    IntegratorConfig,
    LambdaPath,
    OperatorFamily,
    bootstrap_state,
    integrate_path,
    solve,
)
from imbed_toolkit.integrators import iter_segment
from imbed_toolkit.operator_core import DiscreteOperator

logger = logging.getLogger(__name__)

RealVector = npt.NDArray[np.float64]
ScalarFunction = Callable[[RealVector], RealVector]

KERNEL_KINDS = ("separable", "builtin", "tabulated")
BUILTIN_KERNELS = ("zero", "product_xy", "sine_product", "exponential_absdiff")
QUADRATURE_RULES = ("gauss_legendre", "trapezoid")


def builtin_function(name: str, **params: float) -> ScalarFunction:
    """Named one-variable function, vectorized over numpy arrays.

    ``constant(c)``, ``power(p)``, ``sin_pi(n)`` = sin(nπx),
    ``cos_pi(n)`` = cos(nπx) and ``exp(c)`` = exp(cx).
    """
    for key, value in params.items():
        if not math.isfinite(value):
            raise ValueError(f"Parameter {key} of {name} must be finite, got {value}")
    if name == "constant":
        c = params.get("c", 1.0)
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    if name == "power":
        p = params.get("p", 1.0)
        return lambda x: np.asarray(x, dtype=float) ** p
    if name == "sin_pi":
        n = params.get("n", 1.0)
        return lambda x: np.sin(n * np.pi * np.asarray(x, dtype=float))
    if name == "cos_pi":
        n = params.get("n", 1.0)
        return lambda x: np.cos(n * np.pi * np.asarray(x, dtype=float))
    if name == "exp":
        c = params.get("c", 1.0)
        return lambda x: np.exp(c * np.asarray(x, dtype=float))
    raise ValueError(f"Unknown builtin function {name!r}")


@dataclass(frozen=True)
class FunctionSpec:
    """A builtin function by name plus its parameters."""

    name: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        builtin_function(self.name, **self.params)

    def __call__(self, x: Any) -> RealVector:
        return builtin_function(self.name, **self.params)(x)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Continuous kernel K(x, y) on the square [a, b]².

    Attributes:
        kind: ``"separable"``, ``"builtin"`` or ``"tabulated"``.
        a: Left domain endpoint.
        b: Right domain endpoint.
        name: Builtin kernel name (builtin kind only).
        params: Builtin kernel parameters.
        factors: (u_i, v_i) pairs of K = Σ u_i(x) v_i(y) (separable kind only).
        x_nodes: Tabulation nodes in x (tabulated kind only).
        y_nodes: Tabulation nodes in y.
        values: Table of K(x_nodes[i], y_nodes[j]).
    """

    kind: str
    a: float = 0.0
    b: float = 1.0
    name: str | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    factors: tuple[tuple[FunctionSpec, FunctionSpec], ...] = ()
    x_nodes: RealVector | None = None
    y_nodes: RealVector | None = None
    values: RealVector | None = None

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"Kernel kind must be one of {KERNEL_KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or not self.a < self.b:
            raise ValueError(f"Kernel domain needs finite a < b, got [{self.a}, {self.b}]")
        for key, value in self.params.items():
            if not math.isfinite(value):
                raise ValueError(f"Kernel parameter {key} must be finite, got {value}")
        if self.kind == "builtin" and self.name not in BUILTIN_KERNELS:
            raise ValueError(f"Builtin kernel must be one of {BUILTIN_KERNELS}, got {self.name!r}")
        if self.kind == "separable" and not self.factors:
            raise ValueError("Separable kernel needs at least one factor pair")
        if self.kind == "tabulated":
            self._check_table()

    def _check_table(self) -> None:
        if self.x_nodes is None or self.y_nodes is None or self.values is None:
            raise ValueError("Tabulated kernel needs x_nodes, y_nodes and values")
        x, y, table = self.x_nodes, self.y_nodes, self.values
        if table.shape != (x.size, y.size):
            raise ValueError(f"Table shape {table.shape} does not match nodes {(x.size, y.size)}")
        for label, nodes in (("x", x), ("y", y)):
            if nodes.size < 2 or np.any(np.diff(nodes) <= 0):
                raise ValueError(f"Tabulated {label}-nodes must be strictly increasing")
            if nodes[0] > self.a or nodes[-1] < self.b:
                raise ValueError(f"Tabulated {label}-nodes do not cover [{self.a}, {self.b}]")
        if not np.all(np.isfinite(table)):
            raise ValueError("Tabulated kernel values must be finite")

    @classmethod
    def builtin(cls, name: str, a: float = 0.0, b: float = 1.0, **params: float) -> KernelSpec:
        return cls(kind="builtin", a=a, b=b, name=name, params=dict(params))

    @classmethod
    def separable(
        cls,
        factors: Sequence[tuple[FunctionSpec, FunctionSpec]],
        a: float = 0.0,
        b: float = 1.0,
    ) -> KernelSpec:
        return cls(kind="separable", a=a, b=b, factors=tuple(factors))

    @classmethod
    def tabulated(
        cls,
        x_nodes: Sequence[float],
        y_nodes: Sequence[float],
        values: Any,
        a: float | None = None,
        b: float | None = None,
    ) -> KernelSpec:
        """Table of K values, bilinearly interpolated; the domain defaults to the x extent."""
        x = np.asarray(x_nodes, dtype=float)
        y = np.asarray(y_nodes, dtype=float)
        return cls(
            kind="tabulated",
            a=float(x[0]) if a is None else a,
            b=float(x[-1]) if b is None else b,
            x_nodes=x,
            y_nodes=y,
            values=np.asarray(values, dtype=float),
        )

    @classmethod
    def from_csv(
        cls, path: str | Path, a: float | None = None, b: float | None = None
    ) -> KernelSpec:
        """Load a tabulated kernel: header row of y-nodes, first column of x-nodes."""
        frame = pd.read_csv(path, index_col=0)
        try:
            y = frame.columns.astype(float).to_numpy()
            x = frame.index.astype(float).to_numpy()
        except (TypeError, ValueError) as exc:
            raise ValueError(f"Kernel table {path} has non-numeric node labels") from exc
        return cls.tabulated(x, y, frame.to_numpy(dtype=float), a=a, b=b)

    @property
    def domain(self) -> tuple[float, float]:
        return (self.a, self.b)

    def evaluate(self, x: Any, y: Any) -> RealVector:
        """Matrix K(x_i, y_j) for node vectors ``x`` and ``y``."""
        xs = np.asarray(x, dtype=float).reshape(-1)
        ys = np.asarray(y, dtype=float).reshape(-1)
        if self.kind == "separable":
            out = np.zeros((xs.size, ys.size))
            for u, v in self.factors:
                out += np.outer(u(xs), v(ys))
            return out
        if self.kind == "tabulated":
            interp = RegularGridInterpolator(
                (self.x_nodes, self.y_nodes), self.values, method="linear"
            )
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            return np.asarray(interp(np.stack([X.ravel(), Y.ravel()], axis=-1))).reshape(
                xs.size, ys.size
            )
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        if self.name == "zero":
            return np.zeros_like(X)
        if self.name == "product_xy":
            return X * Y
        if self.name == "sine_product":
            n = self.params.get("n", 1.0)
            return np.sin(n * np.pi * X) * np.sin(n * np.pi * Y)
        c = self.params.get("c", 1.0)
        return np.exp(-c * np.abs(X - Y))

    def is_symmetric(self, grid: QuadratureGrid) -> bool:
        K = self.evaluate(grid.nodes, grid.nodes)
        return bool(np.allclose(K, K.T, rtol=0.0, atol=1e-14))


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Quadrature nodes and positive weights on [a, b]."""

    nodes: RealVector
    weights: RealVector
    rule: str
    a: float
    b: float

    def __post_init__(self) -> None:
        if self.rule not in QUADRATURE_RULES:
            raise ValueError(f"Quadrature rule must be one of {QUADRATURE_RULES}")
        nodes, weights = self.nodes, self.weights
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size < 1:
            raise ValueError("Nodes and weights must be non-empty vectors of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("Quadrature nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("Quadrature weights must be positive")
        if nodes[0] < self.a or nodes[-1] > self.b:
            raise ValueError(f"Quadrature nodes must lie in [{self.a}, {self.b}]")
        total = float(np.sum(weights))
        if abs(total - (self.b - self.a)) > 1e-12 * max(1.0, self.b - self.a):
            raise ValueError(f"Weights sum to {total!r}, expected {self.b - self.a!r}")

    @classmethod
    def gauss_legendre(cls, n: int, a: float = 0.0, b: float = 1.0) -> QuadratureGrid:
        if n < 1:
            raise ValueError(f"Gauss-Legendre needs n >= 1, got {n}")
        if not a < b:
            raise ValueError(f"Grid needs a < b, got [{a}, {b}]")
        t, w = np.polynomial.legendre.leggauss(n)
        half = 0.5 * (b - a)
        return cls(nodes=half * t + 0.5 * (a + b), weights=half * w, rule="gauss_legendre",
                   a=a, b=b)

    @classmethod
    def trapezoid(cls, n: int, a: float = 0.0, b: float = 1.0) -> QuadratureGrid:
        if n < 2:
            raise ValueError(f"Trapezoid rule needs n >= 2, got {n}")
        if not a < b:
            raise ValueError(f"Grid needs a < b, got [{a}, {b}]")
        nodes = np.linspace(a, b, n)
        h = (b - a) / (n - 1)
        weights = np.full(n, h)
        weights[[0, -1]] = 0.5 * h
        return cls(nodes=nodes, weights=weights, rule="trapezoid", a=a, b=b)

    @classmethod
    def from_rule(cls, rule: str, n: int, a: float = 0.0, b: float = 1.0) -> QuadratureGrid:
        if rule == "gauss_legendre":
            return cls.gauss_legendre(n, a, b)
        if rule == "trapezoid":
            return cls.trapezoid(n, a, b)
        raise ValueError(f"Quadrature rule must be one of {QUADRATURE_RULES}, got {rule!r}")

    @property
    def size(self) -> int:
        return int(self.nodes.size)


@dataclass(frozen=True)
class ClassicalState:
    """d(λ) and the samples D(x_i, y_j, λ) of the classical march."""

    lam: complex
    d: complex
    Dmat: DiscreteOperator


@dataclass(frozen=True)
class CorrespondenceReport:
    """Agreement between the classical and generalized paths at one λ.

    Attributes:
        kernel_residual: max |D_classical - K W D̂ W^{-1}|.
        determinant_residual: |d_classical - d_general|.
        resolvent_residual: max |R_classical + f'(λ) R̂ W^{-1}| with R = D/d.
    """

    lam: complex
    d_classical: complex
    d_general: complex
    kernel_residual: float
    determinant_residual: float
    resolvent_residual: float

    @property
    def max_residual(self) -> float:
        return max(self.kernel_residual, self.determinant_residual, self.resolvent_residual)


def _check_domain(kernel: KernelSpec, grid: QuadratureGrid) -> None:
    if not (math.isclose(kernel.a, grid.a, abs_tol=1e-14)
            and math.isclose(kernel.b, grid.b, abs_tol=1e-14)):
        raise DomainMismatchError(
            f"Kernel domain [{kernel.a}, {kernel.b}] differs from grid [{grid.a}, {grid.b}]"
        )


def discretize(
    kernel: KernelSpec, grid: QuadratureGrid, symmetrize: bool = False
) -> OperatorFamily:
    """Nyström family f(λ)[i, j] = -λ K(x_i, x_j) w_j.

    With ``symmetrize`` the weights are split as -λ √w_i K(x_i, x_j) √w_j,
    which is similar to the one-sided form and symmetric for symmetric K.

    Raises:
        DomainMismatchError: if kernel and grid domains differ.
    """
    _check_domain(kernel, grid)
    K = kernel.evaluate(grid.nodes, grid.nodes)
    if symmetrize:
        root = np.sqrt(grid.weights)
        slope = -(root[:, None] * K * root[None, :])
    else:
        slope = -(K * grid.weights[None, :])
    return OperatorFamily.linear(slope)


def _classical_rhs(
    lam: complex, y: npt.NDArray[np.complex128], weights: RealVector, threshold: float
) -> npt.NDArray[np.complex128]:
    n = weights.size
    d = complex(y[0])
    Dmat = y[1:].reshape(n, n)
    if abs(d) <= threshold:
        raise SingularityError(
            f"|d| = {abs(d):.3e} at lambda={lam} is below the singularity threshold",
            lam=lam,
            d=d,
        )
    d_dot = -complex(np.sum(np.diag(Dmat) * weights))
    D_dot = Dmat * (d_dot / d) + (Dmat * weights[None, :]) @ Dmat / d
    return np.concatenate(([d_dot], D_dot.ravel()))


def classical_imbedding_march(
    kernel: KernelSpec,
    grid: QuadratureGrid,
    lambda_end: complex,
    cfg: IntegratorConfig,
) -> list[ClassicalState]:
    """Integrate d' = -∫D(x,x)dx and D' = D d'/d + ∫D(x,z)D(z,y)dz / d from λ = 0.

    Starts from d(0) = 1 and D(x, y, 0) = K(x, y); integrals use the grid
    weights. The first returned state is λ = 0.

    Raises:
        SingularityError: when |d| falls to the singularity threshold.
    """
    if not cmath.isfinite(complex(lambda_end)):
        raise ValueError(f"lambda_end must be finite, got {lambda_end}")
    _check_domain(kernel, grid)
    K = kernel.evaluate(grid.nodes, grid.nodes).astype(np.complex128)
    states = [ClassicalState(lam=0j, d=1.0 + 0j, Dmat=K)]
    if lambda_end == 0:
        return states
    n = grid.size
    weights = grid.weights
    threshold = cfg.singularity_threshold

    def rhs(lam: complex, y: npt.NDArray[np.complex128]) -> npt.NDArray[np.complex128]:
        return _classical_rhs(lam, y, weights, threshold)

    def post_step(
        lam: complex, y: npt.NDArray[np.complex128], step: float
    ) -> npt.NDArray[np.complex128]:
        if abs(y[0]) <= threshold:
            raise SingularityError(
                f"|d| = {abs(y[0]):.3e} at lambda={lam} is below the singularity threshold",
                lam=lam,
                d=complex(y[0]),
            )
        return y

    y0 = np.concatenate(([1.0 + 0j], K.ravel()))
    try:
        for sample in iter_segment(rhs, y0, 0j, complex(lambda_end), cfg, post_step):
            states.append(
                ClassicalState(lam=sample.lam, d=complex(sample.y[0]),
                               Dmat=sample.y[1:].reshape(n, n))
            )
    except SingularityError as err:
        err.last_state = states[-1]
        raise
    return states


def correspondence_check(
    kernel: KernelSpec,
    grid: QuadratureGrid,
    lam: complex,
    cfg: IntegratorConfig,
) -> CorrespondenceReport:
    """Run the classical march and the generalized engine on one discretization and compare.

    Raises:
        SingularityError: propagated from either march.
    """
    family = discretize(kernel, grid)
    classical = classical_imbedding_march(kernel, grid, lam, cfg)[-1]
    eye = np.eye(grid.size, dtype=np.complex128)
    general = ImbeddingState(lam=0j, d=1.0 + 0j, D=eye)
    if lam != 0:
        general = integrate_path(family, LambdaPath.segment(0j, lam), general, cfg)[-1]

    w = grid.weights
    KW = kernel.evaluate(grid.nodes, grid.nodes) * w[None, :]
    mapped = (KW @ general.D) / w[None, :]
    resolvent = -(family.derivative(lam) @ general.resolvent()) / w[None, :]
    report = CorrespondenceReport(
        lam=complex(lam),
        d_classical=classical.d,
        d_general=general.d,
        kernel_residual=float(np.max(np.abs(classical.Dmat - mapped))),
        determinant_residual=abs(classical.d - general.d),
        resolvent_residual=float(np.max(np.abs(classical.Dmat / classical.d - resolvent))),
    )
    logger.debug("Correspondence at lambda=%s: max residual %.3e", lam, report.max_residual)
    return report


def sample_phi(phi: Any, grid: QuadratureGrid) -> npt.NDArray[np.complex128]:
    """φ at the grid nodes; callables are evaluated, vectors are checked for length."""
    values = phi(grid.nodes) if callable(phi) else phi
    vec = np.asarray(values, dtype=np.complex128).reshape(-1)
    if vec.size == 1 and grid.size > 1:
        vec = np.full(grid.size, vec[0])
    if vec.size != grid.size:
        raise ValueError(f"phi has {vec.size} samples, grid has {grid.size} nodes")
    return vec


def solve_fredholm(
    kernel: KernelSpec,
    grid: QuadratureGrid,
    lam: complex,
    phi: Any,
    cfg: IntegratorConfig,
) -> npt.NDArray[np.complex128]:
    """ψ(x_i) of the discretized equation at a single λ.

    ``phi`` is either a callable sampled at the nodes or a vector of samples.
    The initial values at λ come from the ξ-bootstrap.

    Raises:
        SingularityError: if λ is an eigenvalue of the discretized kernel.
        ConsistencyError: if the solution residual exceeds consistency_tol·‖φ‖∞.
    """
    family = discretize(kernel, grid)
    vec = sample_phi(phi, grid)
    state = bootstrap_state(family, complex(lam), cfg)
    return solve(state, vec, cfg, family)
