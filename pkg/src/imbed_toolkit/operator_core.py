"""Dense operator algebra: traces, exterior powers, partial traces and determinants.

Every operator is a dense square complex matrix. In finite dimension each
operator is trace class, so the determinant series and the D series below
terminate and serve as exact oracles for the imbedding engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy.linalg
from scipy.special import gammainc

DiscreteOperator = npt.NDArray[np.complex128]


@dataclass(frozen=True)
class ScalarSeriesReport:
    """Value of a truncated scalar series with its tail bound."""

    value: complex
    terms_used: int
    truncation_bound: float


def as_operator(A: Any) -> DiscreteOperator:
    """Validate and convert ``A`` to a complex square matrix.

    Raises:
        ValueError: if ``A`` is not square, is empty or has non-finite entries.
    """
    arr = np.asarray(A, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"Operator must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("Operator dimension must be at least 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("Operator entries must be finite")
    return arr


def trace(A: Any) -> complex:
    """Sum of the diagonal entries."""
    return complex(np.trace(as_operator(A)))


def trace_norm(A: Any) -> float:
    """Trace norm tr|A|, the sum of singular values."""
    sv = np.linalg.svd(as_operator(A), compute_uv=False)
    return float(np.sum(sv))


def matrix_powers(A: Any, m_max: int) -> list[DiscreteOperator]:
    """[A^0, A^1, ..., A^m_max]."""
    arr = as_operator(A)
    powers = [np.eye(arr.shape[0], dtype=np.complex128)]
    for _ in range(m_max):
        powers.append(powers[-1] @ arr)
    return powers


def power_traces(A: Any, m_max: int) -> npt.NDArray[np.complex128]:
    """Tr(A^m) for m = 0..m_max; entry 0 is the dimension."""
    return np.array([np.trace(p) for p in matrix_powers(A, m_max)], dtype=np.complex128)


def exterior_power_traces(A: Any, k_max: int) -> npt.NDArray[np.complex128]:
    """Tr[Λ^k(A)] for k = 0..k_max.

    Uses the first-column expansion of the power-trace determinant,
    k·e_k = Σ_{m=1}^{k} (-1)^{m+1} Tr(A^m) e_{k-m}. Entries with k above
    the dimension are exactly zero.
    """
    if k_max < 0:
        raise ValueError(f"k_max must be non-negative, got {k_max}")
    arr = as_operator(A)
    dim = arr.shape[0]
    top = min(k_max, dim)
    p = power_traces(arr, top)
    e = np.zeros(k_max + 1, dtype=np.complex128)
    e[0] = 1.0
    for k in range(1, top + 1):
        acc = 0j
        for m in range(1, k + 1):
            acc += (-1) ** (m + 1) * p[m] * e[k - m]
        e[k] = acc / k
    return e


def exterior_power_trace(A: Any, k: int) -> complex:
    """Tr[Λ^k(A)], the k-th elementary symmetric polynomial of the eigenvalues."""
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    return complex(exterior_power_traces(A, k)[k])


def partial_trace(A: Any, k: int) -> DiscreteOperator:
    """Explicit partial trace Tr_{k-1}[Λ^k(A)] as an operator on the base space.

    Tr_{k-1}[Λ^k(A)] = (1/k) Σ_{m=1}^{k} (-1)^{m+1} A^{m-1} Tr[Λ^{k-m}(A)].
    The 1/k weight is the one for which k·Tr_{k-1} + (k-1)·A·Tr_{k-2}
    equals Tr[Λ^{k-1}]·I for every k.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    arr = as_operator(A)
    powers = matrix_powers(arr, k - 1)
    e = exterior_power_traces(arr, k - 1)
    out = np.zeros_like(arr)
    for m in range(1, k + 1):
        out += (-1) ** (m + 1) * e[k - m] * powers[m - 1]
    return out / k


def fredholm_det_series(A: Any, tol: float) -> ScalarSeriesReport:
    """det(I + A) as the series Σ_k Tr[Λ^k(A)].

    Terms are summed until the tail bound Σ_{j>k} ‖A‖₁^j / j! drops below
    ``tol``; the series always stops at k = dim.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    arr = as_operator(A)
    dim = arr.shape[0]
    norm1 = trace_norm(arr)
    e = exterior_power_traces(arr, dim)
    value = 0j
    bound = math.inf
    k = 0
    for k in range(dim + 1):
        value += e[k]
        bound = _exp_tail(norm1, k)
        if bound < tol:
            break
    return ScalarSeriesReport(value=complex(value), terms_used=k + 1, truncation_bound=bound)


def _exp_tail(norm1: float, k: int) -> float:
    # Σ_{j>k} M^j/j! = e^M · P(k+1, M), P the regularized lower gamma
    with np.errstate(over="ignore", invalid="ignore"):
        tail = float(np.exp(norm1) * gammainc(k + 1, norm1))
    if math.isnan(tail):
        return math.inf
    return max(tail, 0.0)


def d_operator_series(A: Any) -> DiscreteOperator:
    """D = Σ_{k=1}^{dim+1} k·Tr_{k-1}[Λ^k(A)].

    Collecting the powers of A gives
    D = Σ_{j=0}^{dim} (-1)^j (Σ_{i=0}^{dim-j} Tr[Λ^i(A)]) A^j,
    which is evaluated directly.
    """
    arr = as_operator(A)
    dim = arr.shape[0]
    e = exterior_power_traces(arr, dim)
    partial_sums = np.cumsum(e)
    powers = matrix_powers(arr, dim)
    out = np.zeros_like(arr)
    for j in range(dim + 1):
        out += (-1) ** j * partial_sums[dim - j] * powers[j]
    return out


def plemelj_smithies_beta(A: Any, k: int) -> DiscreteOperator:
    """Plemelj-Smithies operator β_k(A), expanded along its first column.

    The scalar part of the determinant has Tr(A^{i-j+1}) below the
    superdiagonal and k-1, k-2, ... on it; each operator entry A^m is
    weighted by its signed minor.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    arr = as_operator(A)
    p = power_traces(arr, k)
    powers = matrix_powers(arr, k)
    scalar = np.zeros((k, k - 1), dtype=np.complex128)
    for i in range(1, k + 1):
        for j in range(2, k + 1):
            if j - 1 < i:
                scalar[i - 1, j - 2] = p[i - j + 1]
            elif j - 1 == i:
                scalar[i - 1, j - 2] = k - i
    out = np.zeros_like(arr)
    for m in range(1, k + 1):
        minor = np.delete(scalar, m - 1, axis=0)
        out += (-1) ** (m + 1) * np.linalg.det(minor) * powers[m]
    return out


def determinant_and_adjugate(A: Any) -> tuple[complex, DiscreteOperator]:
    """Exact pair (det(I + A), det(I + A)·(I + A)^{-1}) by LU factorization."""
    arr = as_operator(A)
    dim = arr.shape[0]
    lu, piv = scipy.linalg.lu_factor(np.eye(dim) + arr)
    swaps = int(np.sum(piv != np.arange(dim)))
    det = complex(np.prod(np.diag(lu)) * (-1) ** swaps)
    inverse = scipy.linalg.lu_solve((lu, piv), np.eye(dim, dtype=np.complex128))
    return det, det * inverse


def operator_to_json(A: Any) -> dict[str, Any]:
    """Debug dump: dim plus row-major entries as [re, im] pairs."""
    arr = as_operator(A)
    return {
        "dim": int(arr.shape[0]),
        "entries": [[float(z.real), float(z.imag)] for z in arr.ravel()],
    }


def operator_from_json(obj: dict[str, Any]) -> DiscreteOperator:
    """Inverse of :func:`operator_to_json`."""
    try:
        dim = int(obj["dim"])
        pairs = obj["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError("Operator dump needs 'dim' and 'entries'") from exc
    if dim < 1 or len(pairs) != dim * dim:
        raise ValueError(f"Operator dump holds {len(pairs)} entries for dim {dim}")
    flat = np.array([complex(float(re), float(im)) for re, im in pairs], dtype=np.complex128)
    return as_operator(flat.reshape(dim, dim))
