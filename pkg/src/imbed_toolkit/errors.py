"""Exception hierarchy shared by the solver modules and the CLI."""

from __future__ import annotations

from typing import Any


class ImbedError(RuntimeError):
    """Base class for numerical failures.

    ``kind`` is the ``error_kind`` written to the CLI error record and
    ``exit_code`` the process status the CLI returns for it.
    """

    kind = "ImbedError"
    exit_code = 1

    def __init__(self, message: str, lam: complex | None = None) -> None:
        super().__init__(message)
        self.lam = lam

    def record(self) -> dict[str, Any]:
        """Machine-readable error record."""
        lam: Any = None
        if self.lam is not None:
            lam = [float(complex(self.lam).real), float(complex(self.lam).imag)]
        return {"error_kind": self.kind, "lambda": lam, "message": str(self)}


class SingularityError(ImbedError):
    """|d(lambda)| fell below the singularity threshold."""

    kind = "SingularityError"
    exit_code = 3

    def __init__(
        self,
        message: str,
        lam: complex | None = None,
        d: complex | None = None,
        last_state: Any = None,
    ) -> None:
        super().__init__(message, lam)
        self.d = d
        self.last_state = last_state


class StepSizeError(ImbedError):
    """Adaptive stepping stalled below the minimum step."""

    kind = "StepSizeError"
    exit_code = 4

    def __init__(self, message: str, lam: complex | None = None, step: float = 0.0) -> None:
        super().__init__(message, lam)
        self.step = step


class ConsistencyError(ImbedError):
    """The D + f D = d I residual could not be kept below tolerance."""

    kind = "ConsistencyError"
    exit_code = 4


class NoBracketError(ImbedError):
    """No zero of d(lambda) was detected along a scan."""

    kind = "NoBracketError"
    exit_code = 4


class NonConvergenceError(ImbedError):
    """Newton iteration did not reach the requested residual."""

    kind = "NonConvergenceError"
    exit_code = 4

    def __init__(self, message: str, lam: complex | None = None, iterations: int = 0) -> None:
        super().__init__(message, lam)
        self.iterations = iterations


class ConfigError(ImbedError, ValueError):
    """Malformed run configuration."""

    kind = "ConfigError"
    exit_code = 2


class IoError(ImbedError):
    """Artifact could not be written."""

    kind = "IoError"
    exit_code = 5


class DomainMismatchError(ValueError):
    """Kernel domain and quadrature grid domain differ."""
