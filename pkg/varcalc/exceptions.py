"""
Exception hierarchy for varcalc.

Every error raised on purpose by the library derives from VarcalcError so that the
command line and the HTTP layer can map families of failures to exit codes / status codes.
"""
from typing import Optional, Sequence


class VarcalcError(Exception):
    """Root of all library errors"""


class DimensionError(VarcalcError, ValueError):
    """Array shapes do not match the structure they are used with"""


class StructureError(VarcalcError, ValueError):
    """Invalid algebroid / frame / groupoid data"""


class ChartError(VarcalcError, ValueError):
    """Point outside the declared chart, or a non-composable groupoid pair"""


class SolverError(VarcalcError):
    """A numerical procedure failed"""

    def __init__(self, message: str, point: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.point = None if point is None else [float(x) for x in point]


class SingularMatrixError(SolverError):
    def __init__(self, message: str, rcond: float = 0.0, point: Optional[Sequence[float]] = None):
        super().__init__(message, point)
        self.rcond = rcond


class DegenerateLagrangianError(SingularMatrixError):
    """The fiber Hessian of a Lagrangian is singular"""


class ConvergenceError(SolverError):
    def __init__(self, message: str, iterations: int = 0, residual_norm: float = float("nan"),
                 point: Optional[Sequence[float]] = None):
        super().__init__(message, point)
        self.iterations = iterations
        self.residual_norm = residual_norm


class NonFiniteError(SolverError):
    """A user evaluator or right-hand side produced NaN or inf"""


class SpecError(VarcalcError):
    """Malformed problem file or problem definition"""


class ExprSyntaxError(SpecError):
    def __init__(self, message: str, position: int = -1):
        if position >= 0:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class InvalidArgumentError(VarcalcError, ValueError):
    """An argument is outside the accepted range (empty horizon, r > n, ...)"""


class AdmissibilityError(VarcalcError, ValueError):
    """A jet claims admissibility but q_dot != rho(q) y"""


class UnknownProblemError(SpecError):
    """No catalog problem with the requested name"""
