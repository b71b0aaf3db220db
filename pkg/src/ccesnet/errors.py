"""Exception hierarchy shared by the ccesnet modules."""

from __future__ import annotations


class CCESError(Exception):
    """Base class. ``module`` and ``context`` feed the CLI error JSON."""

    module = "ccesnet"
    code = "error"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context


class DataValidationError(CCESError, ValueError):
    module = "io_data"
    code = "invalid_data"


class LinearityError(CCESError, ValueError):
    module = "triangulate"
    code = "undefined_linearity"


class DegenerateShareError(CCESError, ValueError):
    module = "cces"
    code = "degenerate_share"


class InfeasibleProductivity(CCESError, ArithmeticError):
    """Backward recursion left the feasible region for a trial productivity."""

    module = "cces"
    code = "infeasible_t"


class CalibrationError(CCESError, RuntimeError):
    module = "cces"
    code = "calibration_failure"


class ConvergenceError(CCESError, RuntimeError):
    module = "equilibrium"
    code = "non_convergence"


class ProductivityError(CCESError, ArithmeticError):
    """[I - S] is singular or its Neumann series does not converge."""

    module = "propagation"
    code = "productivity_infeasible"
