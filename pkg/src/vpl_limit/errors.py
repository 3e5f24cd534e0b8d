"""Exception hierarchy shared by the solvers and the command line."""

from __future__ import annotations

from .phase_grid import DomainError, OverflowGuardError

__all__ = ["DomainError", "OverflowGuardError", "NumericalError", "NonConvergenceError",
           "BlowUpError", "ConsistencyError", "CompatibilityError", "PropertyFailure"]


class NumericalError(RuntimeError):
    """A computation failed numerically (nonconvergence, blow-up, CFL)."""


class NonConvergenceError(NumericalError):
    """An iterative solver stopped without meeting its tolerance.

    ``history`` holds the residual norms of every iteration.
    """

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history or [])


class BlowUpError(NumericalError):
    """A tracked quantity left its admissible window."""


class ConsistencyError(NumericalError):
    """An internal identity that must hold by construction was violated."""


class CompatibilityError(DomainError):
    """Input data violate a solvability condition; ``defect`` is the measured gap."""

    def __init__(self, message: str, defect: float):
        super().__init__(message)
        self.defect = float(defect)


class PropertyFailure(AssertionError):
    """A property check of a diagnostic suite failed."""
