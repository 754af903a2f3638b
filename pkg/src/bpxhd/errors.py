"""Exception types shared across the package."""


class BpxhdError(Exception):
    """Base class for all package errors."""


class DegenerateGeometryError(BpxhdError, ValueError):
    """A simplex has (numerically) zero volume."""


class DomainError(BpxhdError, ValueError):
    """A point lies outside the unit cube."""


class BudgetExceededError(BpxhdError):
    """A mesh or hierarchy would exceed the configured DOF budget."""

    def __init__(self, message, level=None, size=None, budget=None):
        super().__init__(message)
        self.level = level
        self.size = size
        self.budget = budget


class SolverError(BpxhdError, ArithmeticError):
    """An iterative or direct solve failed to converge or broke down."""


class IndefiniteError(SolverError):
    """A curvature p^T A p <= 0 was met inside conjugate gradients."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


class NotSPDError(SolverError):
    """A matrix that must be symmetric positive definite is not."""
