"""Exception hierarchy shared by every module."""

from __future__ import annotations


class CoverPlanError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CoverPlanError, ValueError):
    """Input violates a documented precondition."""


class MeshFormatError(CoverPlanError, ValueError):
    """A mesh file could not be parsed.

    ``location`` is a byte offset for binary formats and a 1-based line
    number for text formats.
    """

    def __init__(self, message: str, *, location: int | None = None, unit: str = "line"):
        self.location = location
        self.unit = unit
        if location is not None:
            message = f"{message} (at {unit} {location})"
        super().__init__(message)


class InvalidPlanError(CoverPlanError, ValueError):
    """A plan references waypoints that do not exist."""


class UnreachableCoverageError(CoverPlanError):
    """The sampling planner could not reach the requested coverage fraction."""

    def __init__(self, target: float, best_fraction: float, iterations: int):
        self.target = target
        self.best_fraction = best_fraction
        self.iterations = iterations
        super().__init__(
            f"coverage fraction {target:.4f} unreachable: best observed "
            f"{best_fraction:.4f} after {iterations} iterations"
        )


class SchemaVersionError(CoverPlanError, ValueError):
    """A persisted record uses an unsupported schema version."""
