"""
errors.py — Exception hierarchy for Fractal Drum.

Library code raises; only ``cli.main`` turns an exception into an exit code.
"""

from __future__ import annotations

from typing import Any, Optional


class FractalDrumError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for this failure."""

    exit_code = 1


class InvalidConfigError(FractalDrumError, ValueError):
    """A parameter is outside its declared bounds."""

    exit_code = 2


class GeometryError(FractalDrumError, ValueError):
    """A closed form has no finite value for the given parameters."""

    exit_code = 2


class MeshError(FractalDrumError, ValueError):
    """Empty rasters, degenerate triangles, mismatched meshes."""

    exit_code = 2


class BoundaryConditionError(FractalDrumError, ValueError):
    exit_code = 2


class BudgetExceededError(FractalDrumError):
    """A pixel or triangle count would exceed the configured budget."""

    exit_code = 4

    def __init__(self, what: str, requested: int, budget: int):
        super().__init__(f"{what}: {requested} requested, budget is {budget}")
        self.what = what
        self.requested = requested
        self.budget = budget


class SolverError(FractalDrumError):
    """The eigensolver did not meet its residual contract.

    ``partial`` holds whatever spectrum was recovered, with the failing
    pairs marked in ``partial.converged``.
    """

    exit_code = 3

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial
