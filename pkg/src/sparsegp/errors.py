"""Exception types shared across the package."""

import numpy as np


class SparseStructureError(ValueError):
    """A sparse pattern is malformed or incompatible with an operation."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization met a non-positive pivot.

    Attributes
    ----------
    column : int
        Column (in the permuted ordering) where the pivot failed.
    """

    def __init__(self, column, message=None):
        self.column = int(column)
        super().__init__(message or f"non-positive pivot in column {self.column}")


class NumericalError(RuntimeError):
    """Model evaluation failed even after jitter escalation."""

    def __init__(self, message, theta=None):
        self.theta = None if theta is None else np.array(theta, dtype=float)
        super().__init__(message)


class TrainingError(RuntimeError):
    """Every optimization restart failed."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or []
        super().__init__(message)


class DataError(ValueError):
    """Input data could not be parsed or is unusable."""
