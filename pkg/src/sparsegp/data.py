"""Regression datasets and target standardization."""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs ``X`` (n, D), targets ``y`` (n,) and normalization metadata.

    ``y_shift``/``y_scale`` record the affine map applied to the targets:
    ``y_stored = (y_raw - y_shift) / y_scale``.
    """

    X: np.ndarray
    y: np.ndarray
    ids: np.ndarray | None = None
    y_shift: float = 0.0
    y_scale: float = 1.0
    dropped: int = 0
    columns: tuple = field(default=())

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError(f"inputs {X.shape} and targets {y.shape} disagree")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx)
        return replace(self, X=self.X[idx], y=self.y[idx],
                       ids=None if self.ids is None else np.asarray(self.ids)[idx])

    def standardized(self):
        """Copy with zero-mean, unit-variance targets (composes with existing scaling)."""
        mu = float(self.y.mean())
        sd = float(self.y.std())
        if not sd > 0:
            sd = 1.0
        return replace(self, y=(self.y - mu) / sd,
                       y_shift=self.y_shift + mu * self.y_scale,
                       y_scale=self.y_scale * sd)

    def raw_targets(self):
        return self.y * self.y_scale + self.y_shift

    def unscale_mean(self, mean):
        return np.asarray(mean) * self.y_scale + self.y_shift

    def unscale_var(self, var):
        return np.asarray(var) * self.y_scale ** 2
