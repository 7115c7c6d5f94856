"""Model descriptions shared by all model kinds."""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ..kernels import KernelParamVector

KINDS = ("full", "fic", "pic", "csfic")


@dataclass(frozen=True, eq=False)
class InducingSet:
    """Fixed inducing inputs ``X`` (m, D) and how they were placed."""

    X: np.ndarray
    placement: str = "grid"
    seed: int | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] < 1 or not np.all(np.isfinite(X)):
            raise ValueError("inducing set must hold at least one finite location")
        object.__setattr__(self, "X", X)

    @property
    def m(self):
        return self.X.shape[0]


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """Assignment of each training point to exactly one block."""

    labels: np.ndarray
    blocks: tuple = field(init=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        uniq, labels = np.unique(labels, return_inverse=True)
        object.__setattr__(self, "labels", labels)
        order = np.argsort(labels, kind="stable")
        cuts = np.searchsorted(labels[order], np.arange(1, uniq.size))
        object.__setattr__(self, "blocks", tuple(np.split(order, cuts)))

    @classmethod
    def from_blocks(cls, blocks, n):
        labels = np.full(n, -1, np.int64)
        for b, idx in enumerate(blocks):
            if np.any(labels[idx] >= 0):
                raise ValueError("a point is assigned to more than one block")
            labels[idx] = b
        if np.any(labels < 0):
            raise ValueError("some points are not assigned to a block")
        return cls(labels)

    @property
    def n(self):
        return self.labels.size

    @property
    def count(self):
        return len(self.blocks)

    def sizes(self):
        return np.array([b.size for b in self.blocks])


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Which model to evaluate and with which components.

    ``kernels`` are summed.  For ``csfic`` the compactly supported kernels form
    the sparse part and the remaining ones are approximated through the
    inducing set.  ``noise`` is the Gaussian noise variance.

    ``pic_test`` selects the PIC test conditional: ``"fic"`` treats test
    points as independent given the inducing variables; ``"block"`` joins each
    test point to the block of its nearest training input.
    """

    kind: str
    kernels: tuple
    noise: float = 0.1
    inducing: InducingSet | None = None
    blocks: BlockPartition | None = None
    jitter: float = 1e-8
    max_jitter: float = 1e-2
    pic_test: str = "fic"

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(self.kernels))
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"model kind must be one of {KINDS}, got {self.kind!r}")
        if not self.kernels:
            raise ValueError("at least one kernel is required")
        if not self.noise > 0:
            raise ValueError("noise variance must be positive")
        if self.kind != "full" and self.inducing is None:
            raise ValueError(f"{self.kind} needs an inducing set")
        if self.kind == "pic" and self.blocks is None:
            raise ValueError("pic needs a block partition")
        if self.kind == "csfic":
            if not self.local_kernels:
                raise ValueError("csfic needs a compactly supported kernel")
            if not self.global_kernels:
                raise ValueError("csfic needs a globally supported kernel")
        if self.pic_test not in ("fic", "block"):
            raise ValueError(f"pic_test must be 'fic' or 'block', got {self.pic_test!r}")
        dims = {k.dim for k in self.kernels}
        if len(dims) != 1:
            raise ValueError(f"kernels disagree on input dimension: {dims}")
        if self.inducing is not None and self.inducing.X.shape[1] not in dims:
            raise ValueError("inducing inputs have the wrong dimension")
        return self

    @property
    def dim(self):
        return self.kernels[0].dim

    @property
    def global_kernels(self):
        if self.kind == "csfic":
            return tuple(k for k in self.kernels if not k.compact)
        return self.kernels

    @property
    def local_kernels(self):
        if self.kind == "csfic":
            return tuple(k for k in self.kernels if k.compact)
        return ()

    def params(self):
        return KernelParamVector(self.kernels, float(np.log(self.noise)))

    def theta(self):
        return self.params().to_vector()

    def with_theta(self, theta):
        if theta is None:
            return self
        p = self.params().from_vector(theta)
        return replace(self, kernels=p.kernels, noise=float(np.exp(p.log_noise)))

    def with_data_design(self, inducing=None, blocks=None):
        return replace(self, inducing=inducing if inducing is not None else self.inducing,
                       blocks=blocks if blocks is not None else self.blocks)


@dataclass(eq=False)
class PredictiveDistribution:
    """Per-point posterior of the latent function and of new observations."""

    mean: np.ndarray
    var: np.ndarray
    noise: float
    clamped: int = 0

    @property
    def obs_var(self):
        return self.var + self.noise

    @classmethod
    def build(cls, mean, var, noise, warn_fraction=1e-3):
        var = np.asarray(var, dtype=float)
        neg = var < 0
        count = int(neg.sum())
        if count:
            var = np.where(neg, 0.0, var)
            if count > warn_fraction * var.size:
                warnings.warn(f"{count} of {var.size} predictive variances clamped at zero",
                              RuntimeWarning, stacklevel=3)
        return cls(np.asarray(mean, dtype=float), var, float(noise), count)
