"""Covariance functions and their log-parameter derivatives.

Every positive parameter is stored as its natural logarithm; all gradients
are with respect to those log-values.  Both kernels use one length-scale per
input dimension.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .sparse_linalg import SparseSymMatrix

MAX_CS_DIM = 3


def _as2d(X):
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def _scaled_sqdist(X, X2, ls):
    """Per-dimension squared differences scaled by length-scale, shape (n, n2, D)."""
    diff = (X[:, None, :] - X2[None, :, :]) / ls
    return diff * diff


@dataclass(frozen=True, eq=False)
class Kernel:
    """Common state of the stationary kernels."""

    log_magnitude: float
    log_lengthscale: np.ndarray
    name: str = ""

    compact = False

    def __post_init__(self):
        ll = np.atleast_1d(np.asarray(self.log_lengthscale, dtype=float)).copy()
        ll.setflags(write=False)
        object.__setattr__(self, "log_lengthscale", ll)
        object.__setattr__(self, "log_magnitude", float(self.log_magnitude))
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @classmethod
    def create(cls, magnitude=1.0, lengthscale=1.0, dim=None, name=""):
        ls = np.atleast_1d(np.asarray(lengthscale, dtype=float))
        if dim is not None and ls.size == 1:
            ls = np.full(dim, ls[0])
        return cls(np.log(magnitude), np.log(ls), name)

    @property
    def dim(self):
        return self.log_lengthscale.size

    @property
    def magnitude(self):
        return float(np.exp(self.log_magnitude))

    @property
    def lengthscale(self):
        return np.exp(self.log_lengthscale)

    @property
    def param_names(self):
        if self.dim == 1:
            return ["magnitude", "lengthscale"]
        return ["magnitude"] + [f"lengthscale[{d}]" for d in range(self.dim)]

    def get_params(self):
        return np.concatenate([[self.log_magnitude], self.log_lengthscale])

    def with_params(self, values):
        values = np.asarray(values, dtype=float)
        return replace(self, log_magnitude=values[0], log_lengthscale=values[1:])

    def _param_index(self, param):
        try:
            return self.param_names.index(param)
        except ValueError:
            if param == "lengthscale[0]" and self.dim == 1:
                return 1
            raise KeyError(f"kernel {self.name!r} has no parameter {param!r}") from None

    def _check(self, X):
        X = _as2d(X)
        if X.shape[1] != self.dim:
            raise ValueError(f"inputs have {X.shape[1]} columns, kernel expects {self.dim}")
        return X

    def diag(self, X):
        return np.full(_as2d(X).shape[0], self.magnitude)

    def diag_grad(self, X, param):
        n = _as2d(X).shape[0]
        return np.full(n, self.magnitude) if self._param_index(param) == 0 else np.zeros(n)

    def K(self, X, X2=None):
        X = self._check(X)
        X2 = X if X2 is None else self._check(X2)
        return self._profile(_scaled_sqdist(X, X2, self.lengthscale).sum(-1))

    def grad(self, X, X2, param):
        """Elementwise derivative of ``K(X, X2)`` with respect to a log-parameter."""
        idx = self._param_index(param)
        X = self._check(X)
        X2 = X if X2 is None else self._check(X2)
        sq = _scaled_sqdist(X, X2, self.lengthscale)
        r2 = sq.sum(-1)
        if idx == 0:
            return self._profile(r2)
        return self._dprofile_dlogl(r2) * sq[..., idx - 1]


class SEKernel(Kernel):
    """``s2 * exp(-sum_d (x_d - x'_d)^2 / l_d^2)``."""

    kind = "se"

    def _profile(self, r2):
        return self.magnitude * np.exp(-r2)

    def _dprofile_dlogl(self, r2):
        # d/dlog l_d of exp(-sum sq_d) = 2 sq_d * k
        return 2.0 * self.magnitude * np.exp(-r2)


class CSKernel(Kernel):
    """Piecewise polynomial kernel with compact support ``r < 1``.

    ``k = s2/3 (1-r)_+^(j+2) ((j^2+4j+3) r^2 + (3j+6) r + 3)`` with
    ``j = floor(D/2) + 3``.
    """

    kind = "pp"
    compact = True

    def __post_init__(self):
        super().__post_init__()
        if self.dim > MAX_CS_DIM:
            warnings.warn(
                f"piecewise polynomial kernel with D={self.dim} > {MAX_CS_DIM}: "
                "positive definiteness is not guaranteed",
                stacklevel=3,
            )

    @property
    def j(self):
        return self.dim // 2 + 3

    def _profile(self, r2):
        j = self.j
        r = np.sqrt(r2)
        t = np.clip(1.0 - r, 0.0, None)
        poly = (j * j + 4 * j + 3) * r2 + (3 * j + 6) * r + 3.0
        return self.magnitude / 3.0 * t ** (j + 2) * poly

    def _dprofile_dlogl(self, r2):
        # dk/dr = -s2/3 (1-r)^(j+1) (j+3)(j+4) r ((j+1) r + 1), dr/dlog l_d = -sq_d / r
        j = self.j
        r = np.sqrt(r2)
        t = np.clip(1.0 - r, 0.0, None)
        return self.magnitude / 3.0 * t ** (j + 1) * (j + 3) * (j + 4) * ((j + 1) * r + 1.0)

    def neighbour_pairs(self, X, X2=None):
        """Index pairs with scaled distance below one.

        For a single input set only pairs ``i > j`` are returned.
        """
        X = self._check(X) / self.lengthscale
        tree = cKDTree(X)
        if X2 is None:
            pairs = tree.query_pairs(1.0, output_type="ndarray")
            if pairs.size == 0:
                return np.empty(0, np.int64), np.empty(0, np.int64)
            a, b = pairs[:, 0], pairs[:, 1]
            return np.maximum(a, b), np.minimum(a, b)
        X2 = self._check(X2) / self.lengthscale
        D = tree.sparse_distance_matrix(cKDTree(X2), 1.0, output_type="coo_matrix")
        return D.row.astype(np.int64), D.col.astype(np.int64)

    def _pair_terms(self, X, X2, rows, cols):
        diff = (X[rows] - X2[cols]) / self.lengthscale
        sq = diff * diff
        r2 = sq.sum(-1)
        keep = r2 < 1.0
        return rows[keep], cols[keep], sq[keep], r2[keep]

    def sparse_K(self, X, grads=False):
        """Sparse Gram matrix of ``X`` holding every pair with ``r < 1``.

        With ``grads=True`` also returns ``{param: SparseSymMatrix}`` sharing
        the same pattern.
        """
        X = self._check(X)
        n = X.shape[0]
        rows, cols = self.neighbour_pairs(X)
        rows, cols, sq, r2 = self._pair_terms(X, X, rows, cols)
        rows = np.concatenate([np.arange(n), rows])
        cols = np.concatenate([np.arange(n), cols])
        sq = np.concatenate([np.zeros((n, self.dim)), sq])
        r2 = np.concatenate([np.zeros(n), r2])
        # order entries column-major so the value arrays line up with CSC storage
        order = np.lexsort((rows, cols))
        rows, cols, sq, r2 = rows[order], cols[order], sq[order], r2[order]
        indptr = np.zeros(n + 1, np.int64)
        np.cumsum(np.bincount(cols, minlength=n), out=indptr[1:])
        K = SparseSymMatrix(n, indptr, rows, self._profile(r2))
        if not grads:
            return K
        out = {self.param_names[0]: K}
        dl = self._dprofile_dlogl(r2)
        for d, name in enumerate(self.param_names[1:]):
            out[name] = K.with_data(dl * sq[:, d])
        return K, out

    def sparse_cross(self, Xa, Xb, grads=False):
        """Rectangular sparse ``K(Xa, Xb)`` as scipy CSR."""
        Xa, Xb = self._check(Xa), self._check(Xb)
        rows, cols = self.neighbour_pairs(Xa, Xb)
        rows, cols, sq, r2 = self._pair_terms(Xa, Xb, rows, cols)
        shape = (Xa.shape[0], Xb.shape[0])
        K = sp.csr_matrix((self._profile(r2), (rows, cols)), shape=shape)
        if not grads:
            return K
        out = {self.param_names[0]: K}
        dl = self._dprofile_dlogl(r2)
        for d, name in enumerate(self.param_names[1:]):
            out[name] = sp.csr_matrix((dl * sq[:, d], (rows, cols)), shape=shape)
        return K, out


KERNELS = {"se": SEKernel, "pp": CSKernel, "cs": CSKernel}


def make_kernel(kind, magnitude=1.0, lengthscale=1.0, dim=None, name=""):
    try:
        cls = KERNELS[kind]
    except KeyError:
        raise ValueError(f"unknown kernel type {kind!r}") from None
    return cls.create(magnitude, lengthscale, dim, name)


def se_eval(k, x, x2):
    return float(k.K(np.atleast_2d(x), np.atleast_2d(x2))[0, 0])


def cs_eval(k, x, x2):
    return float(k.K(np.atleast_2d(x), np.atleast_2d(x2))[0, 0])


def cov_matrix_dense(kernel, X, X2=None):
    return kernel.K(X, X2)


def cov_matrix_sparse(kernel, X):
    if not kernel.compact:
        raise TypeError("only compactly supported kernels have a sparse Gram matrix")
    return kernel.sparse_K(X)


def kernel_grad(kernel, X, X2, param, sparse=False):
    """``dK/d log(param)``; sparse output is only available for ``X2 is None``."""
    if sparse:
        if not kernel.compact or X2 is not None:
            raise TypeError("sparse gradients need a compact kernel and a single input set")
        kernel._param_index(param)
        return kernel.sparse_K(X, grads=True)[1][param]
    return kernel.grad(X, X2, param)


@dataclass
class KernelParamVector:
    """Ordered log-parameters of a kernel list followed by the noise variance.

    The order is kernel by kernel (magnitude first, then length-scales per
    dimension), and ``log noise variance`` last.
    """

    kernels: tuple
    log_noise: float
    entries: list = field(init=False)

    def __post_init__(self):
        self.kernels = tuple(self.kernels)
        ids = [k.name for k in self.kernels]
        if len(set(ids)) != len(ids):
            raise ValueError(f"kernel names must be unique, got {ids}")
        self.entries = [(k.name, p) for k in self.kernels for p in k.param_names]
        self.entries.append(("likelihood", "noise"))

    @property
    def names(self):
        return [f"{kid}.{p}" for kid, p in self.entries]

    @property
    def size(self):
        return len(self.entries)

    def to_vector(self):
        return np.concatenate([k.get_params() for k in self.kernels] + [[self.log_noise]])

    def from_vector(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise ValueError(f"expected {self.size} log-parameters, got {theta.shape}")
        kernels, i = [], 0
        for k in self.kernels:
            m = len(k.param_names)
            kernels.append(k.with_params(theta[i:i + m]))
            i += m
        return KernelParamVector(tuple(kernels), float(theta[-1]))

    def as_records(self):
        return [
            {"kernel": kid, "param": p, "log_value": float(v)}
            for (kid, p), v in zip(self.entries, self.to_vector())
        ]
