"""Lower-triangle compressed sparse column storage for symmetric matrices."""

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from ..errors import SparseStructureError


def pattern_hash(n, indptr, indices):
    h = hashlib.blake2b(digest_size=16)
    h.update(np.int64(n).tobytes())
    h.update(np.ascontiguousarray(indptr, dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(indices, dtype=np.int64).tobytes())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """Symmetric matrix stored by its lower triangle in CSC layout.

    Row indices inside each column are strictly increasing and the diagonal
    entry is always the first stored entry of its column. Values that are
    numerically zero but structurally present are kept.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indptr", np.ascontiguousarray(self.indptr, dtype=np.int64))
        object.__setattr__(self, "indices", np.ascontiguousarray(self.indices, dtype=np.int64))
        object.__setattr__(self, "data", np.ascontiguousarray(self.data, dtype=float))
        for arr in (self.indptr, self.indices, self.data):
            arr.setflags(write=False)

    @cached_property
    def pattern_id(self):
        return pattern_hash(self.n, self.indptr, self.indices)

    @property
    def nnz(self):
        """Stored entries (lower triangle including the diagonal)."""
        return int(self.indptr[-1])

    @property
    def nnz_full(self):
        """Nonzeros of the full symmetric matrix."""
        return 2 * self.nnz - self.n

    @cached_property
    def col_index(self):
        """Column of every stored entry."""
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def validate(self):
        """Raise :class:`SparseStructureError` unless the structure is well formed."""
        n, ptr, idx = self.n, self.indptr, self.indices
        if ptr.shape != (n + 1,) or ptr[0] != 0 or np.any(np.diff(ptr) < 1):
            raise SparseStructureError("column pointers malformed or a column is empty")
        if idx.shape != (ptr[-1],) or self.data.shape != idx.shape:
            raise SparseStructureError("index/value arrays do not match column pointers")
        if np.any(idx < 0) or np.any(idx >= n):
            raise SparseStructureError("row index out of range")
        if np.any(idx[ptr[:-1]] != np.arange(n)):
            raise SparseStructureError("diagonal entry missing")
        cols = self.col_index
        if np.any(idx < cols):
            raise SparseStructureError("entry above the diagonal")
        same_col = cols[1:] == cols[:-1]
        if np.any(np.diff(idx)[same_col] <= 0):
            raise SparseStructureError("row indices not strictly increasing")
        return self

    @classmethod
    def from_scipy(cls, A):
        """Build from any scipy sparse matrix; only the lower triangle is read.

        Missing diagonal entries are inserted as explicit zeros.
        """
        A = sp.coo_matrix(A)
        n = A.shape[0]
        if A.shape != (n, n):
            raise SparseStructureError(f"matrix is not square: {A.shape}")
        keep = A.row >= A.col
        rows = np.concatenate([A.row[keep], np.arange(n)])
        cols = np.concatenate([A.col[keep], np.arange(n)])
        vals = np.concatenate([A.data[keep], np.zeros(n)])
        # duplicate diagonal zeros are summed away
        C = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
        C.sum_duplicates()
        C.sort_indices()
        return cls(n, C.indptr, C.indices, C.data)

    @classmethod
    def from_dense(cls, A, keep=None):
        """Build from a dense array, storing nonzeros of the lower triangle.

        ``keep`` optionally gives a boolean mask of structurally present entries.
        """
        A = np.asarray(A, dtype=float)
        mask = A != 0 if keep is None else np.asarray(keep, dtype=bool)
        mask = np.tril(mask | np.eye(A.shape[0], dtype=bool))
        rows, cols = np.nonzero(mask)
        C = sp.csc_matrix((A[rows, cols], (rows, cols)), shape=A.shape)
        C.sort_indices()
        return cls(A.shape[0], C.indptr, C.indices, C.data)

    @classmethod
    def from_triplets(cls, n, rows, cols, vals):
        """Build from lower-triangle coordinates (upper ones are mirrored)."""
        rows, cols = np.asarray(rows), np.asarray(cols)
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        return cls.from_scipy(sp.coo_matrix((vals, (hi, lo)), shape=(n, n)))

    def with_data(self, data):
        """Same pattern, new values."""
        data = np.asarray(data, dtype=float)
        if data.shape != self.indices.shape:
            raise SparseStructureError("value array does not match pattern")
        out = SparseSymMatrix(self.n, self.indptr, self.indices, data)
        # the pattern is shared, so is its identifier
        out.__dict__["pattern_id"] = self.pattern_id
        out.__dict__["col_index"] = self.col_index
        return out

    def diagonal(self):
        return self.data[self.indptr[:-1]].copy()

    def add_diagonal(self, d):
        data = self.data.copy()
        data[self.indptr[:-1]] += d
        return self.with_data(data)

    def lower(self):
        """Lower triangle as a scipy CSC matrix."""
        return sp.csc_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    def to_scipy(self):
        """Full symmetric matrix as scipy CSC."""
        L = self.lower()
        return (L + sp.triu(L.T, k=1)).tocsc()

    def to_dense(self):
        return self.to_scipy().toarray()

    def matvec(self, X):
        """Product with a dense vector or matrix."""
        L = self.lower()
        X = np.asarray(X, dtype=float)
        return L @ X + L.T @ X - self.diagonal().reshape((-1,) + (1,) * (X.ndim - 1)) * X

    def dump_coo(self, path):
        """Write ``row col value`` lines (0-based, lower triangle)."""
        with open(path, "w") as fh:
            for r, c, v in zip(self.indices, self.col_index, self.data):
                fh.write(f"{r} {c} {float(v)!r}\n")

    @classmethod
    def load_coo(cls, path, n=None):
        rows, cols, vals = [], [], []
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                r, c, v = line.split()
                rows.append(int(r))
                cols.append(int(c))
                vals.append(float(v))
        if n is None:
            n = max(max(rows, default=-1), max(cols, default=-1)) + 1
        return cls.from_triplets(n, rows, cols, vals)


@dataclass(frozen=True, eq=False)
class Permutation:
    """Symmetric permutation ``C = A[perm][:, perm]``.

    ``inverse[perm[i]] == i``.
    """

    perm: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.perm, dtype=np.int64)
        n = p.size
        if np.any(p < 0) or np.any(p >= n) or np.unique(p).size != n:
            raise SparseStructureError("not a permutation")
        p.setflags(write=False)
        object.__setattr__(self, "perm", p)

    @cached_property
    def inverse(self):
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        inv.setflags(write=False)
        return inv

    @property
    def n(self):
        return self.perm.size

    @classmethod
    def identity(cls, n):
        return cls(np.arange(n))

    @cached_property
    def key(self):
        return hashlib.blake2b(self.perm.tobytes(), digest_size=16).hexdigest()
