"""Sparse Cholesky factorization with a cached symbolic phase."""

from collections import OrderedDict
from dataclasses import dataclass
from threading import Lock

import numpy as np
import scipy.sparse as sp
from numba import njit

from ..errors import NotPositiveDefiniteError, SparseStructureError
from .matrix import Permutation, SparseSymMatrix
from .ordering import fill_reducing_order


@njit(cache=True)
def _etree(n, Up, Ui):
    parent = np.full(n, -1, np.int64)
    ancestor = np.full(n, -1, np.int64)
    for k in range(n):
        for p in range(Up[k], Up[k + 1]):
            i = Ui[p]
            while i != -1 and i < k:
                inext = ancestor[i]
                ancestor[i] = k
                if inext == -1:
                    parent[i] = k
                i = inext
    return parent


@njit(cache=True)
def _symbolic(n, Up, Ui, parent):
    # row k of L is the union of etree paths from the nonzeros of C[k, :k]
    flag = np.full(n, -1, np.int64)
    counts = np.zeros(n, np.int64)
    for k in range(n):
        flag[k] = k
        for p in range(Up[k], Up[k + 1]):
            i = Ui[p]
            while i < k and flag[i] != k:
                counts[i] += 1
                flag[i] = k
                i = parent[i]
    Lp = np.zeros(n + 1, np.int64)
    for j in range(n):
        Lp[j + 1] = Lp[j] + counts[j] + 1
    Li = np.empty(Lp[n], np.int64)
    nxt = np.empty(n, np.int64)
    for j in range(n):
        Li[Lp[j]] = j
        nxt[j] = Lp[j] + 1
    flag[:] = -1
    for k in range(n):
        flag[k] = k
        for p in range(Up[k], Up[k + 1]):
            i = Ui[p]
            while i < k and flag[i] != k:
                Li[nxt[i]] = k
                nxt[i] += 1
                flag[i] = k
                i = parent[i]
    return Lp, Li, counts


@njit(cache=True)
def _locate(Lp, Li, rows, cols):
    # position in L storage of each (row >= col) coordinate; -1 if absent
    out = np.empty(rows.size, np.int64)
    for e in range(rows.size):
        r, c = rows[e], cols[e]
        lo, hi = Lp[c], Lp[c + 1]
        pos = -1
        while lo < hi:
            mid = (lo + hi) // 2
            v = Li[mid]
            if v == r:
                pos = mid
                break
            if v < r:
                lo = mid + 1
            else:
                hi = mid
        out[e] = pos
    return out


@njit(cache=True)
def _numeric(n, Lp, Li, Lx):
    # left-looking column Cholesky; Lx enters holding C on L's pattern
    x = np.zeros(n)
    head = np.full(n, -1, np.int64)
    link = np.full(n, -1, np.int64)
    pos = np.zeros(n, np.int64)
    for j in range(n):
        p0, p1 = Lp[j], Lp[j + 1]
        for p in range(p0, p1):
            x[Li[p]] = Lx[p]
        k = head[j]
        while k != -1:
            knext = link[k]
            p = pos[k]
            ljk = Lx[p]
            for q in range(p, Lp[k + 1]):
                x[Li[q]] -= ljk * Lx[q]
            pos[k] = p + 1
            if p + 1 < Lp[k + 1]:
                r = Li[p + 1]
                link[k] = head[r]
                head[r] = k
            k = knext
        d = x[j]
        if not d > 0.0 or not np.isfinite(d):
            return j
        d = np.sqrt(d)
        Lx[p0] = d
        x[j] = 0.0
        for p in range(p0 + 1, p1):
            Lx[p] = x[Li[p]] / d
            x[Li[p]] = 0.0
        pos[j] = p0 + 1
        if p0 + 1 < p1:
            r = Li[p0 + 1]
            link[j] = head[r]
            head[r] = j
    return -1


@njit(cache=True)
def _lsolve(Lp, Li, Lx, X):
    n = Lp.size - 1
    for j in range(n):
        X[j, :] /= Lx[Lp[j]]
        for p in range(Lp[j] + 1, Lp[j + 1]):
            X[Li[p], :] -= Lx[p] * X[j, :]


@njit(cache=True)
def _ltsolve(Lp, Li, Lx, X):
    n = Lp.size - 1
    for j in range(n - 1, -1, -1):
        for p in range(Lp[j] + 1, Lp[j + 1]):
            X[j, :] -= Lx[p] * X[Li[p], :]
        X[j, :] /= Lx[Lp[j]]


@dataclass(frozen=True, eq=False)
class Symbolic:
    """Structure of the factor of ``A[perm][:, perm]``.

    ``a2l[e]`` is the position in ``Li`` of stored entry ``e`` of the input.
    """

    n: int
    perm: Permutation
    Lp: np.ndarray
    Li: np.ndarray
    parent: np.ndarray
    gamma: np.ndarray
    a2l: np.ndarray
    pattern_id: str

    @property
    def nnz(self):
        return int(self.Lp[-1])

    def locate(self, rows, cols):
        """L positions of original-order coordinates; -1 where absent."""
        pinv = self.perm.inverse
        pr, pc = pinv[np.asarray(rows)], pinv[np.asarray(cols)]
        return _locate(self.Lp, self.Li, np.maximum(pr, pc), np.minimum(pr, pc))


def symbolic_analysis(A, perm):
    """Elimination tree, factor pattern and column counts."""
    A.validate()
    n = A.n
    if perm.n != n:
        raise SparseStructureError("permutation size does not match matrix")
    pinv = perm.inverse
    rows, cols = pinv[A.indices], pinv[A.col_index]
    hi, lo = np.maximum(rows, cols), np.minimum(rows, cols)
    # upper triangle of C by columns: column k holds rows i <= k
    U = sp.csc_matrix((np.ones(hi.size), (lo, hi)), shape=(n, n))
    U.sort_indices()
    Up, Ui = U.indptr.astype(np.int64), U.indices.astype(np.int64)
    parent = _etree(n, Up, Ui)
    Lp, Li, gamma = _symbolic(n, Up, Ui, parent)
    a2l = _locate(Lp, Li, hi, lo)
    for arr in (Lp, Li, parent, gamma, a2l):
        arr.setflags(write=False)
    return Symbolic(n, perm, Lp, Li, parent, gamma, a2l, A.pattern_id)


class _SymbolicCache:
    def __init__(self, maxsize=32):
        self._items = OrderedDict()
        self._lock = Lock()
        self.maxsize = maxsize
        self.hits = 0
        self.misses = 0

    def get(self, A, perm=None):
        key = (A.pattern_id, None if perm is None else perm.key)
        with self._lock:
            if key in self._items:
                self._items.move_to_end(key)
                self.hits += 1
                return self._items[key]
        if perm is None:
            perm = fill_reducing_order(A)
        S = symbolic_analysis(A, perm)
        with self._lock:
            self.misses += 1
            self._items[key] = S
            while len(self._items) > self.maxsize:
                self._items.popitem(last=False)
        return S

    def clear(self):
        with self._lock:
            self._items.clear()
            self.hits = self.misses = 0


symbolic_cache = _SymbolicCache()


@dataclass(frozen=True, eq=False)
class CholFactor:
    """``L @ L.T == A[perm][:, perm]`` with ``L`` in lower CSC storage."""

    symbolic: Symbolic
    Lx: np.ndarray

    @property
    def n(self):
        return self.symbolic.n

    @property
    def perm(self):
        return self.symbolic.perm

    @property
    def gamma(self):
        """Off-diagonal nonzero count of every column of ``L``."""
        return self.symbolic.gamma

    @property
    def diag(self):
        return self.Lx[self.symbolic.Lp[:-1]]

    @property
    def pattern_id(self):
        return self.symbolic.pattern_id

    @property
    def nnz(self):
        return self.symbolic.nnz

    @property
    def L(self):
        S = self.symbolic
        return SparseSymMatrix(S.n, S.Lp, S.Li, self.Lx)

    def L_scipy(self):
        S = self.symbolic
        return sp.csc_matrix((self.Lx, S.Li, S.Lp), shape=(S.n, S.n))

    def _rhs(self, B):
        B = np.asarray(B, dtype=float)
        if B.shape[0] != self.n:
            raise ValueError(f"right-hand side has {B.shape[0]} rows, expected {self.n}")
        return B

    def solve_lower(self, B):
        """``L^{-1} (P B)``; ``W.T @ W == B.T @ A^{-1} @ B`` for ``W`` returned."""
        B = self._rhs(B)
        X = np.ascontiguousarray(B[self.perm.perm].reshape(self.n, -1))
        S = self.symbolic
        _lsolve(S.Lp, S.Li, self.Lx, X)
        return X.reshape(B.shape)

    def solve(self, B):
        """``A^{-1} B`` in the caller's (unpermuted) row order."""
        B = self._rhs(B)
        X = np.ascontiguousarray(B[self.perm.perm].reshape(self.n, -1))
        S = self.symbolic
        _lsolve(S.Lp, S.Li, self.Lx, X)
        _ltsolve(S.Lp, S.Li, self.Lx, X)
        out = np.empty_like(X)
        out[self.perm.perm] = X
        return out.reshape(B.shape)

    def log_det(self):
        return 2.0 * float(np.sum(np.log(self.diag)))


def chol_factorize(A, perm=None, cache=True):
    """Factorize a sparse SPD matrix.

    Parameters
    ----------
    A : SparseSymMatrix
    perm : Permutation, optional
        Defaults to the minimum degree ordering of ``A``'s pattern.
    cache : bool
        Reuse the symbolic analysis of previously seen patterns.

    Raises
    ------
    NotPositiveDefiniteError
        With the failing column; no jitter is added here.
    """
    if cache:
        S = symbolic_cache.get(A, perm)
    else:
        S = symbolic_analysis(A, perm if perm is not None else fill_reducing_order(A))
    Lx = np.zeros(S.nnz)
    Lx[S.a2l] = A.data
    fail = _numeric(S.n, S.Lp, S.Li, Lx)
    if fail >= 0:
        raise NotPositiveDefiniteError(fail)
    Lx.setflags(write=False)
    return CholFactor(S, Lx)


def solve_lower(factor, B):
    return factor.solve_lower(B)


def solve_spd(factor, B):
    return factor.solve(B)


def log_det(factor):
    return factor.log_det()
