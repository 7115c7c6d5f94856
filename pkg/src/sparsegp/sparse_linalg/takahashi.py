"""Entries of a sparse SPD inverse on the pattern of its Cholesky factor."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

from ..errors import SparseStructureError
from .matrix import SparseSymMatrix


@njit(cache=True)
def _takahashi(Lp, Li, Lx):
    """Backward recursion Z_ij = d_ij / L_ii^2 - sum_{k>i} L_ki Z_kj / L_ii.

    Z is stored on L's pattern (lower triangle).  For column i with
    off-diagonal rows R, every pair k, j in R is itself in the pattern, so
    Z_kj sits in column min(k, j).  Returns the values and the number of
    multiply-adds spent.
    """
    n = Lp.size - 1
    Zx = np.zeros(Lx.size)
    mark = np.full(n, -1, np.int64)
    lval = np.zeros(n)
    acc = np.zeros(n)
    ops = 0
    for i in range(n - 1, -1, -1):
        p0, p1 = Lp[i], Lp[i + 1]
        d = Lx[p0]
        for p in range(p0 + 1, p1):
            r = Li[p]
            mark[r] = i
            lval[r] = Lx[p]
            acc[r] = 0.0
        for p in range(p0 + 1, p1):
            k = Li[p]
            lki = Lx[p]
            for q in range(Lp[k], Lp[k + 1]):
                j = Li[q]
                if mark[j] != i:
                    continue
                z = Zx[q]  # Z_jk, j >= k
                acc[j] += lki * z
                ops += 1
                if j != k:
                    acc[k] += lval[j] * z
                    ops += 1
        s = 0.0
        for p in range(p0 + 1, p1):
            zji = -acc[Li[p]] / d
            Zx[p] = zji
            s += Lx[p] * zji
            ops += 1
        Zx[p0] = 1.0 / (d * d) - s / d
    return Zx, ops


@njit(cache=True)
def _trace_on_positions(Zx, pos, weights, values):
    t = 0.0
    for e in range(pos.size):
        t += weights[e] * Zx[pos[e]] * values[e]
    return t


@dataclass(frozen=True, eq=False)
class PartialInverse:
    """``A^{-1}`` restricted to the symmetrized pattern of the factor.

    ``Zx`` is laid out on the factor's (permuted) storage; :attr:`matrix`
    presents the same entries in the original ordering.
    """

    factor: object
    Zx: np.ndarray
    ops: int

    @property
    def pattern_id(self):
        return self.factor.pattern_id

    @cached_property
    def matrix(self):
        S = self.factor.symbolic
        p = S.perm.perm
        cols = np.repeat(np.arange(S.n), np.diff(S.Lp))
        return SparseSymMatrix.from_triplets(S.n, p[S.Li], p[cols], self.Zx)

    def diagonal(self):
        """``diag(A^{-1})`` in the original ordering."""
        S = self.factor.symbolic
        out = np.empty(S.n)
        out[S.perm.perm] = self.Zx[S.Lp[:-1]]
        return out

    def positions(self, B):
        """Factor-storage positions of ``B``'s stored entries."""
        S = self.factor.symbolic
        if B.pattern_id == S.pattern_id:
            return S.a2l
        pos = S.locate(B.indices, B.col_index)
        if np.any(pos < 0):
            raise SparseStructureError("pattern of B is not contained in the factor pattern")
        return pos


def takahashi_partial_inverse(factor):
    """Evaluate ``Z = A^{-1}`` on every symbolically nonzero position of ``L``."""
    S = factor.symbolic
    Zx, ops = _takahashi(S.Lp, S.Li, factor.Lx)
    Zx.setflags(write=False)
    return PartialInverse(factor, Zx, int(ops))


def sparse_trace_product(Z, B):
    """``tr(A^{-1} B)`` for symmetric sparse ``B`` using only stored entries of ``Z``."""
    if B.n != Z.factor.n:
        raise SparseStructureError("dimension mismatch")
    pos = Z.positions(B)
    weights = np.where(B.indices == B.col_index, 1.0, 2.0)
    return float(_trace_on_positions(Z.Zx, pos, weights, B.data))
