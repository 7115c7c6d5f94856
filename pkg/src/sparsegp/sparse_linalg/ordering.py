"""Fill-reducing symmetric orderings."""

import heapq

import numpy as np
from numba import njit
from numba.typed import List

from ..errors import SparseStructureError
from .matrix import Permutation, SparseSymMatrix


@njit(cache=True)
def _minimum_degree(n, indptr, indices):
    adj = List()
    for i in range(n):
        adj.append(indices[indptr[i]:indptr[i + 1]].copy())
    deg = np.empty(n, np.int64)
    heap = [(np.int64(0), np.int64(0)) for _ in range(0)]
    for i in range(n):
        deg[i] = adj[i].size
        heap.append((deg[i], np.int64(i)))
    heapq.heapify(heap)

    eliminated = np.zeros(n, np.bool_)
    stamp = np.zeros(n, np.int64)
    tag = 0
    order = np.empty(n, np.int64)
    count = 0
    while count < n:
        d, v = heapq.heappop(heap)
        if eliminated[v] or d != deg[v]:
            continue
        eliminated[v] = True
        order[count] = v
        count += 1
        nbrs = adj[v]
        for u in nbrs:
            # eliminating v turns its neighbourhood into a clique
            tag += 1
            stamp[u] = tag
            stamp[v] = tag
            au = adj[u]
            buf = np.empty(au.size + nbrs.size, np.int64)
            c = 0
            for w in au:
                if stamp[w] != tag:
                    stamp[w] = tag
                    buf[c] = w
                    c += 1
            for w in nbrs:
                if stamp[w] != tag:
                    stamp[w] = tag
                    buf[c] = w
                    c += 1
            adj[u] = buf[:c].copy()
            deg[u] = c
            heapq.heappush(heap, (np.int64(c), u))
        adj[v] = np.empty(0, np.int64)
    return order


def _check_pattern(A):
    if not isinstance(A, SparseSymMatrix):
        A = SparseSymMatrix.from_scipy(A)
    A.validate()
    return A


def off_diagonal_graph(A):
    """Full symmetric adjacency (CSR, no self loops) of a stored pattern."""
    A = _check_pattern(A)
    S = A.lower().copy()
    S.data = np.ones_like(S.data)
    G = (S + S.T).tocsr()
    G.setdiag(0)
    G.eliminate_zeros()
    G.sort_indices()
    return G


def minimum_degree_order(A):
    """Minimum degree ordering on the explicit elimination graph.

    Ties are broken by the smaller vertex index, so the result is
    deterministic.
    """
    G = off_diagonal_graph(A)
    n = G.shape[0]
    order = _minimum_degree(n, G.indptr.astype(np.int64), G.indices.astype(np.int64))
    return Permutation(order)


def fill_reducing_order(A, method="mindeg"):
    """Return a :class:`Permutation` intended to reduce Cholesky fill.

    Parameters
    ----------
    A : SparseSymMatrix or scipy sparse matrix
        Only the structure is used; it must have a full diagonal.
    method : {"mindeg", "natural"}
    """
    A = _check_pattern(A)
    if method == "natural":
        return Permutation.identity(A.n)
    if method == "mindeg":
        return minimum_degree_order(A)
    raise SparseStructureError(f"unknown ordering method {method!r}")
