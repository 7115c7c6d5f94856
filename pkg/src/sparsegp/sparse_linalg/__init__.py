"""Sparse SPD storage, ordering, Cholesky and partial inverse."""

from .cholesky import (
    CholFactor,
    Symbolic,
    chol_factorize,
    log_det,
    solve_lower,
    solve_spd,
    symbolic_analysis,
    symbolic_cache,
)
from .matrix import Permutation, SparseSymMatrix
from .ordering import fill_reducing_order, minimum_degree_order
from .takahashi import PartialInverse, sparse_trace_product, takahashi_partial_inverse

__all__ = [
    "CholFactor",
    "PartialInverse",
    "Permutation",
    "SparseSymMatrix",
    "Symbolic",
    "chol_factorize",
    "fill_reducing_order",
    "log_det",
    "minimum_degree_order",
    "solve_lower",
    "solve_spd",
    "sparse_trace_product",
    "symbolic_analysis",
    "symbolic_cache",
    "takahashi_partial_inverse",
]
