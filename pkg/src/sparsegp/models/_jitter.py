import numpy as np

from ..errors import NotPositiveDefiniteError
from ..sparse_linalg import chol_factorize


def _escalation(start, max_rel, always):
    rel = start if always else 0.0
    while rel <= max_rel * (1 + 1e-12):
        yield rel
        rel = start if rel == 0.0 else rel * 10.0


def jittered_cholesky(K, start=1e-8, max_rel=1e-2, always=False):
    """Dense lower Cholesky of ``K + rel * mean(diag K) * I``.

    ``rel`` starts at 0 (or ``start`` when ``always``) and grows tenfold on
    failure.  Returns ``(L, rel)``.
    """
    if not np.all(np.isfinite(K)):
        raise NotPositiveDefiniteError(-1, "matrix has non-finite entries")
    scale = float(np.mean(np.diag(K)))
    eye = np.eye(K.shape[0])
    for rel in _escalation(start, max_rel, always):
        try:
            return np.linalg.cholesky(K + rel * scale * eye if rel else K), rel
        except np.linalg.LinAlgError:
            continue
    raise NotPositiveDefiniteError(-1, f"factorization failed with jitter up to {max_rel:g}")


def jittered_sparse_cholesky(A, start=1e-8, max_rel=1e-2):
    """Sparse factor of ``A``; a constant diagonal shift is added only on failure."""
    scale = float(np.mean(A.diagonal()))
    last = None
    for rel in _escalation(start, max_rel, False):
        try:
            M = A.add_diagonal(rel * scale) if rel else A
            return chol_factorize(M), rel
        except NotPositiveDefiniteError as err:
            last = err
    raise last
