"""Full GP, FIC, PIC and CS+FIC behind one interface.

All functions take a :class:`ModelSpec`, a log-parameter vector ``theta``
(``None`` keeps the values stored in the spec) and a dataset exposing ``X``
and ``y``.
"""

import numpy as np

from ..errors import NotPositiveDefiniteError, NumericalError
from .full import FullFitState
from .lowrank import LowRankFitState
from .spec import BlockPartition, InducingSet, ModelSpec, PredictiveDistribution


def fit_state(spec, theta, data):
    """Build the cached factorizations for ``spec`` at ``theta``."""
    spec = spec.with_theta(theta)
    X, y = np.asarray(data.X, dtype=float), np.asarray(data.y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != spec.dim:
        raise ValueError(f"data has {X.shape[1]} input columns, model expects {spec.dim}")
    if spec.kind == "pic" and spec.blocks.n != X.shape[0]:
        raise ValueError("block partition does not cover the training set")
    engine = FullFitState if spec.kind == "full" else LowRankFitState
    try:
        with np.errstate(all="ignore"):
            state = engine(spec, X, y)
    except (NotPositiveDefiniteError, np.linalg.LinAlgError) as err:
        raise NumericalError(f"{spec.kind}: {err}", spec.theta()) from err
    if not np.isfinite(state.nlml):
        raise NumericalError(f"{spec.kind}: non-finite marginal likelihood", spec.theta())
    state.theta = spec.theta()
    return state


def neg_log_marginal(spec, theta, data):
    return float(fit_state(spec, theta, data).nlml)


def neg_log_marginal_grad(spec, theta, data):
    return fit_state(spec, theta, data).gradient()


def objective_and_grad(spec, theta, data):
    state = fit_state(spec, theta, data)
    return float(state.nlml), state.gradient()


def predict(spec, theta, data, Xs, state=None):
    state = state or fit_state(spec, theta, data)
    return state.predict(_test_inputs(Xs, state.spec.dim))


def predict_components(spec, theta, data, Xs, state=None):
    """Per-component posteriors keyed by kernel name (``+``-joined for groups)."""
    if len(spec.kernels) < 2:
        raise ValueError("component predictions need at least two additive kernels")
    state = state or fit_state(spec, theta, data)
    return state.predict_components(_test_inputs(Xs, state.spec.dim))


def _test_inputs(Xs, dim):
    Xs = np.asarray(Xs, dtype=float)
    if Xs.ndim == 1:
        Xs = Xs[:, None] if dim == 1 else Xs[None, :]
    if Xs.shape[1] != dim:
        raise ValueError(f"test inputs have {Xs.shape[1]} columns, model expects {dim}")
    return Xs


__all__ = [
    "BlockPartition",
    "InducingSet",
    "ModelSpec",
    "PredictiveDistribution",
    "fit_state",
    "neg_log_marginal",
    "neg_log_marginal_grad",
    "objective_and_grad",
    "predict",
    "predict_components",
]
