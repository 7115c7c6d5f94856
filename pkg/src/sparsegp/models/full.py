"""Exact GP with a dense covariance."""

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .spec import PredictiveDistribution
from ._jitter import jittered_cholesky

LOG_2PI = np.log(2.0 * np.pi)


class FullFitState:
    """Cached Cholesky factor of ``K + noise * I`` and ``alpha = K_y^{-1} y``."""

    def __init__(self, spec, X, y):
        self.spec = spec
        self.X, self.y = X, y
        n = X.shape[0]
        K = sum(k.K(X) for k in spec.kernels)
        Ky = K + spec.noise * np.eye(n)
        self.L, self.jitter = jittered_cholesky(Ky, spec.jitter, spec.max_jitter)
        self.alpha = cho_solve((self.L, True), y)
        self.log_det = 2.0 * np.sum(np.log(np.diag(self.L)))
        self.nlml = 0.5 * (self.log_det + y @ self.alpha + n * LOG_2PI)

    def gradient(self):
        spec, X = self.spec, self.X
        n = X.shape[0]
        W = cho_solve((self.L, True), np.eye(n))
        W -= np.outer(self.alpha, self.alpha)
        grads = []
        for k in spec.kernels:
            for p in k.param_names:
                grads.append(0.5 * np.sum(W * k.grad(X, None, p)))
        grads.append(0.5 * spec.noise * np.trace(W))
        return np.array(grads)

    def _components(self, Xs, kernels):
        Ks = sum(k.K(Xs, self.X) for k in kernels)
        v = solve_triangular(self.L, Ks.T, lower=True)
        kss = sum(k.diag(Xs) for k in kernels)
        return Ks @ self.alpha, kss - np.sum(v * v, axis=0)

    def predict(self, Xs):
        mean, var = self._components(Xs, self.spec.kernels)
        return PredictiveDistribution.build(mean, var, self.spec.noise)

    def predict_components(self, Xs):
        out = {}
        for k in self.spec.kernels:
            mean, var = self._components(Xs, (k,))
            out[k.name] = PredictiveDistribution.build(mean, var, self.spec.noise)
        return out
