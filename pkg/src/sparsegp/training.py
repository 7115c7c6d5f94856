"""MAP estimation of log-parameters.

The default priors are half Student-t densities: length-scales use
``nu=3, scale=2`` and magnitudes (noise variance included) ``nu=0.3, scale=2``.
A Student-t with ``nu <= 2`` has no variance, so "variance 4" is read as the
squared scale of the unfolded distribution.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .errors import NumericalError, TrainingError
from .models import objective_and_grad

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HalfStudentTPrior:
    """Half Student-t density on a positive parameter value."""

    nu: float
    scale: float

    def __post_init__(self):
        if not (self.nu > 0 and self.scale > 0):
            raise ValueError("degrees of freedom and scale must be positive")

    def log_density(self, value):
        """Log density on the positive half-line (no log-scale Jacobian)."""
        nu, s = self.nu, self.scale
        z = np.asarray(value, dtype=float) / s
        const = (np.log(2.0) + gammaln((nu + 1) / 2) - gammaln(nu / 2)
                 - 0.5 * np.log(nu * np.pi) - np.log(s))
        return const - 0.5 * (nu + 1) * np.log1p(z * z / nu)


@dataclass(frozen=True)
class FlatPrior:
    """Improper uniform density on the log scale."""


def log_prior(prior, value):
    """Log prior of a positive parameter, expressed for its log-value.

    Returns the log density plus the ``log(value)`` Jacobian and the
    derivative of that sum with respect to ``log(value)``.
    """
    if isinstance(prior, FlatPrior) or prior is None:
        return 0.0, 0.0
    if not value > 0:
        raise ValueError("prior is only defined for positive values")
    u = value * value / (prior.nu * prior.scale ** 2)
    lp = float(prior.log_density(value)) + np.log(value)
    dlp = 1.0 - (prior.nu + 1) * u / (1.0 + u)
    return lp, float(dlp)


LENGTHSCALE_PRIOR = HalfStudentTPrior(3.0, 2.0)
MAGNITUDE_PRIOR = HalfStudentTPrior(0.3, 2.0)


def _param_kind(param):
    return "lengthscale" if param.startswith("lengthscale") else (
        "noise" if param == "noise" else "magnitude")


def default_priors(spec, lengthscale=LENGTHSCALE_PRIOR, magnitude=MAGNITUDE_PRIOR, noise=None):
    """One prior per entry of ``spec.theta()``."""
    table = {"lengthscale": lengthscale, "magnitude": magnitude,
             "noise": magnitude if noise is None else noise}
    return [table[_param_kind(p)] for _, p in spec.params().entries]


def flat_priors(spec):
    return [FlatPrior()] * spec.params().size


def map_objective(spec, theta, data, priors):
    """Negative log posterior (up to a constant) and its gradient in ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if len(priors) != theta.size:
        raise ValueError("need exactly one prior per parameter")
    f, g = objective_and_grad(spec, theta, data)
    g = g.copy()
    for i, prior in enumerate(priors):
        lp, dlp = log_prior(prior, float(np.exp(theta[i])))
        f -= lp
        g[i] -= dlp
    return f, g


@dataclass
class TrainConfig:
    max_iter: int = 500
    gtol: float = 1e-5
    ftol: float = 1e-10
    restarts: int = 2
    seed: int = 0
    init: str = "heuristic"
    memory: int = 10
    restart_spread: float = 1.0
    # box on every log-parameter; keeps variances from underflowing to zero
    log_bound: float | None = 20.0

    def __post_init__(self):
        if self.log_bound is not None and not self.log_bound > 0:
            raise ValueError("log_bound must be positive or None")
        if not (self.gtol > 0 and self.ftol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be at least 1")
        if self.init not in ("heuristic", "spec"):
            raise ValueError(f"unknown init policy {self.init!r}")


@dataclass
class TrainResult:
    theta: np.ndarray
    objective: float
    grad_norm: float
    n_iter: int
    converged: bool
    message: str
    init_objective: float
    restart: int
    trace: list = field(default_factory=list)
    restarts: list = field(default_factory=list)

    def to_dict(self):
        return {
            "theta": self.theta.tolist(),
            "objective": self.objective,
            "grad_norm": self.grad_norm,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "message": self.message,
            "init_objective": self.init_objective,
            "restart": self.restart,
            "trace": [{"objective": f, "time": t} for f, t in self.trace],
            "restarts": self.restarts,
        }


def initial_theta(spec, data):
    """Length-scales at 10% (global) or 1% (compact) of the data range,
    magnitudes splitting the target variance, noise at 10% of it."""
    X = np.asarray(data.X, dtype=float).reshape(len(data.y), -1)
    span = np.ptp(X, axis=0)
    span = np.where(span > 0, span, 1.0)
    var = float(np.var(data.y)) or 1.0
    nk = len(spec.kernels)
    theta = []
    for k in spec.kernels:
        frac = 0.01 if k.compact else 0.1
        theta.append(np.log(var / nk))
        theta.extend(np.log(frac * span))
    theta.append(np.log(0.1 * var))
    return np.array(theta)


def _run(spec, data, priors, theta0, cfg):
    t0 = time.perf_counter()
    trace = []

    def fun(theta):
        return map_objective(spec, theta, data, priors)

    bounds = None
    if cfg.log_bound is not None:
        theta0 = np.clip(theta0, -cfg.log_bound, cfg.log_bound)
        bounds = [(-cfg.log_bound, cfg.log_bound)] * theta0.size
    f0, _ = fun(theta0)
    trace.append((float(f0), 0.0))

    def callback(intermediate_result):
        trace.append((float(intermediate_result.fun), time.perf_counter() - t0))

    res = minimize(fun, theta0, jac=True, method="L-BFGS-B", callback=callback, bounds=bounds,
                   options={"maxiter": cfg.max_iter, "maxcor": cfg.memory,
                            "gtol": cfg.gtol, "ftol": cfg.ftol})
    g = np.asarray(res.jac)
    return TrainResult(
        theta=np.asarray(res.x, dtype=float), objective=float(res.fun),
        grad_norm=float(np.linalg.norm(g)), n_iter=int(res.nit),
        converged=bool(res.success), message=str(res.message),
        init_objective=float(f0), restart=0, trace=trace)


def train(spec, data, priors=None, cfg=None):
    """Minimize :func:`map_objective` with L-BFGS from one or more starts.

    Restart 0 starts from the configured initial point; later restarts
    perturb it with seeded Gaussian noise on the log scale.  The best
    successful restart is returned.
    """
    cfg = cfg or TrainConfig()
    priors = default_priors(spec) if priors is None else priors
    base = initial_theta(spec, data) if cfg.init == "heuristic" else spec.theta()
    rng = np.random.default_rng(cfg.seed)
    best, failures, summary = None, [], []
    for r in range(cfg.restarts):
        theta0 = base if r == 0 else base + cfg.restart_spread * rng.standard_normal(base.size)
        try:
            res = _run(spec, data, priors, theta0, cfg)
        except (NumericalError, np.linalg.LinAlgError, ValueError) as err:
            log.warning("restart %d failed: %s", r, err)
            failures.append({"restart": r, "error": str(err), "theta0": theta0.tolist()})
            summary.append({"restart": r, "failed": True, "error": str(err)})
            continue
        res.restart = r
        summary.append({"restart": r, "objective": res.objective, "n_iter": res.n_iter,
                        "converged": res.converged})
        if best is None or res.objective < best.objective:
            best = res
    if best is None:
        raise TrainingError("all optimization restarts failed", failures)
    best.restarts = summary
    return best
