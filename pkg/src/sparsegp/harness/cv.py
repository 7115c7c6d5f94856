"""K-fold cross-validation with pooled RMSE and MLPD."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalError, TrainingError
from ..models import fit_state
from ..training import TrainConfig, default_priors, train

log = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


def fold_indices(n, k, seed):
    """Seeded random partition of ``range(n)`` into ``k`` folds (sizes differ by <= 1)."""
    if k < 2 or n < k:
        raise ValueError(f"need 2 <= folds <= n, got folds={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def log_predictive_density(y, mean, obs_var):
    """Pointwise ``log N(y | mean, obs_var)``."""
    r = np.asarray(y) - mean
    return -0.5 * (LOG_2PI + np.log(obs_var) + r * r / obs_var)


@dataclass
class CVReport:
    folds: list
    rmse: float
    mlpd: float
    n_points: int
    n_failed: int
    seed: int
    model: dict = field(default_factory=dict)

    @property
    def coverage(self):
        done = sum(f["n_test"] for f in self.folds if not f["failed"])
        return done / max(self.n_points, 1)

    def to_dict(self):
        return {"rmse": self.rmse, "mlpd": self.mlpd, "n_points": self.n_points,
                "n_failed": self.n_failed, "coverage": self.coverage, "seed": self.seed,
                "model": self.model, "folds": self.folds}


def run_fold(template, data, train_idx, test_idx, priors, cfg, seed):
    """Train on one split and score the held-out points in original units.

    Returns a dict with squared errors and log densities per held-out point.
    """
    train_data = data.subset(train_idx).standardized()
    test = data.subset(test_idx)
    out = {"n_train": int(train_idx.size), "n_test": int(test_idx.size), "failed": False}
    t0 = time.perf_counter()
    try:
        spec = template.build(train_data, seed=seed)
        fold_priors = default_priors(spec) if priors is None else priors
        fold_cfg = TrainConfig(**{**cfg.__dict__, "seed": seed})
        res = train(spec, train_data, fold_priors, fold_cfg)
        t1 = time.perf_counter()
        state = fit_state(spec, res.theta, train_data)
        pred = state.predict(test.X)
    except (NumericalError, TrainingError) as err:
        log.warning("fold failed: %s", err)
        out.update(failed=True, error=str(err), train_time=time.perf_counter() - t0)
        return out
    t2 = time.perf_counter()
    mean = train_data.unscale_mean(pred.mean)
    obs_var = train_data.unscale_var(pred.obs_var)
    y = test.raw_targets()
    out.update(
        sq_err=(y - mean) ** 2,
        log_density=log_predictive_density(y, mean, obs_var),
        theta=res.theta.tolist(),
        objective=res.objective,
        converged=res.converged,
        train_time=t1 - t0,
        predict_time=t2 - t1,
    )
    return out


def kfold_cv(template, data, k=10, seed=0, priors=None, cfg=None, workers=1):
    """Cross-validate ``template`` on ``data``.

    Fold assignment and every fold's training seed derive from ``seed``, so
    results do not depend on ``workers``.
    """
    cfg = cfg or TrainConfig()
    folds = fold_indices(data.n, k, seed)
    subseeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k)]
    all_idx = np.arange(data.n)
    jobs = [(template, data, np.setdiff1d(all_idx, f), f, priors, cfg, s)
            for f, s in zip(folds, subseeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_fold, *zip(*jobs)))
    else:
        results = [run_fold(*job) for job in jobs]

    sq, ld, summary = [], [], []
    for i, r in enumerate(results):
        entry = {"fold": i, "seed": jobs[i][-1], **{key: v for key, v in r.items()
                                                   if key not in ("sq_err", "log_density")}}
        if not r["failed"]:
            sq.append(r["sq_err"])
            ld.append(r["log_density"])
            entry["rmse"] = float(np.sqrt(np.mean(r["sq_err"])))
            entry["mlpd"] = float(np.mean(r["log_density"]))
        summary.append(entry)
    n_failed = sum(r["failed"] for r in results)
    if sq:
        rmse = float(np.sqrt(np.mean(np.concatenate(sq))))
        mlpd = float(np.mean(np.concatenate(ld)))
    else:
        rmse = mlpd = float("nan")
    model = template.to_dict() if hasattr(template, "to_dict") else {}
    return CVReport(summary, rmse, mlpd, data.n, n_failed, seed, model)
