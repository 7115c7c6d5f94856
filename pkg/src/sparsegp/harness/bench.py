"""Timing of one objective-plus-gradient evaluation across problem sizes."""

import time

import numpy as np

from ..data import Dataset
from ..models import fit_state

GENERATORS = ("lattice1d", "lattice2d")


def lattice_data(n, generator="lattice1d", seed=0):
    """Unit-spaced lattice with a smooth trend, a rough term and noise."""
    rng = np.random.default_rng(seed)
    if generator == "lattice1d":
        X = np.arange(n, dtype=float)[:, None]
    elif generator == "lattice2d":
        side = int(np.ceil(np.sqrt(n)))
        g = np.arange(side, dtype=float)
        X = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)[:n]
    else:
        raise ValueError(f"unknown generator {generator!r}; choose from {GENERATORS}")
    span = np.ptp(X, axis=0) + 1.0
    phase = rng.uniform(0, 2 * np.pi, X.shape[1])
    y = (np.sin(2 * np.pi * X / span + phase).sum(axis=1)
         + 0.3 * np.sin(X / 3.0).sum(axis=1) + 0.1 * rng.standard_normal(n))
    return Dataset(X, y)


def _stats(state, n):
    lam = getattr(state, "lam", None)
    out = {"lambda_nnz": None, "lambda_density": None, "factor_nnz": None, "takahashi_ops": None}
    if lam is None:
        return out
    if hasattr(lam, "factor"):
        g = lam.factor.gamma.astype(np.int64)
        out.update(lambda_nnz=int(lam.A.nnz_full), factor_nnz=int(lam.factor.nnz),
                   takahashi_ops=int(np.sum(g * (g + 1))))
    elif hasattr(lam, "blocks"):
        out["lambda_nnz"] = int(sum(b.size ** 2 for b in lam.blocks))
    else:
        out["lambda_nnz"] = n
    out["lambda_density"] = out["lambda_nnz"] / float(n) ** 2
    return out


def time_objective(spec, data, repeats=3):
    """Best-of-``repeats`` wall time for building the state and its gradient."""
    best, state = np.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        state = fit_state(spec, None, data)
        state.gradient()
        best = min(best, time.perf_counter() - t0)
    return best, state


def bench_scaling(template, sizes, generator="lattice1d", seed=0, repeats=3, warmup=True):
    """One row per size: seconds per objective+gradient and sparsity statistics."""
    sizes = [int(s) for s in sizes]
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    if warmup:
        small = lattice_data(max(template.m, 64) + 16, generator, seed)
        fit_state(template.build(small), None, small).gradient()
    rows = []
    for n in sizes:
        data = lattice_data(n, generator, seed)
        spec = template.build(data)
        seconds, state = time_objective(spec, data, repeats)
        rows.append({"n": n, "m": template.m, "kind": spec.kind, "seconds": seconds,
                     **_stats(state, n)})
    return rows


def format_table(rows):
    cols = ["n", "m", "seconds", "lambda_nnz", "lambda_density", "factor_nnz", "takahashi_ops"]
    lines = ["  ".join(f"{c:>14}" for c in cols)]
    for r in rows:
        cells = []
        for c in cols:
            v = r.get(c)
            cells.append(f"{'-':>14}" if v is None else
                         f"{v:>14.4g}" if isinstance(v, float) else f"{v:>14}")
        lines.append("  ".join(cells))
    return "\n".join(lines)
