"""Inducing-input placement, block partitions and model templates."""

from dataclasses import dataclass

import numpy as np

from ..models import BlockPartition, InducingSet, ModelSpec


def _factorizations(m, dim):
    if dim == 1:
        yield (m,)
        return
    for a in range(1, m + 1):
        if m % a == 0:
            for rest in _factorizations(m // a, dim - 1):
                yield (a, *rest)


def grid_shape(m, ranges):
    """Most-square factorization of ``m`` with larger factors on longer ranges."""
    ranges = np.asarray(ranges, dtype=float)
    best = min({tuple(sorted(f, reverse=True)) for f in _factorizations(m, ranges.size)},
               key=lambda f: (f[0] / f[-1], f))
    order = np.argsort(-ranges, kind="stable")
    shape = np.empty(ranges.size, dtype=int)
    shape[order] = best
    return tuple(int(s) for s in shape)


def make_inducing_grid(data, m, mode="grid", seed=None):
    """Regular lattice over the data range, or ``m`` distinct data points."""
    if m < 1:
        raise ValueError("need at least one inducing input")
    X = data.X
    if mode == "subset":
        if m > data.n:
            raise ValueError(f"cannot draw {m} inducing inputs from {data.n} points")
        idx = np.random.default_rng(seed).choice(data.n, size=m, replace=False)
        return InducingSet(X[np.sort(idx)], placement="subset", seed=seed)
    if mode != "grid":
        raise ValueError(f"unknown inducing mode {mode!r}")
    lo, hi = X.min(axis=0), X.max(axis=0)
    shape = grid_shape(m, hi - lo)
    axes = [np.linspace(a, b, s) if s > 1 else np.array([(a + b) / 2])
            for a, b, s in zip(lo, hi, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return InducingSet(np.column_stack([g.ravel() for g in mesh]), placement="grid")


def _cell_labels(X, lo, span, h):
    counts = np.where(span > 0, np.maximum(1, np.ceil(span / h)), 1).astype(np.int64)
    cell = np.floor((X - lo) / h).astype(np.int64)
    cell = np.clip(cell, 0, counts - 1)
    return np.ravel_multi_index(cell.T, counts)


def make_blocks(data, block_size, max_refine=400):
    """Axis-aligned cells with roughly ``block_size`` points each.

    The cell side starts at the value giving ``n / block_size`` cells over the
    bounding box and shrinks (cell count x1.25 per step) until the number of
    nonempty cells reaches ``round(n / block_size)``.  Empty cells are dropped.
    """
    n = data.n
    if not 1 <= block_size <= n:
        raise ValueError(f"block size must be in [1, {n}]")
    target = max(1, int(round(n / block_size)))
    X = data.X
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    live = span[span > 0]
    if target == 1 or live.size == 0:
        return BlockPartition(np.zeros(n, dtype=np.int64))
    h = float(np.prod(live) / target) ** (1.0 / live.size)
    shrink = 1.25 ** (1.0 / live.size)
    for _ in range(max_refine):
        labels = _cell_labels(X, lo, span, h)
        if np.unique(labels).size >= target:
            break
        h /= shrink
    return BlockPartition(labels)


@dataclass(frozen=True, eq=False)
class ModelTemplate:
    """A model description that is completed for a particular training set.

    Inducing inputs and blocks depend on the data, so cross-validation
    builds one :class:`ModelSpec` per fold from the same template.
    """

    kind: str
    kernels: tuple
    noise: float = 0.1
    m: int = 24
    inducing: str = "grid"
    block_size: int | None = None
    seed: int | None = None
    jitter: float = 1e-8
    pic_test: str = "fic"

    def build(self, data, seed=None):
        seed = self.seed if seed is None else seed
        inducing = blocks = None
        if self.kind != "full":
            inducing = make_inducing_grid(data, self.m, self.inducing, seed)
        if self.kind == "pic":
            blocks = make_blocks(data, min(self.block_size or self.m, data.n))
        return ModelSpec(self.kind, self.kernels, self.noise, inducing, blocks,
                         jitter=self.jitter, pic_test=self.pic_test)

    def to_dict(self):
        return {
            "kind": self.kind,
            "kernels": [{"name": k.name, "type": k.kind,
                         "magnitude": float(np.exp(k.log_magnitude)),
                         "lengthscale": np.exp(k.log_lengthscale).tolist()}
                        for k in self.kernels],
            "noise": self.noise,
            "m": self.m,
            "inducing": self.inducing,
            "block_size": self.block_size,
            "pic_test": self.pic_test,
            "seed": self.seed,
        }


def spec_summary(spec):
    out = {"kind": spec.kind, "params": spec.params().as_records()}
    if spec.inducing is not None:
        out["m"] = spec.inducing.m
    if spec.blocks is not None:
        out["blocks"] = spec.blocks.count
    return out


__all__ = ["ModelTemplate", "grid_shape", "make_blocks", "make_inducing_grid", "spec_summary"]
