"""Data ingestion, experiment design, cross-validation, benchmarks and the CLI."""

from .bench import bench_scaling, lattice_data
from .config import ConfigError, RunConfig
from .cv import CVReport, fold_indices, kfold_cv, log_predictive_density
from .design import ModelTemplate, grid_shape, make_blocks, make_inducing_grid
from .io import emit_report, load_csv, read_report

__all__ = [
    "CVReport",
    "ConfigError",
    "ModelTemplate",
    "RunConfig",
    "bench_scaling",
    "emit_report",
    "fold_indices",
    "grid_shape",
    "kfold_cv",
    "lattice_data",
    "load_csv",
    "log_predictive_density",
    "make_blocks",
    "make_inducing_grid",
    "read_report",
]
