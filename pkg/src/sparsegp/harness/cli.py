"""``sparsegp`` command line: fit, predict, cv and bench.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

import argparse
import csv
import logging
import sys
import time

import numpy as np

from ..errors import DataError, NumericalError, TrainingError
from ..models import fit_state
from ..training import train
from .bench import GENERATORS, bench_scaling, format_table
from .config import ConfigError, RunConfig
from .cv import kfold_cv
from .design import spec_summary
from .io import emit_report, load_csv, prediction_table, read_report

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("sparsegp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers: {text!r}")
    if not sizes or any(s < 2 for s in sizes):
        raise argparse.ArgumentTypeError("sizes must be integers >= 2")
    return sizes


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--data", help="CSV with a header row; last column is the target by default")
    shared.add_argument("--model", choices=["full", "fic", "pic", "csfic"], help="model kind")
    shared.add_argument("--m", type=_positive, help="number of inducing inputs")
    shared.add_argument("--inducing", choices=["grid", "subset"], help="inducing placement")
    shared.add_argument("--block-size", type=_positive, help="target points per block (pic)")
    shared.add_argument("--kernels", metavar="CONFIG", help="YAML configuration file")
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--out", default="out", help="output directory")
    shared.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="sparsegp", description="Additive sparse Gaussian process regression.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("fit", parents=[shared], help="MAP-train a model and report parameters")
    pr = sub.add_parser("predict", parents=[shared], help="predict at test inputs")
    pr.add_argument("--test", help="CSV of test inputs (default: training inputs)")
    pr.add_argument("--params", help="report.json from a previous fit (skips training)")
    cv = sub.add_parser("cv", parents=[shared], help="k-fold cross-validation")
    cv.add_argument("--folds", type=_positive, default=10)
    cv.add_argument("--workers", type=_positive, default=1)
    b = sub.add_parser("bench", parents=[shared], help="objective+gradient timing vs n")
    b.add_argument("--sizes", type=_sizes, default=[1000, 2000, 4000])
    b.add_argument("--generator", choices=GENERATORS, default="lattice1d")
    b.add_argument("--repeats", type=_positive, default=3)
    return p


def _load(args, cfg):
    if not args.data:
        raise UsageError("--data is required")
    return load_csv(args.data, **cfg.data_schema())


def _template(args, cfg, dim):
    return cfg.template(dim, args.model, args.m, args.inducing, args.block_size, args.seed)


def _fit(args, cfg, data):
    std = data.standardized()
    spec = _template(args, cfg, data.dim).build(std)
    t0 = time.perf_counter()
    res = train(spec, std, cfg.priors_for(spec), cfg.train_config(args.seed))
    report = {
        "command": args.command,
        "data": {"path": args.data, "n": data.n, "dropped": data.dropped,
                 "columns": list(data.columns), "y_shift": std.y_shift, "y_scale": std.y_scale},
        "model": spec_summary(spec.with_theta(res.theta)),
        "train": res.to_dict(),
        "train_seconds": time.perf_counter() - t0,
        "seed": args.seed,
    }
    return std, spec, res.theta, report


def cmd_fit(args, cfg):
    data = _load(args, cfg)
    std, spec, theta, report = _fit(args, cfg, data)
    state = fit_state(spec, theta, std)
    table = _predictions(state, std, data.X, data.y, data.columns[:-1])
    paths = emit_report(report, args.out, table, name="fit")
    print(f"objective {report['train']['objective']:.6g}  "
          f"converged {report['train']['converged']}  -> {paths['report']}")


def _predictions(state, std, X, truth, names):
    pred = state.predict(X)
    split = state.spec.kind in ("full", "csfic") and len(state.spec.kernels) > 1
    comps = state.predict_components(X) if split else {}
    scale = std.y_scale
    pred.mean = std.unscale_mean(pred.mean)
    pred.var = std.unscale_var(pred.var)
    pred.noise = pred.noise * scale ** 2
    for c in comps.values():
        # components are zero-mean parts of the latent; only the total carries the shift
        c.mean = c.mean * scale
    return prediction_table(X, pred, truth, comps, names)


def cmd_predict(args, cfg):
    data = _load(args, cfg)
    if args.params:
        prev = read_report(args.params)
        std = data.standardized()
        spec = _template(args, cfg, data.dim).build(std)
        theta = np.array(prev["train"]["theta"])
        report = {"command": "predict", "params": args.params}
    else:
        std, spec, theta, report = _fit(args, cfg, data)
    state = fit_state(spec, theta, std)
    if args.test:
        X, truth = _load_inputs(args.test, data, cfg.data_schema()["missing"])
    else:
        X, truth = data.X, data.y
    table = _predictions(state, std, X, truth, data.columns[:-1])
    report["n_test"] = int(X.shape[0])
    paths = emit_report(report, args.out, table, name="predict")
    print(f"{X.shape[0]} predictions -> {paths['predictions']}")


def _load_inputs(path, train_data, missing):
    """Test CSV: the training input columns, plus the target column if present."""
    names = list(train_data.columns[:-1])
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh), [])]
    target = train_data.columns[-1] if train_data.columns[-1] in header else None
    if target is not None:
        d = load_csv(path, inputs=names, target=target, missing=missing)
        return d.X, d.y
    absent = [c for c in names if c not in header]
    if absent:
        raise DataError(f"{path}: missing input columns {absent}")
    cols = [header.index(c) for c in names]
    try:
        X = np.loadtxt(path, delimiter=",", skiprows=1, usecols=cols, ndmin=2)
    except ValueError as err:
        raise DataError(f"{path}: {err}") from err
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: non-finite test inputs")
    return X, None


def cmd_cv(args, cfg):
    data = _load(args, cfg)
    template = _template(args, cfg, data.dim)
    priors = cfg.priors_for(template.build(data.standardized()))
    rep = kfold_cv(template, data, args.folds, args.seed, priors,
                   cfg.train_config(args.seed), args.workers)
    paths = emit_report({"command": "cv", "data": args.data, **rep.to_dict()}, args.out, name="cv")
    print(f"RMSE {rep.rmse:.4f}  MLPD {rep.mlpd:.4f}  failed folds {rep.n_failed}"
          f"  -> {paths['report']}")
    if rep.n_failed == args.folds:
        raise NumericalError("every fold failed")


def cmd_bench(args, cfg):
    template = _template(args, cfg, 1 if args.generator == "lattice1d" else 2)
    rows = bench_scaling(template, args.sizes, args.generator, args.seed, args.repeats)
    paths = emit_report({"command": "bench", "generator": args.generator,
                         "model": template.to_dict(), "rows": rows}, args.out, name="bench")
    print(format_table(rows))
    print(f"-> {paths['report']}")


COMMANDS = {"fit": cmd_fit, "predict": cmd_predict, "cv": cmd_cv, "bench": cmd_bench}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.kernels)
        COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as err:
        print(f"sparsegp: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as err:
        print(f"sparsegp: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, TrainingError) as err:
        print(f"sparsegp: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as err:
        print(f"sparsegp: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
