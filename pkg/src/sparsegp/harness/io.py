"""CSV ingestion and report emission."""

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..data import Dataset
from ..errors import DataError

DEFAULT_MISSING = ("", "NaN", "nan", "NA")


def load_csv(path, inputs=None, target=None, missing=DEFAULT_MISSING):
    """Read a headed CSV into a :class:`Dataset`.

    Parameters
    ----------
    path : path-like
    inputs : list of str, optional
        Input column names; defaults to every column except the target.
    target : str, optional
        Target column name; defaults to the last column.
    missing : iterable of str
        Tokens treated as missing values.  Rows with any missing selected
        field are dropped and counted in ``Dataset.dropped``.
    """
    path = Path(path)
    missing = {str(t).strip() for t in missing}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise DataError(f"cannot open {path}: {err}") from err
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        target = target or header[-1]
        if inputs is None:
            inputs = [h for h in header if h != target]
        for col in [*inputs, target]:
            if col not in header:
                raise DataError(f"{path}: no column named {col!r}")
        if not inputs:
            raise DataError(f"{path}: no input columns")
        cols = [header.index(c) for c in [*inputs, target]]
        rows, dropped = [], 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            fields = [row[c].strip() for c in cols]
            if any(f in missing for f in fields):
                dropped += 1
                continue
            try:
                values = [float(f) for f in fields]
            except ValueError as err:
                raise DataError(f"{path}:{lineno}: {err}") from err
            if not all(math.isfinite(v) for v in values):
                dropped += 1
                continue
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no usable rows ({dropped} dropped)")
    A = np.array(rows)
    return Dataset(A[:, :-1], A[:, -1], dropped=dropped, columns=(*inputs, target))


def write_csv(path, columns, table):
    """Write ``table`` (dict of equal-length 1D arrays) with the given column order."""
    path = Path(path)
    n = len(next(iter(table.values()))) if table else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for i in range(n):
            w.writerow([repr(float(table[c][i])) for c in columns])
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def prediction_table(X, pred, truth=None, components=None, input_names=None):
    """Plot-ready columns: inputs, truth, total mean/variance, component means."""
    X = np.asarray(X).reshape(len(pred.mean), -1)
    names = list(input_names or [f"x{d}" for d in range(X.shape[1])])
    table = {name: X[:, d] for d, name in enumerate(names)}
    if truth is not None:
        table["truth"] = np.asarray(truth)
    table["mean"] = pred.mean
    table["var"] = pred.var
    table["obs_var"] = pred.obs_var
    for key, comp in (components or {}).items():
        table[f"mean[{key}]"] = comp.mean
    return list(table), table


def emit_report(results, out_dir, predictions=None, name="report"):
    """Write ``<name>.json`` and, if given, ``<name>_predictions.csv``.

    ``predictions`` is a ``(columns, table)`` pair as returned by
    :func:`prediction_table`.  Returns the written paths.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"report": out / f"{name}.json"}
        with open(paths["report"], "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2, default=_jsonable)
        if predictions is not None:
            paths["predictions"] = write_csv(out / f"{name}_predictions.csv", *predictions)
    except OSError as err:
        raise OSError(f"cannot write report under {out}: {err}") from err
    return paths


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
