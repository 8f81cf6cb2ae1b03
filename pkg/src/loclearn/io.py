"""CSV datasets (header ``x1,...,xd[,y]``) and result tables."""

import csv
import io
import json
import math

import numpy as np

from loclearn.errors import ConfigError


def read_dataset(path_or_text, text=False):
    """Return ``(X, y)``; ``y`` is None when the file has no ``y`` column."""
    handle = io.StringIO(path_or_text) if text else open(path_or_text, newline="")
    with handle as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError("dataset CSV is empty", [("data", "missing header")])
    header = [h.strip() for h in rows[0]]
    has_y = header[-1] == "y"
    xcols = header[:-1] if has_y else header
    if not xcols or xcols != [f"x{i}" for i in range(1, len(xcols) + 1)]:
        raise ConfigError(f"dataset header must be x1,...,xd[,y]; got {','.join(header)}", [("data", "bad header")])
    body = [r for r in rows[1:] if any(c.strip() for c in r)]
    try:
        arr = np.array([[float(c) for c in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise ConfigError(f"dataset CSV has a malformed row: {exc}", [("data", str(exc))]) from exc
    X = arr[:, : len(xcols)]
    return X, (arr[:, -1] if has_y else None)


def dataset_csv(X, y=None):
    X = np.asarray(X, dtype=float)
    X = X.reshape(len(X), -1)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow([f"x{i}" for i in range(1, X.shape[1] + 1)] + (["y"] if y is not None else []))
    for i, row in enumerate(X):
        w.writerow([repr(float(v)) for v in row] + ([repr(float(y[i]))] if y is not None else []))
    return out.getvalue()


def write_dataset(path, X, y=None):
    with open(path, "w", newline="") as fh:
        fh.write(dataset_csv(X, y))


def _cell(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(v, separators=(",", ":"))
    return str(v)


def table_csv(rows, columns=None):
    """Rows of dicts to CSV text; stable column order, exact float repr."""
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return out.getvalue()
