"""Readers for the stabindex file formats.

This package talks to the estimator only through its emitted files, so the
schemas are validated here independently: a malformed row fails with its
row number.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

MAP_HEADER = "x,y,label"
LADDER_HEADER = "eps,delta,n_total,n_basin,n_local,n_timeout,sigma_hat_fraction"
SWEEP_HEADER = "a,sigma_expected,sigma_measured"
LABELS = ("InBasin", "InLocalBasin", "OutOfBasin")


class SchemaError(ValueError):
    pass


def _rows(path, header, n_fields):
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != header:
        raise SchemaError(f"{path}:1: expected header {header!r}")
    for i, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != n_fields:
            raise SchemaError(f"{path}:{i}: expected {n_fields} fields, got {len(fields)}")
        yield i, fields


def read_map(path):
    """Basin map CSV -> (x, y, in_basin) arrays plus the in-label used."""
    xs, ys, ins = [], [], []
    in_label = "InBasin"
    for i, (x, y, label) in ((i, f) for i, f in _rows(path, MAP_HEADER, 3)):
        if label not in LABELS:
            raise SchemaError(f"{path}:{i}: unknown label {label!r}")
        try:
            xs.append(float(x))
            ys.append(float(y))
        except ValueError:
            raise SchemaError(f"{path}:{i}: non-numeric coordinate") from None
        if label != "OutOfBasin":
            in_label = label
        ins.append(label != "OutOfBasin")
    return np.array(xs), np.array(ys), np.array(ins, dtype=bool), in_label


def read_ladder(path):
    """Ladder CSV -> dict of column arrays."""
    eps, frac, n = [], [], []
    for i, f in _rows(path, LADDER_HEADER, 7):
        try:
            eps.append(float(f[0]))
            n.append(int(f[2]))
            frac.append(float(f[6]))
        except ValueError:
            raise SchemaError(f"{path}:{i}: non-numeric field") from None
    return {"eps": np.array(eps), "fraction": np.array(frac), "n": np.array(n)}


def read_sweep(path):
    a, exp, meas = [], [], []
    for i, f in _rows(path, SWEEP_HEADER, 3):
        try:
            a.append(float(f[0]))
            exp.append(float(f[1]))
            meas.append(float(f[2]))
        except ValueError:
            raise SchemaError(f"{path}:{i}: non-numeric field") from None
    return {"a": np.array(a), "expected": np.array(exp), "measured": np.array(meas)}


def read_report(path):
    rep = json.loads(Path(path).read_text())
    for key in ("system", "sigma_minus", "sigma_plus", "sigma"):
        if key not in rep:
            raise SchemaError(f"{path}: report is missing {key!r}")
    return rep


def ext_value(v) -> float:
    """JSON extended real ('+inf'/'-inf' or number) to float."""
    if v == "+inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def ext_label(v) -> str:
    """Exact display form of a JSON extended real, without reformatting."""
    return v if isinstance(v, str) else repr(v)
