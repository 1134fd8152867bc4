"""File formats emitted by the CLI.

Ladder CSV:  eps,delta,n_total,n_basin,n_local,n_timeout,sigma_hat_fraction
Basin map CSV: x,y,label   (label InBasin / InLocalBasin / OutOfBasin)
Sweep CSV:   a,sigma_expected,sigma_measured
Index report: JSON with sigma_minus / sigma_plus / sigma / stderr, every
numerical convention used, and the effective run configuration.  Infinite
values are encoded as the strings "+inf" / "-inf" so the files stay valid
strict JSON.

All numbers are written with shortest round-trip formatting and a fixed
field order, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .measure import IndexEstimate, LocalIndexResult, MeasureSample
from .systems import SystemSpec


def _fmt(x: float | int | None) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def ext_to_json(x: float):
    """Extended real to a JSON-safe value."""
    if math.isinf(x):
        return "+inf" if x > 0 else "-inf"
    return x


def ext_from_json(v) -> float:
    if v == "+inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


LADDER_HEADER = "eps,delta,n_total,n_basin,n_local,n_timeout,sigma_hat_fraction"


def write_ladder_csv(path, samples: list[MeasureSample], use_local: bool = False) -> None:
    lines = [LADDER_HEADER]
    for s in samples:
        frac = s.local_fraction if use_local else s.fraction
        lines.append(
            ",".join(
                [
                    _fmt(s.eps),
                    _fmt(s.delta),
                    _fmt(s.n_total),
                    _fmt(s.n_basin),
                    _fmt(s.n_local),
                    _fmt(s.n_timeout),
                    _fmt(frac),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_ladder_csv(path) -> list[MeasureSample]:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != LADDER_HEADER:
        raise ValueError(f"{path}: not a ladder CSV (bad header)")
    out = []
    for i, line in enumerate(text[1:], start=2):
        f = line.split(",")
        if len(f) != 7:
            raise ValueError(f"{path}:{i}: expected 7 fields, got {len(f)}")
        out.append(
            MeasureSample(
                eps=float(f[0]),
                delta=float(f[1]) if f[1] else None,
                n_total=int(f[2]),
                n_basin=int(f[3]),
                n_local=int(f[4]) if f[4] else None,
                n_timeout=int(f[5]),
                seed=0,
            )
        )
    return out


def index_report(
    spec: SystemSpec,
    estimate: IndexEstimate,
    conventions: dict,
    expected: tuple[float, float] | None = None,
    local: LocalIndexResult | None = None,
) -> dict:
    from .analytic import stability_class

    rep = {
        "system": {
            "family": spec.family.value,
            "a": spec.a,
            "p": spec.p,
            "stability_class": stability_class(spec),
        },
        "sigma_minus": ext_to_json(estimate.sigma_minus),
        "sigma_plus": ext_to_json(estimate.sigma_plus),
        "sigma": ext_to_json(estimate.sigma),
        "stderr": estimate.slope_stderr,
        "conventions": dict(conventions),
        "diagnostics": {
            k: v for k, v in estimate.diagnostics.items() if k != "notes"
        },
        "notes": estimate.diagnostics.get("notes", []),
    }
    if expected is not None:
        rep["expected"] = {
            "sigma": ext_to_json(expected[0]),
            "sigma_loc": ext_to_json(expected[1]),
        }
    if local is not None:
        rep["local"] = {
            "sigma_loc": ext_to_json(local.sigma_loc),
            "slope_cutoff": local.slope_cutoff,
            "per_delta": [
                {
                    "delta": d,
                    "sigma_minus": ext_to_json(est.sigma_minus),
                    "sigma_plus": ext_to_json(est.sigma_plus),
                    "sigma": ext_to_json(est.sigma),
                }
                for d, est in local.per_delta
            ],
        }
    return rep


def write_index_json(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=False) + "\n")


def write_map_csv(path, xc, yc, labels, local: bool = False) -> None:
    in_name = "InLocalBasin" if local else "InBasin"
    lines = ["x,y,label"]
    for j, y in enumerate(yc):
        for i, x in enumerate(xc):
            name = in_name if labels[j, i] else "OutOfBasin"
            lines.append(f"{_fmt(float(x))},{_fmt(float(y))},{name}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_sweep_csv(path, rows: list[tuple[float, float, float]]) -> None:
    lines = ["a,sigma_expected,sigma_measured"]
    for a, exp, meas in rows:
        lines.append(f"{_fmt(a)},{_fmt(exp)},{_fmt(meas)}")
    Path(path).write_text("\n".join(lines) + "\n")
