"""Render stabindex outputs into static figures.

Three kinds: ``basin`` (classified grid with the analytic cone or guard
curves overlaid), ``loglog`` (fraction ladder with the fitted slopes), and
``sweep`` (measured sigma against the exact curve).  The renderer never
recomputes numbers; every slope or label shown is read from the report
JSON verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import ext_label, ext_value, read_ladder, read_map, read_report, read_sweep


@dataclass(frozen=True)
class PlotJob:
    kind: str  # basin | loglog | sweep
    out_path: str
    map_csv: str | None = None
    ladder_csv: str | None = None
    sweep_csv: str | None = None
    report_json: str | None = None

    def __post_init__(self):
        if self.kind not in ("basin", "loglog", "sweep"):
            raise ValueError(f"unknown plot kind {self.kind!r}")


def _phi(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = (2.0 * x[pos] + 1.0) * np.exp(-1.0 / x[pos])
    return out


def _curves(system, x):
    """Analytic overlay curves for the family; plain arithmetic on the
    parameters carried by the report."""
    fam = system["family"]
    a = system.get("a")
    p = system.get("p") or 1.0
    if fam == "power-attract":
        e = a * p
        k = (a - 0.5) / (a - 1.0)
        return [(x**e, "$y = x^{%g}$" % e), (k * x**e, "$y = %g x^{%g}$" % (k, e))]
    if fam == "power-repel":
        return [(x**a, "$y = x^{%g}$" % a), (0.25 * x**a, "$y = x^{%g}/4$" % a)]
    if fam == "phi":
        return [(_phi(x), "guard curve"), (0.5 * _phi(x), "half guard curve")]
    return []


def render(job: PlotJob) -> str:
    """Produce the figure for a job; returns the written path."""
    if job.kind == "basin":
        fig = _render_basin(job)
    elif job.kind == "loglog":
        fig = _render_loglog(job)
    else:
        fig = _render_sweep(job)
    out = Path(job.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return str(out)


def _render_basin(job: PlotJob):
    xs, ys, ins, in_label = read_map(job.map_csv)
    xu = np.unique(xs)
    yu = np.unique(ys)
    grid = np.zeros((yu.size, xu.size))
    ix = np.searchsorted(xu, xs)
    iy = np.searchsorted(yu, ys)
    grid[iy, ix] = ins

    fig, ax = plt.subplots(figsize=(6, 5))
    ax.pcolormesh(xu, yu, grid, cmap="Blues", vmin=0, vmax=1.4, shading="nearest")
    if job.report_json:
        system = read_report(job.report_json)["system"]
        cx = np.linspace(max(xu.min(), 0.0), xu.max(), 400)
        for curve, label in _curves(system, cx):
            ax.plot(cx, curve, lw=1.5, ls="--", label=label)
        if system.get("a") is not None or system["family"] == "phi":
            ax.legend(loc="upper left")
    ax.set_xlim(xu.min(), xu.max())
    ax.set_ylim(yu.min(), yu.max())
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"shaded: {in_label}")
    return fig


def _render_loglog(job: PlotJob):
    lad = read_ladder(job.ladder_csv)
    rep = read_report(job.report_json) if job.report_json else None

    fig, ax = plt.subplots(figsize=(6, 5))
    eps = lad["eps"]
    for series, name, slope_key in (
        (lad["fraction"], "fraction", "sigma_minus"),
        (1.0 - lad["fraction"], "1 - fraction", "sigma_plus"),
    ):
        keep = series > 0
        if not keep.any():
            continue
        ax.loglog(eps[keep], series[keep], "o", ms=5, label=name)
        if rep is not None:
            slope = ext_value(rep[slope_key])
            if math.isfinite(slope):
                anchor_x = np.exp(np.mean(np.log(eps[keep])))
                anchor_y = np.exp(np.mean(np.log(series[keep])))
                line = anchor_y * (eps[keep] / anchor_x) ** slope
                ax.loglog(
                    eps[keep], line, "-", lw=1,
                    label=f"{slope_key} = {ext_label(rep[slope_key])}",
                )
    if rep is not None:
        ax.set_title(f"sigma = {ext_label(rep['sigma'])}")
        expected = rep.get("expected")
        if expected is not None and math.isfinite(ext_value(expected["sigma"])):
            ax.plot([], [], " ", label=f"exact sigma = {ext_label(expected['sigma'])}")
    ax.set_xlabel("eps")
    ax.set_ylabel("basin fraction of the eps-square")
    ax.legend()
    return fig


def _render_sweep(job: PlotJob):
    data = read_sweep(job.sweep_csv)
    fig, ax = plt.subplots(figsize=(6, 4))
    order = np.argsort(data["a"])
    ax.plot(data["a"][order], data["expected"][order], "-", label="exact index")
    ax.plot(data["a"][order], data["measured"][order], "o", label="measured")
    ax.set_xlabel("a")
    ax.set_ylabel("sigma")
    ax.legend()
    return fig
