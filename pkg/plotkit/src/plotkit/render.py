"""Figure rendering for convergence-trace CSVs.

One curve per input CSV, metric value (dB) on the y axis against the
iteration index t.  Cycle-graph curves are drawn dashed and everything else
solid, matching the usual solid-ER / dashed-cycle convention; an explicit
style map overrides the inference.  Rendering is deterministic: fixed figure
geometry, fixed fonts, Agg backend, and the plotted arrays are a pure
function of the input files.

Theory-bound overlays: the consensus panel can overlay the consensus bound
column as a dotted line.  The MSD metric has no matching bound column in the
trace schema, so a bounds request is ignored for it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

METRICS = ("consensus_db", "msd_db")
BOUND_COLUMN = {"consensus_db": "bound_consensus"}
METRIC_TITLE = {"consensus_db": "network disagreement (dB)",
                "msd_db": "mean square deviation (dB)"}

_RC = {
    "figure.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class SchemaMismatch(Exception):
    """An input CSV lacks a required column."""


@dataclass(frozen=True)
class PlotSpec:
    inputs: tuple            # of (path, label) pairs
    metric: str              # "consensus_db" | "msd_db"
    out_path: str
    overlay_bounds: bool = False
    styles: dict = field(default_factory=dict)   # label -> matplotlib linestyle

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not self.inputs:
            raise ValueError("no input CSVs given")


@dataclass(frozen=True)
class RenderResult:
    out_path: Path
    t: tuple                 # shared t grid after the inner join
    series: dict             # panel -> label -> tuple of plotted values
    width_px: int
    height_px: int


def read_columns(path, needed: tuple) -> dict:
    """Named columns from one CSV; raises SchemaMismatch naming the absentee."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise SchemaMismatch(f"{path}: empty file")
        index = {name: k for k, name in enumerate(header)}
        for name in needed:
            if name not in index:
                raise SchemaMismatch(f"{path}: required column '{name}' missing")
        cols = {name: [] for name in needed}
        for row in reader:
            if not row:
                continue
            for name in needed:
                cols[name].append(float(row[index[name]]))
    return cols


def _inner_join(per_file: list) -> list:
    """Shared t values (ascending) across all files."""
    shared = set(per_file[0]["t"])
    for cols in per_file[1:]:
        shared &= set(cols["t"])
    if not shared:
        raise ValueError("input CSVs share no common t values")
    return sorted(shared)


def default_style(label: str) -> str:
    return "--" if "cycle" in label.lower() else "-"


def _load_series(inputs, metric, overlay_bounds):
    needed = ["t", metric]
    bound_col = BOUND_COLUMN.get(metric)
    if overlay_bounds and bound_col:
        needed.append(bound_col)
    per_file = [read_columns(path, tuple(needed)) for path, _ in inputs]
    ts = _inner_join(per_file)
    series = {}
    bounds = {}
    for (path, label), cols in zip(inputs, per_file):
        by_t = dict(zip(cols["t"], cols[metric]))
        series[label] = tuple(by_t[t] for t in ts)
        if overlay_bounds and bound_col:
            by_t_b = dict(zip(cols["t"], cols[bound_col]))
            vals = tuple(10.0 * math.log10(v) if v > 0 else math.nan
                         for v in (by_t_b[t] for t in ts))
            bounds[label] = vals
    return ts, series, bounds


def _plot_panel(ax, ts, series, bounds, styles, metric):
    for label, values in series.items():
        style = styles.get(label, default_style(label))
        ax.plot(ts, values, style, label=label, linewidth=1.4)
    for label, values in bounds.items():
        ax.plot(ts, values, ":", color="gray", linewidth=1.0,
                label=f"{label} (bound)")
    ax.set_xlabel("iteration t")
    ax.set_ylabel(METRIC_TITLE[metric])
    ax.legend(fontsize=8)


def render(spec: PlotSpec) -> RenderResult:
    """Single-metric figure; returns the plotted data for verification."""
    ts, series, bounds = _load_series(spec.inputs, spec.metric,
                                      spec.overlay_bounds)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        _plot_panel(ax, ts, series, bounds, spec.styles, spec.metric)
        fig.tight_layout()
        fig.savefig(spec.out_path)
        width, height = fig.canvas.get_width_height()
        plt.close(fig)
    return RenderResult(Path(spec.out_path), tuple(ts),
                        {spec.metric: series}, width, height)


def render_two_panel(inputs, out_path, overlay_bounds: bool = False,
                     styles: dict | None = None) -> RenderResult:
    """Consensus-dB and MSD-dB panels side by side over a shared t grid."""
    if not inputs:
        raise ValueError("no input CSVs given")
    styles = styles or {}
    loaded = {m: _load_series(inputs, m, overlay_bounds) for m in METRICS}
    ts = loaded[METRICS[0]][0]
    if loaded[METRICS[1]][0] != ts:
        raise ValueError("panels disagree on the joined t grid")
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(11.0, 4.2))
        for ax, metric in zip(axes, METRICS):
            _, series, bounds = loaded[metric]
            _plot_panel(ax, ts, series, bounds, styles, metric)
        fig.tight_layout()
        fig.savefig(out_path)
        width, height = fig.canvas.get_width_height()
        plt.close(fig)
    return RenderResult(Path(out_path), tuple(ts),
                        {m: loaded[m][1] for m in METRICS}, width, height)
