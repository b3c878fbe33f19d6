"""Three-panel energy figures from the experiment runner's CSV files.

Two figure kinds are supported, matching the two experiment commands:

    coop        columns sweep_var,value,seed,coop_energy_J,nocoop_energy_J
                -> two series, "cooperation" and "no cooperation"
    heuristics  columns sweep_var,value,seed,algo,energy_J
                -> one series per algorithm in the file

Each figure lays out one panel per sweep variable (users, files, zipf);
panels without data in the input are left empty with a note.  Series are
mean-over-seeds lines with shaded +-1 standard-error bands.  Rendering is a
pure function of the CSV content: fixed backend, size, dpi, and metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np
import pandas as pd

PANELS = ("users", "files", "zipf")
PANEL_LABELS = {"users": "number of users", "files": "number of files",
                "zipf": "popularity skew exponent"}


class FigureDataError(ValueError):
    """Missing columns or no usable rows in the input CSVs."""


@dataclass(frozen=True)
class FigureSpec:
    """What to read and how to slice it into panels and series."""

    csv_paths: tuple[str, ...]
    output_path: str
    series_column: str | None = None       # long format: one column holds the series key
    value_column: str | None = None        # long format: the measured quantity
    value_columns: tuple[str, ...] = ()    # wide format: one column per series
    series_labels: tuple[str, ...] = ()
    panel_column: str = "sweep_var"
    x_column: str = "value"
    seed_column: str = "seed"
    y_label: str = "total energy (J)"

    def required_columns(self) -> tuple[str, ...]:
        cols = [self.panel_column, self.x_column, self.seed_column]
        if self.series_column:
            cols += [self.series_column, self.value_column]
        cols += list(self.value_columns)
        return tuple(cols)


def coop_spec(csv_paths, output_path) -> FigureSpec:
    return FigureSpec(csv_paths=tuple(csv_paths), output_path=output_path,
                      value_columns=("coop_energy_J", "nocoop_energy_J"),
                      series_labels=("cooperation", "no cooperation"))


def heuristics_spec(csv_paths, output_path) -> FigureSpec:
    return FigureSpec(csv_paths=tuple(csv_paths), output_path=output_path,
                      series_column="algo", value_column="energy_J")


def _load(spec: FigureSpec) -> pd.DataFrame:
    frames = []
    for path in spec.csv_paths:
        df = pd.read_csv(path)
        missing = [c for c in spec.required_columns() if c not in df.columns]
        if missing:
            raise FigureDataError(f"{path}: missing columns {missing}")
        frames.append(df)
    data = pd.concat(frames, ignore_index=True)
    if data.empty:
        raise FigureDataError("no data rows in the input CSVs")
    return data


def _long_form(spec: FigureSpec, data: pd.DataFrame) -> pd.DataFrame:
    """Normalize to columns panel / x / series / y."""
    if spec.series_column:
        out = data.rename(columns={spec.panel_column: "panel",
                                   spec.x_column: "x",
                                   spec.series_column: "series",
                                   spec.value_column: "y"})
        return out[["panel", "x", "series", "y"]]
    labels = spec.series_labels or spec.value_columns
    parts = []
    for col, label in zip(spec.value_columns, labels):
        part = data[[spec.panel_column, spec.x_column]].copy()
        part.columns = ["panel", "x"]
        part["series"] = label
        part["y"] = data[col]
        parts.append(part)
    return pd.concat(parts, ignore_index=True)


def render_three_panel(spec: FigureSpec) -> dict:
    """Render the figure and return a summary: series names per panel.

    Raises FigureDataError when required columns are absent or the inputs
    hold no rows at all.
    """
    long = _long_form(spec, _load(spec))
    long = long[np.isfinite(long["y"])]
    if long.empty:
        raise FigureDataError("no finite data points to plot")

    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6), dpi=120)
    summary: dict[str, list[str]] = {}
    for ax, panel, tag in zip(axes, PANELS, "abc"):
        sub = long[long["panel"] == panel]
        ax.set_title(f"({tag}) vs {PANEL_LABELS[panel]}", fontsize=10)
        ax.set_xlabel(PANEL_LABELS[panel])
        ax.set_ylabel(spec.y_label)
        if sub.empty:
            ax.annotate("no data", xy=(0.5, 0.5), xycoords="axes fraction",
                        ha="center", va="center", color="0.5")
            summary[panel] = []
            continue
        names = []
        for series in sorted(sub["series"].unique()):
            grp = sub[sub["series"] == series].groupby("x")["y"]
            x = np.array(sorted(grp.groups))
            mean = grp.mean().loc[x].to_numpy()
            sem = (grp.std(ddof=1) / np.sqrt(grp.count())).loc[x].to_numpy()
            sem = np.nan_to_num(sem)
            ax.plot(x, mean, marker="o", markersize=3, label=str(series))
            ax.fill_between(x, mean - sem, mean + sem, alpha=0.2)
            names.append(str(series))
        ax.legend(fontsize=8)
        summary[panel] = names
    fig.tight_layout()
    fig.savefig(spec.output_path, metadata={"Software": "d2dplots"})
    plt.close(fig)
    return {"output": spec.output_path, "panels": summary,
            "series_count": max((len(v) for v in summary.values()), default=0)}
