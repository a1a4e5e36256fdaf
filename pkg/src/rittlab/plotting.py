"""PNG figures for the CLI report path.

Figures are drawn through the Agg canvas directly (no pyplot state) and
saved without the Software/date metadata, so identical data gives
identical bytes.
"""
from __future__ import annotations

import os

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {
    "font.family": "DejaVu Sans",
    "font.size": 8,
    "axes.labelsize": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "svg.hashsalt": "rittlab",
}
FIGSIZE = (4.0, 4.0 * (np.sqrt(5) - 1) / 2)
DPI = 150


def _figure():
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=FIGSIZE, dpi=DPI, layout="constrained")
        FigureCanvasAgg(fig)
        ax = fig.add_subplot()
    return fig, ax


def _save(fig: Figure, path: str | os.PathLike) -> str:
    with matplotlib.rc_context(STYLE):
        fig.savefig(path, format="png", metadata={"Software": None})
    return os.fspath(path)


def _positive(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 0, y, np.nan)


def measure_stem(sites, weights, path, title: str = "") -> str:
    fig, ax = _figure()
    with matplotlib.rc_context(STYLE):
        ax.vlines(sites, 0, weights, color="#2b8cbe")
        ax.plot(sites, weights, "o", color="#08589e")
        ax.set_xlabel("site k")
        ax.set_ylabel("weight")
        ax.set_title(title)
    return _save(fig, path)


def trace(xs, series: dict, path, *, xlabel: str, ylabel: str, logx=False, logy=False,
          title: str = "") -> str:
    """Line plot of one or more named series over xs."""
    fig, ax = _figure()
    with matplotlib.rc_context(STYLE):
        for label, ys in series.items():
            ys = _positive(ys) if logy else np.asarray(ys, dtype=float)
            ax.plot(xs, ys, label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if len(series) > 1:
            ax.legend()
        ax.set_title(title)
    return _save(fig, path)


def ladder(ladders: dict, verdicts: dict, path, title: str = "") -> str:
    """Cumulative value per refinement level for each quantity."""
    fig, ax = _figure()
    with matplotlib.rc_context(STYLE):
        for q, vals in ladders.items():
            vals = np.asarray(vals, dtype=float)
            ax.plot(np.arange(vals.size), _positive(vals), "o-", label=f"{q} ({verdicts[q]})")
        ax.set_yscale("log")
        ax.set_xlabel("refinement level")
        ax.set_ylabel("cumulative value")
        ax.legend()
        ax.set_title(title)
    return _save(fig, path)


def bars(labels, values, path, *, ylabel: str, title: str = "") -> str:
    fig, ax = _figure()
    with matplotlib.rc_context(STYLE):
        x = np.arange(len(labels))
        ax.bar(x, values, color="#4eb3d3")
        ax.set_xticks(x, labels, rotation=45, ha="right")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
    return _save(fig, path)
