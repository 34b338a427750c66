"""Static vector-graphics reports for a finished run.

Three figures: a scatter of the pushed-forward source against the target,
a transport-arrow plot, and the held-out error curve.  Each figure comes
with a CSV of exactly the plotted data.  Output is byte-deterministic for
identical inputs: the SVG hash salt is pinned and date metadata stripped.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

import numpy as np

from .data import load_csv
from .errors import DataError
from .train import read_metrics

FIGURE_NAMES = ("fig1_scatter", "fig1_arrows", "fig3_mse")
MAX_ARROWS = 80

_RC = {
    "svg.hashsalt": "otmap",
    "figure.figsize": (5.0, 4.0),
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _write_csv(path: Path, header: str, rows: np.ndarray) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for row in np.atleast_2d(rows):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def emit_figures(run_dir, out_dir=None) -> list[Path]:
    """Render the three report figures (plus data CSVs) for a run directory.

    Needs P.csv, Q.csv, pushforward.csv and metrics.csv in ``run_dir``;
    when a matching.csv from the discrete oracle is present, the arrow
    plot shows the exact matching instead of generator displacements.
    """
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    required = ["P.csv", "Q.csv", "pushforward.csv", "metrics.csv"]
    missing = [name for name in required if not (run_dir / name).exists()]
    if missing:
        raise DataError(f"{run_dir}: missing inputs: {', '.join(missing)}")

    p = load_csv(run_dir / "P.csv")
    q = load_csv(run_dir / "Q.csv")
    pushed = load_csv(run_dir / "pushforward.csv")
    metrics = read_metrics(run_dir / "metrics.csv")
    if metrics["step"].size == 0:
        raise DataError(f"{run_dir}: metrics.csv has no logged rows")

    written: list[Path] = []
    with plt.rc_context(_RC):
        written += _scatter_figure(pushed, q, out_dir)
        matching_path = run_dir / "matching.csv"
        if matching_path.exists():
            from .discrete import load_matching_csv

            sigma = load_matching_csv(matching_path).permutation
            written += _arrow_figure(p, q[sigma], out_dir, label="exact matching")
        else:
            written += _arrow_figure(p, pushed, out_dir, label="generator")
        written += _error_curve_figure(metrics, out_dir)
    return written


def _scatter_figure(pushed, q, out_dir: Path) -> list[Path]:
    fig, ax = plt.subplots()
    ax.scatter(q[:, 0], q[:, 1] if q.shape[1] > 1 else np.zeros(len(q)),
               s=4, alpha=0.5, label="target sample", color="tab:orange")
    ax.scatter(pushed[:, 0], pushed[:, 1] if pushed.shape[1] > 1 else np.zeros(len(pushed)),
               s=4, alpha=0.5, label="pushed-forward source", color="tab:blue")
    ax.set_xlabel("coordinate 1")
    ax.set_ylabel("coordinate 2")
    ax.legend(loc="best")
    svg = out_dir / "fig1_scatter.svg"
    _save(fig, svg)
    csv = out_dir / "fig1_scatter.csv"
    n = min(len(pushed), len(q))
    _write_csv(csv, "pushed_1,pushed_2,target_1,target_2",
               np.column_stack([_two_cols(pushed[:n]), _two_cols(q[:n])]))
    return [svg, csv]


def _arrow_figure(src, dst, out_dir: Path, label: str) -> list[Path]:
    k = min(MAX_ARROWS, len(src), len(dst))
    s2, d2 = _two_cols(src[:k]), _two_cols(dst[:k])
    fig, ax = plt.subplots()
    ax.scatter(_two_cols(src)[:, 0], _two_cols(src)[:, 1], s=4, alpha=0.3, color="tab:blue")
    ax.scatter(_two_cols(dst)[:, 0], _two_cols(dst)[:, 1], s=4, alpha=0.3, color="tab:orange")
    ax.quiver(s2[:, 0], s2[:, 1], d2[:, 0] - s2[:, 0], d2[:, 1] - s2[:, 1],
              angles="xy", scale_units="xy", scale=1.0, width=0.003, color="black")
    ax.set_xlabel("coordinate 1")
    ax.set_ylabel("coordinate 2")
    ax.set_title(f"transport arrows ({label})")
    svg = out_dir / "fig1_arrows.svg"
    _save(fig, svg)
    csv = out_dir / "fig1_arrows.csv"
    _write_csv(csv, "from_1,from_2,to_1,to_2", np.column_stack([s2, d2]))
    return [svg, csv]


def _error_curve_figure(metrics, out_dir: Path) -> list[Path]:
    steps = metrics["step"]
    mse = metrics["holdout_mse"]
    if np.isfinite(mse).any():
        values, ylabel = mse, "held-out mean squared error"
    else:
        # no ground-truth map in this run; fall back to the transport cost
        values, ylabel = metrics["quad_cost"], "quadratic transport cost"
    fig, ax = plt.subplots()
    ax.plot(steps, values, lw=1.2)
    ax.set_xlabel("generator gradient steps")
    ax.set_ylabel(ylabel)
    if np.isfinite(values).all() and (values > 0).all():
        ax.set_yscale("log")
    svg = out_dir / "fig3_mse.svg"
    _save(fig, svg)
    csv = out_dir / "fig3_mse.csv"
    _write_csv(csv, "step,value", np.column_stack([steps, values]))
    return [svg, csv]


def _two_cols(a: np.ndarray) -> np.ndarray:
    if a.shape[1] >= 2:
        return a[:, :2]
    return np.column_stack([a[:, 0], np.zeros(len(a))])
