"""Render figures from kaleflow run directories.

Consumes only the CSV files a flow run writes: ``particles_{step}.csv``
snapshots, the optional ``target.csv``, and ``trace.csv``.  Output images are
deterministic (no timestamps) so reruns are byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

TRACE_COLUMNS = ("kale", "mmd2", "witness_norm2", "mean_sq_velocity", "beta", "w2_to_reference")


class FigureInputError(ValueError):
    """Missing or malformed run-directory inputs."""


def read_points_csv(path: str | Path) -> np.ndarray:
    """Point-cloud CSV (header x0,...,x{d-1}[,w]) as an N x d array."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len([h for h in header if h.startswith("x")])
        rows = [[float(v) for v in row[:d]] for row in reader if row]
    if not rows:
        raise FigureInputError(f"{path}: no data rows")
    return np.array(rows)


def read_trace_csv(path: str | Path) -> dict[str, list[float | None]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list] = {h: [] for h in header}
        for row in reader:
            for h, v in zip(header, row):
                cols[h].append(None if v == "" else float(v))
    return cols


def _save(fig, out: str | Path) -> Path:
    out = Path(out)
    # strip volatile metadata and pin the SVG id salt so identical inputs
    # give identical bytes
    if out.suffix.lower() == ".svg":
        with matplotlib.rc_context({"svg.hashsalt": "kaleflow"}):
            fig.savefig(out, metadata={"Date": None})
    elif out.suffix.lower() == ".png":
        fig.savefig(out, metadata={"Software": None})
    else:
        fig.savefig(out)
    plt.close(fig)
    return out


def snapshot_bounds(clouds: list[np.ndarray], margin: float = 0.05) -> tuple:
    """Common (xlim, ylim) covering the union of the clouds."""
    allpts = np.vstack(clouds)
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo, hi = lo - margin * span, hi + margin * span
    return (lo[0], hi[0]), (lo[1], hi[1])


def plot_particles(
    run_dir: str | Path,
    steps: list[int],
    out: str | Path,
    xlim: tuple[float, float] | None = None,
    ylim: tuple[float, float] | None = None,
):
    """Multi-panel scatter of source snapshots over the target cloud.

    One panel per requested step; axis limits are shared across panels,
    auto-computed from the union of the shown snapshots (and target) unless
    given explicitly.  Returns (output path, figure).
    """
    run_dir = Path(run_dir)
    if not steps:
        raise FigureInputError("at least one snapshot step is required")
    clouds = []
    for step in steps:
        path = run_dir / f"particles_{step}.csv"
        if not path.exists():
            raise FigureInputError(f"missing snapshot for step {step}: {path}")
        clouds.append(read_points_csv(path))
    target_path = run_dir / "target.csv"
    target = read_points_csv(target_path) if target_path.exists() else None

    if xlim is None or ylim is None:
        ref = clouds + ([target] if target is not None else [])
        auto_x, auto_y = snapshot_bounds(ref)
        xlim = xlim or auto_x
        ylim = ylim or auto_y

    fig, axes = plt.subplots(
        1, len(steps), figsize=(3.2 * len(steps), 3.4), squeeze=False, sharey=True
    )
    for ax, step, cloud in zip(axes[0], steps, clouds):
        if target is not None:
            ax.scatter(target[:, 0], target[:, 1], s=8, c="#c44e52", alpha=0.5,
                       label="target", linewidths=0)
        ax.scatter(cloud[:, 0], cloud[:, 1], s=8, c="#4c72b0", alpha=0.8,
                   label="source", linewidths=0)
        ax.set_xlim(*xlim)
        ax.set_ylim(*ylim)
        ax.set_title(f"step {step}")
        ax.set_aspect("equal")
    axes[0][0].legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return _save(fig, out), fig


def plot_curves(
    traces: list[str | Path],
    labels: list[str],
    column: str,
    out: str | Path,
    logy: bool = False,
):
    """One line per trace file for the chosen column, with a labeled legend.

    The traces must share the ``step`` column; unknown columns raise with the
    list of available names.  Returns (output path, figure).
    """
    if len(traces) != len(labels):
        raise FigureInputError(f"{len(traces)} traces but {len(labels)} labels")
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for path, label in zip(traces, labels):
        cols = read_trace_csv(path)
        if column not in cols:
            available = ", ".join(k for k in cols if k != "step")
            raise FigureInputError(
                f"{path}: unknown column {column!r}; available: {available}"
            )
        steps = cols["step"]
        vals = cols[column]
        pairs = [(s, v) for s, v in zip(steps, vals) if v is not None]
        if not pairs:
            raise FigureInputError(f"{path}: column {column!r} has no values")
        ax.plot([p[0] for p in pairs], [p[1] for p in pairs], label=label, linewidth=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel(column)
    if logy:
        ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, out), fig
