"""Figures written next to the CSV outputs (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps or versions in the files, so reruns produce identical bytes
_META = {"Software": None}


def _save(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def plot_series(times: Sequence[float], curves: dict, ylabel: str, path: Path, title: str = ""):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for label, values in curves.items():
        ax.plot(times, values, label=label)
    ax.set_xlabel("t (s)")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def _draw_domain(ax, domain, D: float):
    for w in domain.walls:
        ax.plot([w.x0 * D, w.x1 * D], [w.y0 * D, w.y1 * D], color="k", lw=1.5)
    for ob in domain.obstacles:
        for rect, style in ((ob.effective_area, "--"), (ob.real_footprint, "-")):
            xs = [rect.xmin, rect.xmax, rect.xmax, rect.xmin, rect.xmin]
            ys = [rect.ymin, rect.ymin, rect.ymax, rect.ymax, rect.ymin]
            ax.plot(np.array(xs) * D, np.array(ys) * D, color="w", ls=style, lw=0.8)


def plot_snapshots(snapshots: list, grid, refs, domain, path: Path, max_panels: int = 6):
    """Density maps at up to ``max_panels`` evenly spread snapshot times."""
    if not snapshots:
        return
    idx = np.unique(np.linspace(0, len(snapshots) - 1, min(max_panels, len(snapshots))).round()
                    .astype(int))
    cols = min(3, len(idx))
    rows = int(np.ceil(len(idx) / cols))
    D = refs.length
    extent = [0, grid.length * D, 0, grid.height * D]
    aspect = grid.height / grid.length
    fig, axes = plt.subplots(rows, cols, figsize=(3.6 * cols, 3.6 * rows * max(aspect, 0.3) + 0.4),
                             squeeze=False)
    for ax in axes.flat[len(idx):]:
        ax.axis("off")
    for ax, k in zip(axes.flat, idx):
        t, f = snapshots[k]
        im = ax.imshow(f.sum(axis=0).T, origin="lower", extent=extent, vmin=0.0, vmax=1.0,
                       cmap="viridis", interpolation="nearest")
        _draw_domain(ax, domain, D)
        ax.set_title(f"t = {t:.1f} s", fontsize=9)
        ax.tick_params(labelsize=7)
    fig.colorbar(im, ax=axes.ravel().tolist(), shrink=0.8, label="density / capacity")
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def plot_sweep(values: Sequence, metrics: Sequence, xlabel: str, ylabel: str, path: Path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values)
    xs = list(values) if numeric else list(range(len(values)))
    ys = [np.nan if m is None else m for m in metrics]
    ax.plot(xs, ys, "o-")
    if not numeric:
        ax.set_xticks(xs, [str(v) for v in values])
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    _save(fig, path)
