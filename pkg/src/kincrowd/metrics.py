"""Observables computed from density snapshots, and their CSV encodings."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .geometry import Rect

EVACUATED_BELOW = 0.5  # persons


@dataclass(frozen=True)
class MeasurementRegion:
    """Exit-adjacent area ``omega`` over which density and flow are averaged.

    ``omega`` is dimensionless; ``exit_width`` is in metres.
    """

    label: str
    omega: Rect
    exit_width: float

    def __post_init__(self):
        if self.omega.area <= 0:
            raise ValueError(f"measurement region {self.label!r} has no area")


@dataclass(frozen=True)
class MetricSeries:
    timestamps: tuple
    values: tuple
    label: str = ""
    units: str = ""

    def __post_init__(self):
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values differ in length")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must be strictly increasing")


def person_count(f: np.ndarray, region: Optional[np.ndarray], refs, grid) -> float:
    """Persons inside the cells selected by boolean ``region`` (all cells if None).

    ``refs`` supplies ``length`` (m) and ``capacity`` (persons/m^2); ``grid``
    supplies the dimensionless ``cell_area``.
    """
    rho = f.sum(axis=0) if f.ndim == 3 else f
    total = rho.sum() if region is None else rho[region].sum()
    return float(refs.capacity * refs.length ** 2 * grid.cell_area * total)


def evacuation_time(series: MetricSeries, threshold: float = EVACUATED_BELOW) -> Optional[float]:
    """First time the in-room count drops below ``threshold``, interpolating
    linearly between samples.  ``None`` when it never does."""
    t, c = series.timestamps, series.values
    for k, value in enumerate(c):
        if value < threshold:
            if k == 0:
                return float(t[0])
            c0, c1 = c[k - 1], value
            return float(t[k - 1] + (c0 - threshold) / (c0 - c1) * (t[k] - t[k - 1]))
    return None


def voronoi_density_flow(f: np.ndarray, v: np.ndarray, region: np.ndarray,
                         exit_width: float, refs) -> tuple[float, float]:
    """Mean density (persons/m^2) and flow (persons/s) over a measurement area.

    The mean speed is density weighted; an empty area falls back to the plain
    mean speed, which still yields zero flow.
    """
    rho = (f.sum(axis=0) if f.ndim == 3 else f)[region]
    if rho.size == 0:
        return 0.0, 0.0
    speeds = np.broadcast_to(v, region.shape)[region]
    d_v = float(rho.mean())
    mass = rho.sum()
    v_v = float((rho * speeds).sum() / mass) if mass > 0 else float(speeds.mean())
    density = d_v * refs.capacity
    return density, density * v_v * refs.speed * exit_width


def lane_order_parameter(f: np.ndarray, dirs) -> float:
    """Segregation of left- and right-movers across grid rows, in ``[0, 1]``.

    For every row of constant y the signed rightward fraction is
    ``(R - L) / rho`` with row sums; the result is the mass-weighted mean of
    its magnitude.  0 means every row is evenly mixed, 1 means no row holds
    both populations.
    """
    c = np.round(np.cos(dirs.theta), 12)
    right = f[c > 0].sum(axis=(0, 1))
    left = f[c < 0].sum(axis=(0, 1))
    mass = f.sum()
    if mass <= 0:
        return 0.0
    return float(np.abs(right - left).sum() / mass)


def write_series_csv(path: Path, times: Sequence[float], values: Sequence[float],
                     header: str = "value"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_seconds", header])
        for t, v in zip(times, values):
            w.writerow([repr(float(t)), repr(float(v))])


def write_snapshot_csv(path: Path, f: np.ndarray, v: np.ndarray, grid, refs):
    """One row per cell: position in metres, density, speed, then each ``f_i``."""
    n = f.shape[0]
    rho = f.sum(axis=0)
    xs = grid.x_centers * refs.length
    ys = grid.y_centers * refs.length
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_m", "y_m", "rho", "v"] + [f"f_{i + 1}" for i in range(n)])
        for p in range(grid.nx):
            for q in range(grid.ny):
                w.writerow([repr(float(xs[p])), repr(float(ys[q])), repr(float(rho[p, q])),
                            repr(float(v[p, q]))] + [repr(float(f[i, p, q])) for i in range(n)])


def read_series_csv(path: Path) -> tuple[list[float], list[float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return [float(r[0]) for r in rows], [float(r[1]) for r in rows]


def fmt_time(t: Optional[float]) -> str:
    return "not reached by t_end" if t is None or math.isnan(t) else f"{t:.2f} s"
