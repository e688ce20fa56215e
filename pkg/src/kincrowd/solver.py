"""Lie-splitting time integrator: Lax-Friedrichs transport in x, then in y,
then a forward-Euler interaction step, each over ``M`` sub-steps.

The state is an array ``f`` of shape ``(n_directions, nx, ny)`` holding
dimensionless cell averages; ``f.sum(axis=0)`` is the density.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import metrics
from .errors import ConfigError, NumericStateError
from .geometry import DomainSpec, Rect, distance_to_exit, quality_field, wall_query, GeometricQuery
from .kinetics import (DirectionSet, InteractionTables, ModelParams, VelocityLaw,
                       collision_field, geometric_preferred_direction, speed)

log = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-10
BOUNDARY_KINDS = ("wall", "outflow", "periodic")


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on ``[0, length] x [0, height]``."""

    length: float
    height: float
    nx: int
    ny: int

    @classmethod
    def from_spacing(cls, length: float, height: float, dx: float, dy: float) -> "Grid":
        nx, ny = round(length / dx), round(height / dy)
        for n, extent, step, name in ((nx, length, dx, "dx"), (ny, height, dy, "dy")):
            if n < 1 or abs(n * step - extent) > 1e-9 * extent:
                raise ConfigError(f"spacing {step:g} does not divide the extent {extent:g}",
                                  f"numerics.{name}")
        return cls(length, height, nx, ny)

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def dy(self) -> float:
        return self.height / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_centers(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Broadcastable ``(nx, 1)`` and ``(1, ny)`` centre coordinates."""
        return self.x_centers[:, None], self.y_centers[None, :]

    def region_mask(self, rect: Rect) -> np.ndarray:
        """Cells whose centre lies in the closed rectangle."""
        xc, yc = self.centers()
        return np.broadcast_to(rect.mask(xc, yc), (self.nx, self.ny))


@dataclass(frozen=True)
class BoundaryPolicy:
    left: str = "wall"
    right: str = "wall"
    bottom: str = "wall"
    top: str = "wall"

    def __post_init__(self):
        for side in ("left", "right", "bottom", "top"):
            if getattr(self, side) not in BOUNDARY_KINDS:
                raise ConfigError(f"unknown boundary kind {getattr(self, side)!r}",
                                  f"boundaries.{side}")
        if (self.left == "periodic") != (self.right == "periodic"):
            raise ConfigError("periodic edges must come in pairs", "boundaries.left")
        if (self.bottom == "periodic") != (self.top == "periodic"):
            raise ConfigError("periodic edges must come in pairs", "boundaries.bottom")

    @property
    def periodic_x(self) -> bool:
        return self.left == "periodic"

    @property
    def periodic_y(self) -> bool:
        return self.bottom == "periodic"


def auto_substeps(dt: float, grid: Grid, minimum: int = 3) -> int:
    """Smallest ``M >= minimum`` with ``dt / M <= min(dx, dy)``."""
    ratio = dt / min(grid.dx, grid.dy)
    return max(minimum, math.ceil(ratio - 1e-9))


@dataclass(frozen=True)
class TimeStepping:
    dt: float
    substeps: int
    t_end: float

    def __post_init__(self):
        if self.dt < 0 or self.t_end < 0:
            raise ConfigError("time step and horizon must be non-negative", "numerics.dt")
        if self.substeps < 3:
            raise ConfigError(f"need at least 3 sub-steps, got {self.substeps}",
                              "numerics.substeps")

    @property
    def tau(self) -> float:
        return self.dt / self.substeps

    def courant(self, grid: Grid) -> float:
        return max(self.tau / grid.dx, self.tau / grid.dy)

    def check_cfl(self, grid: Grid):
        c = self.courant(grid)
        if c > 1.0 + 1e-9:
            raise ConfigError(
                f"CFL condition violated: max(tau/dx, tau/dy) = {c:.4g} > 1 "
                f"(tau = dt/M = {self.tau:.4g}); raise numerics.substeps or refine dt",
                "numerics.dt")


def face_openness(domain: DomainSpec, grid: Grid, boundaries: BoundaryPolicy):
    """Open fraction of every cell face, in ``[0, 1]``.

    Returns ``(open_x, open_y)`` with shapes ``(nx+1, ny)`` and ``(nx, ny+1)``.
    Wall segments close the faces they cover (snapped to the nearest grid
    line); exits and effective areas leave faces open.  Box edges tagged
    ``wall`` are closed; periodic edges are fully open.
    """
    open_x = np.ones((grid.nx + 1, grid.ny))
    open_y = np.ones((grid.nx, grid.ny + 1))
    ylo = np.arange(grid.ny) * grid.dy
    xlo = np.arange(grid.nx) * grid.dx
    for w in domain.walls:
        if w.vertical:
            p = int(round(w.x0 / grid.dx))
            a, b = sorted((w.y0, w.y1))
            cover = np.clip(np.minimum(b, ylo + grid.dy) - np.maximum(a, ylo), 0.0, None)
            open_x[p] -= cover / grid.dy
        else:
            q = int(round(w.y0 / grid.dy))
            a, b = sorted((w.x0, w.x1))
            cover = np.clip(np.minimum(b, xlo + grid.dx) - np.maximum(a, xlo), 0.0, None)
            open_y[:, q] -= cover / grid.dx
    np.clip(open_x, 0.0, 1.0, out=open_x)
    np.clip(open_y, 0.0, 1.0, out=open_y)
    # exact 0/1 away from partially covered faces
    open_x[np.abs(open_x) < 1e-12] = 0.0
    open_y[np.abs(open_y) < 1e-12] = 0.0
    for side, arr, idx in (("left", open_x, 0), ("right", open_x, -1),
                           ("bottom", open_y, (slice(None), 0)),
                           ("top", open_y, (slice(None), -1))):
        kind = getattr(boundaries, side)
        if kind == "wall":
            arr[idx] = 0.0
        elif kind == "periodic":
            arr[idx] = 1.0
    return open_x, open_y


def lax_friedrichs_sweep(phi: np.ndarray, a: np.ndarray, lam: float, openness: np.ndarray,
                         lo: str, hi: str) -> tuple[np.ndarray, float]:
    """One conservative Lax-Friedrichs sub-step along the last axis.

    ``a`` is the advection speed (same shape as ``phi``), ``lam = tau/h``,
    ``openness`` the face factors (``n + 1`` along the last axis, broadcast
    over the rest).  Outflow edges copy the edge cell into the ghost and allow
    no inflow.  Returns the new field and the net flux leaving through the
    two edges (in units of ``phi``).
    """
    g = a * phi
    # lam * F(phi_p, phi_{p+1}) with F = h/(2 tau) (phi_p - phi_{p+1}) + (g_p + g_{p+1})/2
    inner = 0.5 * (phi[..., :-1] - phi[..., 1:]) + 0.5 * lam * (g[..., :-1] + g[..., 1:])
    if lo == "periodic":
        edge = 0.5 * (phi[..., -1] - phi[..., 0]) + 0.5 * lam * (g[..., -1] + g[..., 0])
        G_lo = G_hi = edge
    else:
        G_lo = lam * np.minimum(g[..., 0], 0.0) if lo == "outflow" else np.zeros_like(g[..., 0])
        G_hi = lam * np.maximum(g[..., -1], 0.0) if hi == "outflow" else np.zeros_like(g[..., 0])
    G = np.concatenate([G_lo[..., None], inner, G_hi[..., None]], axis=-1) * openness
    out = phi - (G[..., 1:] - G[..., :-1])
    return out, float(G[..., -1].sum() - G[..., 0].sum())


def _guard(f: np.ndarray, where: str) -> np.ndarray:
    low = f.min()
    if not np.isfinite(low):
        raise NumericStateError(f"{where}: non-finite distribution")
    if low < -NEGATIVE_TOL:
        i, p, q = np.unravel_index(int(np.argmin(f)), f.shape)
        raise NumericStateError(
            f"{where}: f[{i}] = {low:.3e} at cell ({p}, {q}) below -{NEGATIVE_TOL:g}",
            cell=(int(p), int(q)))
    if low < 0.0:
        np.maximum(f, 0.0, out=f)
    return f


def advect_x(f: np.ndarray, rho: np.ndarray, thetas, tau: float, grid: Grid,
             quality: np.ndarray, law: VelocityLaw = VelocityLaw(),
             boundaries: BoundaryPolicy = BoundaryPolicy(),
             openness: Optional[np.ndarray] = None) -> np.ndarray:
    """One x-transport sub-step for the directions ``thetas`` (``f[i]`` moves
    along ``thetas[i]``) at the speed set by the frozen density ``rho``."""
    c = np.round(np.cos(np.atleast_1d(thetas)), 15)
    a = speed(rho, quality, law)[None] * c[:, None, None]
    if openness is None:
        openness = np.ones((grid.nx + 1, grid.ny))
        if boundaries.left == "wall":
            openness[0] = 0.0
        if boundaries.right == "wall":
            openness[-1] = 0.0
    out, _ = lax_friedrichs_sweep(np.swapaxes(f, 1, 2), np.swapaxes(a, 1, 2), tau / grid.dx,
                                  openness.T, boundaries.left, boundaries.right)
    return np.ascontiguousarray(np.swapaxes(out, 1, 2))


def advect_y(f: np.ndarray, rho: np.ndarray, thetas, tau: float, grid: Grid,
             quality: np.ndarray, law: VelocityLaw = VelocityLaw(),
             boundaries: BoundaryPolicy = BoundaryPolicy(),
             openness: Optional[np.ndarray] = None) -> np.ndarray:
    """Mirror of :func:`advect_x` along y."""
    s = np.round(np.sin(np.atleast_1d(thetas)), 15)
    a = speed(rho, quality, law)[None] * s[:, None, None]
    if openness is None:
        openness = np.ones((grid.nx, grid.ny + 1))
        if boundaries.bottom == "wall":
            openness[:, 0] = 0.0
        if boundaries.top == "wall":
            openness[:, -1] = 0.0
    out, _ = lax_friedrichs_sweep(f, a, tau / grid.dy, openness,
                                  boundaries.bottom, boundaries.top)
    return out


def interaction_step(f: np.ndarray, tau: float, tables: InteractionTables,
                     substeps: int = 1) -> np.ndarray:
    """Forward-Euler integration of the collision operator.

    ``tables`` must carry the pedestrian game for the current density; the
    interactions preserve density per cell, so they stay valid across the
    sub-steps.
    """
    f = f.copy()
    for m in range(substeps):
        f = f + tau * collision_field(f, tables)
        _guard(f, f"interaction sub-step {m}")
    return f


def preferred_direction_field(domain: DomainSpec, grid: Grid, dirs: DirectionSet) -> np.ndarray:
    """Geometric preferred direction for every direction and cell centre."""
    theta_G = np.empty((dirs.n, grid.nx, grid.ny))
    for p, x in enumerate(grid.x_centers):
        for q, y in enumerate(grid.y_centers):
            d_E, u_E = distance_to_exit((x, y), domain)
            for h in range(dirs.n):
                d_W, u_W, x_W = wall_query((x, y), dirs.theta[h], domain, u_E=u_E)
                theta_G[h, p, q] = geometric_preferred_direction(
                    GeometricQuery(d_E, u_E, d_W, u_W, x_W), dirs.theta[h])
    return theta_G


class Simulation:
    """Dimensionless simulation of one domain; owns the precomputed geometry.

    ``outflow`` accumulates the dimensionless mass that has left through
    outflow edges, so ``total_mass + outflow`` is conserved.
    """

    def __init__(self, domain: DomainSpec, grid: Grid, stepping: TimeStepping,
                 params: ModelParams, boundaries: BoundaryPolicy = BoundaryPolicy()):
        stepping.check_cfl(grid)
        self.domain = domain
        self.grid = grid
        self.stepping = stepping
        self.params = params
        self.boundaries = boundaries
        self.dirs = params.directions
        xc, yc = grid.centers()
        self.quality = quality_field(domain, xc, yc, params.alpha)
        self.theta_G = preferred_direction_field(domain, grid, self.dirs)
        self.geo_tables = InteractionTables.geometric(self.theta_G, self.quality, self.dirs)
        self.open_x, self.open_y = face_openness(domain, grid, boundaries)
        self.outflow = 0.0
        self._cos = self.dirs.cos[:, None, None]
        self._sin = self.dirs.sin[:, None, None]

    def total_mass(self, f: np.ndarray) -> float:
        return float(f.sum() * self.grid.cell_area)

    def _speed(self, f):
        return speed(f.sum(axis=0), self.quality, self.params.velocity_law)

    def transport_x(self, f: np.ndarray, tau: float) -> np.ndarray:
        a = self._speed(f)[None] * self._cos
        out, flux = lax_friedrichs_sweep(np.swapaxes(f, 1, 2), np.swapaxes(a, 1, 2),
                                         tau / self.grid.dx, self.open_x.T,
                                         self.boundaries.left, self.boundaries.right)
        self.outflow += flux * self.grid.cell_area
        return _guard(np.ascontiguousarray(np.swapaxes(out, 1, 2)), "x-transport")

    def transport_y(self, f: np.ndarray, tau: float) -> np.ndarray:
        a = self._speed(f)[None] * self._sin
        out, flux = lax_friedrichs_sweep(f, a, tau / self.grid.dy, self.open_y,
                                         self.boundaries.bottom, self.boundaries.top)
        self.outflow += flux * self.grid.cell_area
        return _guard(out, "y-transport")

    def tables(self, f: np.ndarray) -> InteractionTables:
        return self.geo_tables.with_pedestrian(
            f.sum(axis=0), self.quality, self.params.epsilon, self.dirs,
            self.grid.dx, self.grid.dy, self.boundaries.periodic_x, self.boundaries.periodic_y)

    def lie_step(self, f: np.ndarray, dt: Optional[float] = None) -> np.ndarray:
        """Advance ``f`` by one outer step: x-transport, y-transport, interactions."""
        dt = self.stepping.dt if dt is None else dt
        if dt == 0.0:
            return f.copy()
        M = self.stepping.substeps
        tau = dt / M
        for _ in range(M):
            f = self.transport_x(f, tau)
        for _ in range(M):
            f = self.transport_y(f, tau)
        return interaction_step(f, tau * self.params.rate_scale, self.tables(f), M)


@dataclass
class Trace:
    """Everything a run records.  Times are in seconds."""

    times: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    evacuated: bool = False
    problem: object = None
    final: Optional[np.ndarray] = None

    def record(self, name: str, value: float):
        self.series.setdefault(name, []).append(float(value))

    def metric_series(self, name: str, units: str = "") -> metrics.MetricSeries:
        return metrics.MetricSeries(tuple(self.times), tuple(self.series[name]), name, units)

    @property
    def evacuation_time(self) -> Optional[float]:
        if "in_room" not in self.series:
            return None
        return metrics.evacuation_time(self.metric_series("in_room"))


def _observe(trace: Trace, problem, sim: Simulation, f: np.ndarray, t_s: float):
    refs, grid = problem.refs, problem.grid
    trace.times.append(float(t_s))
    trace.record("total_mass", sim.total_mass(f))
    trace.record("outflow", sim.outflow)
    if problem.domain.exits:
        trace.record("in_room", metrics.person_count(f, grid.region_mask(problem.domain.room_region),
                                                     refs, grid))
    if problem.measurements:
        v = sim._speed(f)
        for region in problem.measurements:
            d_v, f_v = metrics.voronoi_density_flow(f, v, grid.region_mask(region.omega),
                                                    region.exit_width, refs)
            trace.record(f"density_{region.label}", d_v)
            trace.record(f"flow_{region.label}", f_v)
    if problem.lane_metric:
        trace.record("lane_order", metrics.lane_order_parameter(f, sim.dirs))


def run(scenario, progress=None) -> Trace:
    """Integrate a validated scenario to ``t_end`` or until evacuation.

    ``scenario`` is a :class:`~kincrowd.scenario.ScenarioConfig`.  Metric
    series are sampled every outer step; density snapshots every
    ``snapshot_every`` seconds.
    """
    problem = scenario.to_problem()
    sim = Simulation(problem.domain, problem.grid, problem.stepping, problem.params,
                     problem.boundaries)
    T = problem.refs.time
    f = problem.initial.copy()
    trace = Trace(problem=problem)
    cadence = problem.snapshot_every
    next_snap = 0.0
    dt = problem.stepping.dt
    n_steps = int(math.floor(problem.stepping.t_end / dt + 1e-9)) if dt > 0 else 0
    for k in range(n_steps + 1):
        t_s = k * dt * T
        _observe(trace, problem, sim, f, t_s)
        if cadence and t_s >= next_snap - 1e-9:
            trace.snapshots.append((t_s, f.copy()))
            while next_snap <= t_s + 1e-9:
                next_snap += cadence
        if problem.stop_when_evacuated and "in_room" in trace.series \
                and trace.series["in_room"][-1] < metrics.EVACUATED_BELOW:
            trace.evacuated = True
            break
        if k == n_steps:
            break
        try:
            f = sim.lie_step(f)
        except NumericStateError as exc:
            raise NumericStateError(f"step {k + 1} (t = {(k + 1) * dt * T:.4g} s): {exc}",
                                    step=k + 1, cell=exc.cell) from exc
        if progress:
            progress(k + 1, n_steps)
    if not trace.snapshots or trace.snapshots[-1][0] != trace.times[-1]:
        trace.snapshots.append((trace.times[-1], f.copy()))
    trace.final = f
    return trace
