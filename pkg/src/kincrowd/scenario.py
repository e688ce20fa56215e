"""Scenario configuration: schema, TOML encoding, validation, and conversion to
the dimensionless problem the solver integrates.

Configs are written in metres, seconds and persons.  ``to_problem`` divides
lengths by the reference length ``D``, times by ``T = D / V_M`` and densities
by the capacity ``rho_M``.  Cluster densities are given already normalised
(fractions of ``rho_M``).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import tomli
import tomli_w

from .errors import ConfigError
from .geometry import DomainSpec, Obstacle, Rect, Segment
from .kinetics import DirectionSet, ModelParams, VelocityLaw
from .metrics import MeasurementRegion, person_count
from .solver import BoundaryPolicy, Grid, TimeStepping, auto_substeps

SIDES = ("left", "right", "bottom", "top")
SHAPES = ("circle", "rectangle")
PROFILES = ("constant", "linear", "parabolic")
COUNT_TOL = 0.5
DENSITY_CAP_TOL = 1e-8


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError("missing required key", f"{path}.{key}" if path else key)
    return d[key]


def _number(value, path: str, positive: bool = False, lo=None, hi=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError("must be finite", path)
    if positive and value <= 0:
        raise ConfigError(f"must be positive, got {value:g}", path)
    if lo is not None and value < lo:
        raise ConfigError(f"must be >= {lo:g}, got {value:g}", path)
    if hi is not None and value > hi:
        raise ConfigError(f"must be <= {hi:g}, got {value:g}", path)
    return value


def _numbers(value, n: int, path: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"expected a list of {n} numbers, got {value!r}", path)
    return tuple(_number(v, f"{path}[{k}]") for k, v in enumerate(value))


def _choice(value, options, path: str) -> str:
    if value not in options:
        raise ConfigError(f"expected one of {options}, got {value!r}", path)
    return value


def _no_extra(d: dict, allowed, path: str):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) {extra}", path or "<root>")


def _rect(values, path: str) -> Rect:
    try:
        return Rect(*values)
    except ConfigError as exc:
        raise ConfigError(str(exc), path) from None


@dataclass(frozen=True)
class ReferenceQuantities:
    length: float           # D, metres
    speed: float            # V_M, metres per second
    capacity: float         # rho_M, persons per square metre

    @property
    def time(self) -> float:
        return self.length / self.speed

    @classmethod
    def from_dict(cls, d: dict, path="references"):
        _no_extra(d, ("length_m", "speed_m_s", "capacity_per_m2"), path)
        return cls(_number(_require(d, "length_m", path), f"{path}.length_m", positive=True),
                   _number(_require(d, "speed_m_s", path), f"{path}.speed_m_s", positive=True),
                   _number(_require(d, "capacity_per_m2", path), f"{path}.capacity_per_m2",
                           positive=True))

    def to_dict(self) -> dict:
        return {"length_m": self.length, "speed_m_s": self.speed,
                "capacity_per_m2": self.capacity}


@dataclass(frozen=True)
class ModelSpec:
    alpha: float = 1.0
    epsilon: float = 0.4
    velocity_law: str = "cubic"
    directions: int = 8
    rate_time_unit_s: Optional[float] = None    # None: rates are per reference time

    @classmethod
    def from_dict(cls, d: dict, path="model"):
        _no_extra(d, ("alpha", "epsilon", "velocity_law", "directions", "rate_time_unit_s"), path)
        n = d.get("directions", 8)
        if isinstance(n, bool) or not isinstance(n, int) or n < 3:
            raise ConfigError(f"expected an integer >= 3, got {n!r}", f"{path}.directions")
        return cls(_number(d.get("alpha", 1.0), f"{path}.alpha", lo=0, hi=1),
                   _number(d.get("epsilon", 0.4), f"{path}.epsilon", lo=0, hi=1),
                   _choice(d.get("velocity_law", "cubic"), ("cubic", "purple", "orange", "blue"),
                           f"{path}.velocity_law"),
                   n,
                   None if d.get("rate_time_unit_s") is None else
                   _number(d["rate_time_unit_s"], f"{path}.rate_time_unit_s", positive=True))

    def to_dict(self) -> dict:
        out = {"alpha": self.alpha, "epsilon": self.epsilon,
               "velocity_law": self.velocity_law, "directions": self.directions}
        if self.rate_time_unit_s is not None:
            out["rate_time_unit_s"] = self.rate_time_unit_s
        return out

    def params(self, refs: ReferenceQuantities) -> ModelParams:
        """Solver parameters.  The interaction rates are ``1 - rho`` and ``rho``
        per ``rate_time_unit_s`` seconds, or per reference time when unset."""
        unit = refs.time if self.rate_time_unit_s is None else self.rate_time_unit_s
        return ModelParams(self.alpha, self.epsilon, VelocityLaw(self.velocity_law),
                           DirectionSet(self.directions), rate_scale=refs.time / unit)


@dataclass(frozen=True)
class ExitSpec:
    label: str
    side: str
    center: float           # coordinate along the side, metres
    width: float

    @classmethod
    def from_dict(cls, d: dict, path: str):
        _no_extra(d, ("label", "side", "center", "width"), path)
        return cls(str(_require(d, "label", path)),
                   _choice(_require(d, "side", path), SIDES, f"{path}.side"),
                   _number(_require(d, "center", path), f"{path}.center"),
                   _number(_require(d, "width", path), f"{path}.width", positive=True))

    def to_dict(self) -> dict:
        return {"label": self.label, "side": self.side, "center": self.center,
                "width": self.width}

    def segment(self, room: Rect) -> Segment:
        a, b = self.center - self.width / 2, self.center + self.width / 2
        if self.side in ("left", "right"):
            x = room.xmin if self.side == "left" else room.xmax
            return Segment(x, a, x, b)
        y = room.ymin if self.side == "bottom" else room.ymax
        return Segment(a, y, b, y)


@dataclass(frozen=True)
class ObstacleSpec:
    effective_area: tuple
    footprint: tuple
    alpha_eff: float

    @classmethod
    def from_dict(cls, d: dict, path: str):
        _no_extra(d, ("effective_area", "footprint", "alpha_eff"), path)
        return cls(_numbers(_require(d, "effective_area", path), 4, f"{path}.effective_area"),
                   _numbers(_require(d, "footprint", path), 4, f"{path}.footprint"),
                   _number(_require(d, "alpha_eff", path), f"{path}.alpha_eff", lo=0, hi=1))

    def to_dict(self) -> dict:
        return {"effective_area": list(self.effective_area), "footprint": list(self.footprint),
                "alpha_eff": self.alpha_eff}


@dataclass(frozen=True)
class GeometrySpec:
    box: tuple
    room: tuple
    exits: tuple = ()
    extra_walls: tuple = ()
    open_sides: tuple = ()
    obstacles: tuple = ()

    @classmethod
    def from_dict(cls, d: dict, path="geometry"):
        _no_extra(d, ("box", "room", "exits", "extra_walls", "open_sides", "obstacles"), path)
        exits = tuple(ExitSpec.from_dict(e, f"{path}.exits.{k}")
                      for k, e in enumerate(d.get("exits", [])))
        walls = tuple(_numbers(w, 4, f"{path}.extra_walls.{k}")
                      for k, w in enumerate(d.get("extra_walls", [])))
        open_sides = tuple(_choice(s, SIDES, f"{path}.open_sides")
                           for s in d.get("open_sides", []))
        obstacles = tuple(ObstacleSpec.from_dict(o, f"{path}.obstacles.{k}")
                          for k, o in enumerate(d.get("obstacles", [])))
        return cls(_numbers(_require(d, "box", path), 4, f"{path}.box"),
                   _numbers(_require(d, "room", path), 4, f"{path}.room"),
                   exits, walls, open_sides, obstacles)

    def to_dict(self) -> dict:
        out = {"box": list(self.box), "room": list(self.room)}
        if self.open_sides:
            out["open_sides"] = list(self.open_sides)
        if self.extra_walls:
            out["extra_walls"] = [list(w) for w in self.extra_walls]
        if self.exits:
            out["exits"] = [e.to_dict() for e in self.exits]
        if self.obstacles:
            out["obstacles"] = [o.to_dict() for o in self.obstacles]
        return out

    def walls(self) -> list[Segment]:
        """Room perimeter minus exits and open sides, plus the extra walls."""
        room = Rect(*self.room)
        walls = []
        sides = {"bottom": (room.xmin, room.ymin, room.xmax, room.ymin),
                 "right": (room.xmax, room.ymin, room.xmax, room.ymax),
                 "top": (room.xmin, room.ymax, room.xmax, room.ymax),
                 "left": (room.xmin, room.ymin, room.xmin, room.ymax)}
        for side, (x0, y0, x1, y1) in sides.items():
            if side in self.open_sides:
                continue
            horizontal = side in ("bottom", "top")
            lo, hi = (x0, x1) if horizontal else (y0, y1)
            cuts = sorted((e.center - e.width / 2, e.center + e.width / 2)
                          for e in self.exits if e.side == side)
            start = lo
            for a, b in cuts + [(hi, hi)]:
                if a - start > 1e-12:
                    walls.append(Segment(start, y0, a, y0) if horizontal
                                 else Segment(x0, start, x0, a))
                start = max(start, b)
        walls.extend(Segment(*w) for w in self.extra_walls)
        return walls


@dataclass(frozen=True)
class InitialCluster:
    shape: str
    center: tuple
    direction: int                      # 1-based label theta_1 .. theta_n
    profile: str = "constant"
    radius: Optional[float] = None      # circle
    size: Optional[tuple] = None        # rectangle (width, height)
    density: Optional[float] = None     # constant
    front_density: Optional[float] = None   # linear, side facing the initial direction
    back_density: Optional[float] = None
    peak_density: Optional[float] = None    # parabolic
    edge_density: Optional[float] = None
    persons: Optional[float] = None

    _PROFILE_KEYS = {"constant": ("density",), "linear": ("front_density", "back_density"),
                     "parabolic": ("peak_density", "edge_density")}

    @classmethod
    def from_dict(cls, d: dict, path: str):
        keys = ("shape", "center", "direction", "profile", "radius", "size", "density",
                "front_density", "back_density", "peak_density", "edge_density", "persons")
        _no_extra(d, keys, path)
        shape = _choice(_require(d, "shape", path), SHAPES, f"{path}.shape")
        profile = _choice(d.get("profile", "constant"), PROFILES, f"{path}.profile")
        direction = _require(d, "direction", path)
        if isinstance(direction, bool) or not isinstance(direction, int) or direction < 1:
            raise ConfigError(f"expected a 1-based direction label, got {direction!r}",
                              f"{path}.direction")
        kw: dict[str, Any] = {}
        if shape == "circle":
            kw["radius"] = _number(_require(d, "radius", path), f"{path}.radius", positive=True)
        else:
            size = _numbers(_require(d, "size", path), 2, f"{path}.size")
            if min(size) <= 0:
                raise ConfigError("sizes must be positive", f"{path}.size")
            kw["size"] = size
        for key in cls._PROFILE_KEYS[profile]:
            kw[key] = _number(_require(d, key, path), f"{path}.{key}", lo=0, hi=1)
        if "persons" in d:
            kw["persons"] = _number(d["persons"], f"{path}.persons", positive=True)
        return cls(shape, _numbers(_require(d, "center", path), 2, f"{path}.center"),
                   direction, profile, **kw)

    def to_dict(self) -> dict:
        out = {"shape": self.shape, "center": list(self.center), "direction": self.direction,
               "profile": self.profile}
        if self.radius is not None:
            out["radius"] = self.radius
        if self.size is not None:
            out["size"] = list(self.size)
        for key in self._PROFILE_KEYS[self.profile]:
            out[key] = getattr(self, key)
        if self.persons is not None:
            out["persons"] = self.persons
        return out

    def bounds(self) -> Rect:
        cx, cy = self.center
        if self.shape == "circle":
            return Rect.from_center(cx, cy, 2 * self.radius, 2 * self.radius)
        return Rect.from_center(cx, cy, *self.size)

    def profile_on(self, x: np.ndarray, y: np.ndarray, theta: float) -> np.ndarray:
        """Normalised density of this cluster at points ``(x, y)`` in metres."""
        cx, cy = self.center
        dx, dy = x - cx, y - cy
        if self.shape == "circle":
            inside = dx ** 2 + dy ** 2 <= self.radius ** 2 * (1 + 1e-12)
        else:
            w, h = self.size
            inside = (np.abs(dx) <= w / 2 + 1e-12) & (np.abs(dy) <= h / 2 + 1e-12)
        if self.profile == "constant":
            rho = np.full(np.broadcast(dx, dy).shape, self.density)
        elif self.profile == "linear":
            ux, uy = math.cos(theta), math.sin(theta)
            if self.shape == "circle":
                half = self.radius
            else:
                half = self.size[0] / 2 * abs(ux) + self.size[1] / 2 * abs(uy)
            s = np.clip((dx * ux + dy * uy + half) / (2 * half), 0.0, 1.0)   # 0 back, 1 front
            rho = self.back_density + (self.front_density - self.back_density) * s
        else:
            if self.shape == "circle":
                bump = 1.0 - (dx ** 2 + dy ** 2) / self.radius ** 2
            else:
                w, h = self.size
                bump = (1.0 - (2 * dx / w) ** 2) * (1.0 - (2 * dy / h) ** 2)
            rho = self.edge_density + (self.peak_density - self.edge_density) * np.clip(bump, 0, 1)
        return np.where(inside, rho, 0.0)


@dataclass(frozen=True)
class NumericsSpec:
    dx: float
    dy: float
    dt: float
    t_end: float
    substeps: Union[int, str] = "auto"

    @classmethod
    def from_dict(cls, d: dict, path="numerics"):
        _no_extra(d, ("dx", "dy", "dt", "t_end", "substeps"), path)
        m = d.get("substeps", "auto")
        if m != "auto" and (isinstance(m, bool) or not isinstance(m, int) or m < 3):
            raise ConfigError(f"expected 'auto' or an integer >= 3, got {m!r}",
                              f"{path}.substeps")
        return cls(_number(_require(d, "dx", path), f"{path}.dx", positive=True),
                   _number(_require(d, "dy", path), f"{path}.dy", positive=True),
                   _number(_require(d, "dt", path), f"{path}.dt", lo=0),
                   _number(_require(d, "t_end", path), f"{path}.t_end", lo=0), m)

    def to_dict(self) -> dict:
        return {"dx": self.dx, "dy": self.dy, "dt": self.dt, "t_end": self.t_end,
                "substeps": self.substeps}


@dataclass(frozen=True)
class MeasurementSpec:
    label: str
    region: tuple
    exit: str

    @classmethod
    def from_dict(cls, d: dict, path: str):
        _no_extra(d, ("label", "region", "exit"), path)
        return cls(str(_require(d, "label", path)),
                   _numbers(_require(d, "region", path), 4, f"{path}.region"),
                   str(_require(d, "exit", path)))

    def to_dict(self) -> dict:
        return {"label": self.label, "region": list(self.region), "exit": self.exit}


@dataclass(frozen=True)
class OutputSpec:
    snapshot_every: float = 1.5
    stop_when_evacuated: bool = True
    lane_metric: bool = False

    @classmethod
    def from_dict(cls, d: dict, path="output"):
        _no_extra(d, ("snapshot_every", "stop_when_evacuated", "lane_metric"), path)
        for key in ("stop_when_evacuated", "lane_metric"):
            if key in d and not isinstance(d[key], bool):
                raise ConfigError("expected true/false", f"{path}.{key}")
        return cls(_number(d.get("snapshot_every", 1.5), f"{path}.snapshot_every",
                           positive=True),
                   d.get("stop_when_evacuated", True), d.get("lane_metric", False))

    def to_dict(self) -> dict:
        return {"snapshot_every": self.snapshot_every,
                "stop_when_evacuated": self.stop_when_evacuated,
                "lane_metric": self.lane_metric}


@dataclass
class Problem:
    """Dimensionless bundle handed to the solver."""

    refs: ReferenceQuantities
    domain: DomainSpec
    grid: Grid
    stepping: TimeStepping
    params: ModelParams
    boundaries: BoundaryPolicy
    initial: np.ndarray
    measurements: list
    snapshot_every: float
    stop_when_evacuated: bool
    lane_metric: bool


_SECTIONS = ("scenario", "references", "model", "geometry", "clusters", "numerics",
             "boundaries", "measurements", "output", "provenance")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    refs: ReferenceQuantities
    model: ModelSpec
    geometry: GeometrySpec
    numerics: NumericsSpec
    boundaries: BoundaryPolicy
    clusters: tuple = ()
    measurements: tuple = ()
    output: OutputSpec = OutputSpec()
    description: str = ""
    provenance: dict = field(default_factory=dict, compare=False)

    # -- encoding ---------------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a table")
        _no_extra(d, _SECTIONS, "")
        meta = d.get("scenario", {})
        _no_extra(meta, ("name", "description"), "scenario")
        b = d.get("boundaries", {})
        _no_extra(b, SIDES, "boundaries")
        cfg = cls(
            name=str(meta.get("name", "unnamed")),
            description=str(meta.get("description", "")),
            refs=ReferenceQuantities.from_dict(_require(d, "references", "")),
            model=ModelSpec.from_dict(d.get("model", {})),
            geometry=GeometrySpec.from_dict(_require(d, "geometry", "")),
            numerics=NumericsSpec.from_dict(_require(d, "numerics", "")),
            boundaries=BoundaryPolicy(**{s: b.get(s, "wall") for s in SIDES}),
            clusters=tuple(InitialCluster.from_dict(c, f"clusters.{k}")
                           for k, c in enumerate(d.get("clusters", []))),
            measurements=tuple(MeasurementSpec.from_dict(m, f"measurements.{k}")
                               for k, m in enumerate(d.get("measurements", []))),
            output=OutputSpec.from_dict(d.get("output", {})),
            provenance={str(k): str(v) for k, v in d.get("provenance", {}).items()},
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = {"scenario": {"name": self.name},
               "references": self.refs.to_dict(),
               "model": self.model.to_dict(),
               "geometry": self.geometry.to_dict(),
               "numerics": self.numerics.to_dict(),
               "boundaries": {s: getattr(self.boundaries, s) for s in SIDES},
               "output": self.output.to_dict()}
        if self.description:
            out["scenario"]["description"] = self.description
        if self.clusters:
            out["clusters"] = [c.to_dict() for c in self.clusters]
        if self.measurements:
            out["measurements"] = [m.to_dict() for m in self.measurements]
        if self.provenance:
            out["provenance"] = dict(self.provenance)
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def with_overrides(self, overrides: dict) -> "ScenarioConfig":
        """Copy with dotted-path overrides, e.g. ``{"geometry.exits.0.width": 3.0}``."""
        d = copy.deepcopy(self.to_dict())
        for key, value in overrides.items():
            set_dotted(d, key, value)
        return ScenarioConfig.from_dict(d)

    # -- derived quantities ---------------------------------------------------
    def substeps(self, grid: Optional[Grid] = None) -> int:
        grid = grid or self._grid()
        if self.numerics.substeps == "auto":
            return auto_substeps(self.numerics.dt / self.refs.time, grid)
        return int(self.numerics.substeps)

    def _grid(self) -> Grid:
        D = self.refs.length
        box = Rect(*self.geometry.box)
        return Grid.from_spacing(box.xmax / D, box.ymax / D,
                                 self.numerics.dx / D, self.numerics.dy / D)

    def domain(self, dimensionless: bool = True) -> DomainSpec:
        g = self.geometry
        room = _rect(g.room, "geometry.room")
        obstacles = []
        for k, o in enumerate(g.obstacles):
            try:
                obstacles.append(Obstacle(Rect(*o.footprint), Rect(*o.effective_area),
                                          o.alpha_eff))
            except ConfigError as exc:
                raise ConfigError(str(exc), f"geometry.obstacles.{k}") from None
        try:
            dom = DomainSpec(_rect(g.box, "geometry.box"), tuple(g.walls()),
                             tuple(e.segment(room) for e in g.exits), tuple(obstacles), room)
        except ConfigError as exc:
            raise ConfigError(str(exc), exc.field or "geometry") from None
        return dom.scaled(1.0 / self.refs.length) if dimensionless else dom

    def validate(self):
        g = self.geometry
        box, room = _rect(g.box, "geometry.box"), _rect(g.room, "geometry.room")
        if box.xmin != 0.0 or box.ymin != 0.0:
            raise ConfigError("the bounding box must start at the origin", "geometry.box")
        if not box.contains_rect(room):
            raise ConfigError("room lies outside the bounding box", "geometry.room")
        labels = [e.label for e in g.exits]
        if len(set(labels)) != len(labels):
            raise ConfigError("exit labels must be unique", "geometry.exits")
        for k, e in enumerate(g.exits):
            lo, hi = (room.ymin, room.ymax) if e.side in ("left", "right") else (room.xmin, room.xmax)
            if e.center - e.width / 2 < lo - 1e-9 or e.center + e.width / 2 > hi + 1e-9:
                raise ConfigError("exit does not fit on its side of the room",
                                  f"geometry.exits.{k}")
            if e.side in g.open_sides:
                raise ConfigError("exit placed on an open side", f"geometry.exits.{k}")
        spans = {}
        for k, e in enumerate(g.exits):
            for a, b, j in spans.get(e.side, []):
                if e.center - e.width / 2 < b and a < e.center + e.width / 2:
                    raise ConfigError(f"exit overlaps exit {j}", f"geometry.exits.{k}")
            spans.setdefault(e.side, []).append(
                (e.center - e.width / 2, e.center + e.width / 2, k))
        domain = self.domain(dimensionless=False)
        for k, ob in enumerate(domain.obstacles):
            if not room.contains_rect(ob.effective_area):
                raise ConfigError("effective area leaves the room",
                                  f"geometry.obstacles.{k}.effective_area")
        n = self.model.directions
        for k, c in enumerate(self.clusters):
            if c.direction > n:
                raise ConfigError(f"direction label {c.direction} > {n}", f"clusters.{k}.direction")
            if not room.contains_rect(c.bounds()):
                raise ConfigError("cluster crosses the room walls", f"clusters.{k}")
        for k, m in enumerate(self.measurements):
            region = _rect(m.region, f"measurements.{k}.region")
            if not room.contains_rect(region):
                raise ConfigError("measurement region leaves the room", f"measurements.{k}.region")
            if m.exit not in labels:
                raise ConfigError(f"unknown exit label {m.exit!r}", f"measurements.{k}.exit")
        grid = self._grid()
        stepping = TimeStepping(self.numerics.dt / self.refs.time, self.substeps(grid),
                                self.numerics.t_end / self.refs.time)
        stepping.check_cfl(grid)
        for k, m in enumerate(self.measurements):
            if grid.region_mask(Rect(*m.region).scaled(1 / self.refs.length)).sum() < 4:
                raise ConfigError("region covers fewer than 4 cells", f"measurements.{k}.region")
        self.initial_field(grid)

    def initial_field(self, grid: Optional[Grid] = None) -> np.ndarray:
        """Superpose the clusters on the grid; see :func:`build_initial_field`."""
        grid = grid or self._grid()
        dirs = DirectionSet(self.model.directions)
        D = self.refs.length
        xc, yc = grid.centers()
        f = np.zeros((dirs.n, grid.nx, grid.ny))
        for k, c in enumerate(self.clusters):
            i = c.direction - 1
            rho = c.profile_on(xc * D, yc * D, dirs.theta[i])
            if c.persons is not None:
                count = person_count(rho, None, self.refs, grid)
                if count <= 0:
                    raise ConfigError("cluster covers no cell centre", f"clusters.{k}")
                rho = rho * (c.persons / count)
            f[i] += rho
        peak = f.sum(axis=0).max() if f.size else 0.0
        if peak > 1.0 + DENSITY_CAP_TOL:
            raise ConfigError(f"initial density reaches {peak:.4f} > 1", "clusters")
        return f

    @cached_property
    def problem(self) -> Problem:
        grid = self._grid()
        D = self.refs.length
        domain = self.domain()
        exits = {e.label: e for e in self.geometry.exits}
        regions = [MeasurementRegion(m.label, Rect(*m.region).scaled(1 / D),
                                     exits[m.exit].width) for m in self.measurements]
        return Problem(
            refs=self.refs, domain=domain, grid=grid,
            stepping=TimeStepping(self.numerics.dt / self.refs.time, self.substeps(grid),
                                  self.numerics.t_end / self.refs.time),
            params=self.model.params(self.refs), boundaries=self.boundaries,
            initial=self.initial_field(grid), measurements=regions,
            snapshot_every=self.output.snapshot_every,
            stop_when_evacuated=self.output.stop_when_evacuated and bool(self.geometry.exits),
            lane_metric=self.output.lane_metric)

    def to_problem(self) -> Problem:
        return self.problem


def load_and_validate(text: str) -> ScenarioConfig:
    """Parse a TOML scenario document and validate it completely."""
    try:
        d = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from None
    return ScenarioConfig.from_dict(d)


def load_file(path: Union[str, Path]) -> ScenarioConfig:
    return load_and_validate(Path(path).read_text())


def build_initial_field(config: ScenarioConfig) -> np.ndarray:
    """Initial distribution ``f`` (shape ``(n, nx, ny)``).

    Each cluster's mass goes entirely to its direction; clusters with a
    ``persons`` target are rescaled to hold exactly that many people.
    Superposition is additive and rejected if the density exceeds 1.
    """
    return config.initial_field()


def parse_value(text: str):
    """Interpret an override value as a TOML literal, or keep it as a string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def set_dotted(d: dict, key: str, value):
    parts = key.split(".")
    node = d
    for depth, part in enumerate(parts):
        last = depth == len(parts) - 1
        where = ".".join(parts[:depth + 1])
        if isinstance(node, list):
            if not part.isdigit() or int(part) >= len(node):
                raise ConfigError("no such list element", where)
            part = int(part)
        elif not isinstance(node, dict) or part not in node:
            raise ConfigError("no such config key", where)
        if last:
            node[part] = value
        else:
            node = node[part]
