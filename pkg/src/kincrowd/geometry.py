"""Walkable-domain geometry: walls, exits, obstacles and the per-position queries
that steer pedestrians (distance/direction to the exit, wall collision point).

All coordinates are dimensionless (already divided by the reference length),
so every distance returned here is clamped to ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError

_EPS = 1e-12
_TOL = 1e-9

Vector = tuple[float, float]


def _unit(vx: float, vy: float) -> Vector:
    n = math.hypot(vx, vy)
    return (vx / n, vy / n)


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ConfigError(f"degenerate rectangle {self.as_list()}")

    @classmethod
    def from_center(cls, cx, cy, width, height):
        return cls(cx - width / 2, cy - height / 2, cx + width / 2, cy + height / 2)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Vector:
        return ((self.xmin + self.xmax) / 2, (self.ymin + self.ymax) / 2)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def corners(self) -> list[Vector]:
        return [(self.xmin, self.ymin), (self.xmax, self.ymin),
                (self.xmax, self.ymax), (self.xmin, self.ymax)]

    def edges(self) -> list["Segment"]:
        c = self.corners()
        return [Segment(*c[k], *c[(k + 1) % 4]) for k in range(4)]

    def contains(self, x: float, y: float, tol: float = _TOL) -> bool:
        """Closed containment."""
        return (self.xmin - tol <= x <= self.xmax + tol
                and self.ymin - tol <= y <= self.ymax + tol)

    def contains_strictly(self, x: float, y: float, tol: float = _TOL) -> bool:
        return (self.xmin + tol < x < self.xmax - tol
                and self.ymin + tol < y < self.ymax - tol)

    def contains_rect(self, other: "Rect", strict: bool = False) -> bool:
        if strict:
            return (self.xmin < other.xmin and other.xmax < self.xmax
                    and self.ymin < other.ymin and other.ymax < self.ymax)
        return all(self.contains(*c) for c in other.corners())

    def distance(self, x: float, y: float) -> float:
        dx = max(self.xmin - x, 0.0, x - self.xmax)
        dy = max(self.ymin - y, 0.0, y - self.ymax)
        return math.hypot(dx, dy)

    def mask(self, xc: np.ndarray, yc: np.ndarray, tol: float = _TOL) -> np.ndarray:
        """Boolean mask of points (broadcast arrays) inside the closed rectangle."""
        return ((xc >= self.xmin - tol) & (xc <= self.xmax + tol)
                & (yc >= self.ymin - tol) & (yc <= self.ymax + tol))

    def scaled(self, k: float) -> "Rect":
        return Rect(self.xmin * k, self.ymin * k, self.xmax * k, self.ymax * k)

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]

    def segment_crosses_interior(self, p: Vector, q: Vector) -> bool:
        """True when the closed segment p-q passes through the open interior.

        Segments that only touch the boundary (or run along an edge) do not count.
        """
        t0, t1 = 0.0, 1.0
        dx, dy = q[0] - p[0], q[1] - p[1]
        for denom, num in ((-dx, p[0] - self.xmin), (dx, self.xmax - p[0]),
                           (-dy, p[1] - self.ymin), (dy, self.ymax - p[1])):
            if abs(denom) < _EPS:
                if num < 0:
                    return False
                continue
            t = num / denom
            if denom < 0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
            if t0 > t1:
                return False
        tm = 0.5 * (t0 + t1)
        return self.contains_strictly(p[0] + tm * dx, p[1] + tm * dy)


@dataclass(frozen=True)
class Segment:
    """Axis-aligned line segment."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if abs(self.x0 - self.x1) > _EPS and abs(self.y0 - self.y1) > _EPS:
            raise ConfigError(f"segment {self.as_list()} is not axis-aligned")
        if self.length <= _EPS:
            raise ConfigError(f"segment {self.as_list()} has zero length")

    @property
    def vertical(self) -> bool:
        return abs(self.x0 - self.x1) <= _EPS

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def midpoint(self) -> Vector:
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    @property
    def tangent(self) -> Vector:
        return _unit(self.x1 - self.x0, self.y1 - self.y0)

    def closest_point(self, x: float, y: float) -> Vector:
        ax, ay = self.x0, self.y0
        bx, by = self.x1, self.y1
        L2 = (bx - ax) ** 2 + (by - ay) ** 2
        t = ((x - ax) * (bx - ax) + (y - ay) * (by - ay)) / L2
        t = min(1.0, max(0.0, t))
        return (ax + t * (bx - ax), ay + t * (by - ay))

    def distance(self, x: float, y: float) -> float:
        cx, cy = self.closest_point(x, y)
        return math.hypot(x - cx, y - cy)

    def ray_hit(self, x: float, y: float, dx: float, dy: float) -> Optional[float]:
        """Ray parameter t > 0 at which ``(x, y) + t (dx, dy)`` meets the segment."""
        if self.vertical:
            if abs(dx) < _EPS:
                return None
            t = (self.x0 - x) / dx
            lo, hi = sorted((self.y0, self.y1))
            hit = y + t * dy
        else:
            if abs(dy) < _EPS:
                return None
            t = (self.y0 - y) / dy
            lo, hi = sorted((self.x0, self.x1))
            hit = x + t * dx
        if t <= _EPS or hit < lo - _TOL or hit > hi + _TOL:
            return None
        return t

    def overlap_length(self, other: "Segment") -> float:
        """Length of the collinear overlap with another segment (0 if none)."""
        if self.vertical != other.vertical:
            return 0.0
        if self.vertical:
            if abs(self.x0 - other.x0) > _TOL:
                return 0.0
            a = sorted((self.y0, self.y1))
            b = sorted((other.y0, other.y1))
        else:
            if abs(self.y0 - other.y0) > _TOL:
                return 0.0
            a = sorted((self.x0, self.x1))
            b = sorted((other.x0, other.x1))
        return max(0.0, min(a[1], b[1]) - max(a[0], b[0]))

    def scaled(self, k: float) -> "Segment":
        return Segment(self.x0 * k, self.y0 * k, self.x1 * k, self.y1 * k)

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class Obstacle:
    """A real obstacle and the enlarged area used to steer around it.

    The real footprint is what pedestrians must avoid; the effective area
    (four times larger) is what they see as a wall and where ``alpha_eff``
    replaces the base environment quality.
    """

    real_footprint: Rect
    effective_area: Rect
    alpha_eff: float

    def __post_init__(self):
        if not 0.0 <= self.alpha_eff <= 1.0:
            raise ConfigError(f"alpha_eff={self.alpha_eff} outside [0, 1]")
        if not self.effective_area.contains_rect(self.real_footprint):
            raise ConfigError("real footprint is not enclosed by the effective area")
        ratio = self.effective_area.area / self.real_footprint.area
        if abs(ratio - 4.0) > 4.0 * _TOL:
            raise ConfigError(f"effective area is {ratio:.6g}x the footprint, expected 4x")

    def scaled(self, k: float) -> "Obstacle":
        return Obstacle(self.real_footprint.scaled(k), self.effective_area.scaled(k),
                        self.alpha_eff)


@dataclass(frozen=True)
class DomainSpec:
    bounding_box: Rect
    walls: tuple[Segment, ...]
    exits: tuple[Segment, ...]
    obstacles: tuple[Obstacle, ...] = ()
    room_region: Optional[Rect] = None
    _boundary: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))
        object.__setattr__(self, "exits", tuple(self.exits))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.room_region is None:
            object.__setattr__(self, "room_region", self.bounding_box)
        self._validate()
        boundary = [(s, "wall") for s in self.walls]
        for ob in self.obstacles:
            boundary.extend((s, "wall") for s in ob.effective_area.edges())
        boundary.extend((s, "exit") for s in self.exits)
        object.__setattr__(self, "_boundary", tuple(boundary))

    def _validate(self):
        box = self.bounding_box
        for s in self.walls + self.exits:
            if not (box.contains(s.x0, s.y0) and box.contains(s.x1, s.y1)):
                raise ConfigError(f"segment {s.as_list()} leaves the bounding box")
        for e in self.exits:
            for w in self.walls:
                if e.overlap_length(w) > _TOL:
                    raise ConfigError(f"exit {e.as_list()} overlaps wall {w.as_list()}")
        for ob in self.obstacles:
            if not box.contains_rect(ob.effective_area):
                raise ConfigError("obstacle effective area leaves the bounding box")
        if not box.contains_rect(self.room_region):
            raise ConfigError("room region leaves the bounding box")

    def scaled(self, k: float) -> "DomainSpec":
        return DomainSpec(self.bounding_box.scaled(k),
                          tuple(s.scaled(k) for s in self.walls),
                          tuple(s.scaled(k) for s in self.exits),
                          tuple(o.scaled(k) for o in self.obstacles),
                          self.room_region.scaled(k))

    def check_inside(self, x: float, y: float):
        if not self.bounding_box.contains(x, y):
            raise DomainError(f"point ({x:.6g}, {y:.6g}) outside the bounding box")

    def exit_normal(self, exit_seg: Segment) -> Vector:
        """Unit normal of an exit segment pointing out of the room."""
        tx, ty = exit_seg.tangent
        mx, my = exit_seg.midpoint
        nx, ny = ty, -tx
        h = 1e-6
        if self.room_region.contains(mx + h * nx, my + h * ny, tol=0.0):
            nx, ny = -nx, -ny
        return (nx, ny)


class GeometricQuery(NamedTuple):
    d_E: float
    u_E: Optional[Vector]
    d_W: float
    u_W: Optional[Vector]
    x_W: Optional[Vector]


def nearest_exit_point(x: Vector, domain: DomainSpec) -> tuple[float, Vector, Segment]:
    best = None
    for e in domain.exits:
        p = e.closest_point(*x)
        d = math.hypot(x[0] - p[0], x[1] - p[1])
        if best is None or d < best[0] - _EPS:
            best = (d, p, e)
    return best


def _blocking_obstacle(x: Vector, target: Vector, domain: DomainSpec) -> Optional[Obstacle]:
    """First effective area crossed by the straight path x -> target, if it is near."""
    hits = []
    for ob in domain.obstacles:
        area = ob.effective_area
        if area.distance(*x) > area.diagonal:
            continue
        if area.contains(*x) or area.segment_crosses_interior(x, target):
            cx, cy = area.center
            hits.append((math.hypot(cx - x[0], cy - x[1]), ob))
    if not hits:
        return None
    hits.sort(key=lambda h: h[0])
    return hits[0][1]


def _detour_corner(x: Vector, target: Vector, area: Rect) -> Optional[Vector]:
    if area.contains(*x):
        # From inside, aim for the two corners of the face looking at the target.
        cx, cy = area.center
        gx, gy = target[0] - cx, target[1] - cy
        if abs(gx) * area.height >= abs(gy) * area.width:
            xs = area.xmax if gx > 0 else area.xmin
            candidates = [(xs, area.ymin), (xs, area.ymax)]
        else:
            ys = area.ymax if gy > 0 else area.ymin
            candidates = [(area.xmin, ys), (area.xmax, ys)]
    else:
        candidates = [c for c in area.corners() if not area.segment_crosses_interior(x, c)]
    best = None
    for c in candidates:
        leg = math.hypot(c[0] - x[0], c[1] - x[1])
        if leg <= _EPS:
            continue
        cost = leg + math.hypot(target[0] - c[0], target[1] - c[1])
        key = (round(cost, 12), c[1])
        if best is None or key < best[0]:
            best = (key, c)
    return None if best is None else best[1]


def distance_to_exit(x: Vector, domain: DomainSpec) -> tuple[float, Optional[Vector]]:
    """Distance to the nearest exit point and the unit direction a pedestrian
    at ``x`` takes to reach it.

    Near an effective area that blocks the straight path, the direction aims at
    the corner of the area giving the shortest detour.  Outside the room the
    direction is the outward exit normal, so evacuees keep walking away.  In a
    domain without exits, returns ``(1.0, None)``.
    """
    domain.check_inside(*x)
    if not domain.exits:
        return 1.0, None
    d, p, seg = nearest_exit_point(x, domain)
    d_E = min(d, 1.0)
    if d <= _TOL or not domain.room_region.contains(*x, tol=0.0):
        return d_E, domain.exit_normal(seg)
    u_E = _unit(p[0] - x[0], p[1] - x[1])
    ob = _blocking_obstacle(x, p, domain)
    if ob is not None:
        c = _detour_corner(x, p, ob.effective_area)
        if c is not None:
            u_E = _unit(c[0] - x[0], c[1] - x[1])
    return d_E, u_E


def _oriented_tangent(seg: Segment, x: Vector, x_W: Vector,
                      guide: Optional[Vector], heading: Vector) -> Vector:
    tx, ty = seg.tangent
    for g in (guide, heading):
        if g is None:
            continue
        dot = tx * g[0] + ty * g[1]
        if abs(dot) > _TOL:
            return (tx, ty) if dot > 0 else (-tx, -ty)
    # Counterclockwise of the normal that points back at the pedestrian.
    nx, ny = (-ty, tx)
    if nx * (x[0] - x_W[0]) + ny * (x[1] - x_W[1]) < 0:
        nx, ny = -nx, -ny
    return (-ny, nx)


def wall_query(x: Vector, theta_h: float, domain: DomainSpec,
               u_E: Optional[Vector] = None) -> tuple[float, Optional[Vector], Optional[Vector]]:
    """Cast a ray from ``x`` along ``theta_h`` and return ``(d_W, u_W, x_W)``.

    Walls and the boundaries of effective areas both count as walls.  ``u_W``
    is the unit tangent at the hit point oriented towards the exit (along
    ``u_E``; along the heading when there is no exit).  A ray that leaves
    through an exit, or through an open edge, reports ``d_W = 1`` and
    ``u_W = u_E``.  ``u_E`` is computed when not supplied.
    """
    domain.check_inside(*x)
    if u_E is None and domain.exits:
        _, u_E = distance_to_exit(x, domain)
    dx, dy = math.cos(theta_h), math.sin(theta_h)
    best_t, best_seg, best_kind = math.inf, None, None
    for seg, kind in domain._boundary:
        t = seg.ray_hit(x[0], x[1], dx, dy)
        if t is None:
            continue
        # walls are listed first, so on an exact tie the wall wins
        if t < best_t - _TOL:
            best_t, best_seg, best_kind = t, seg, kind
    if best_seg is None:
        return 1.0, u_E, None
    x_W = (x[0] + best_t * dx, x[1] + best_t * dy)
    if best_kind == "exit":
        return 1.0, u_E, x_W
    u_W = _oriented_tangent(best_seg, x, x_W, u_E, (dx, dy))
    return min(best_t, 1.0), u_W, x_W


def geometric_query(x: Vector, theta_h: float, domain: DomainSpec) -> GeometricQuery:
    d_E, u_E = distance_to_exit(x, domain)
    d_W, u_W, x_W = wall_query(x, theta_h, domain, u_E=u_E)
    return GeometricQuery(d_E, u_E, d_W, u_W, x_W)


def quality_at(x: Vector, domain: DomainSpec, base_alpha: float) -> float:
    """Environment quality at ``x``: the obstacle's ``alpha_eff`` inside any
    (closed) effective area, ``base_alpha`` elsewhere.  First match wins."""
    domain.check_inside(*x)
    for ob in domain.obstacles:
        if ob.effective_area.contains(*x):
            return ob.alpha_eff
    return base_alpha


def quality_field(domain: DomainSpec, xc: np.ndarray, yc: np.ndarray,
                  base_alpha: float) -> np.ndarray:
    """Vectorised :func:`quality_at` over broadcastable coordinate arrays."""
    xc, yc = np.broadcast_arrays(xc, yc)
    alpha = np.full(xc.shape, float(base_alpha))
    assigned = np.zeros(xc.shape, dtype=bool)
    for ob in domain.obstacles:
        m = ob.effective_area.mask(xc, yc) & ~assigned
        alpha[m] = ob.alpha_eff
        assigned |= m
    return alpha


def segments_from_lists(rows: Sequence[Sequence[float]]) -> tuple[Segment, ...]:
    return tuple(Segment(*map(float, r)) for r in rows)
