"""Closure and interaction terms of the discrete-direction kinetic crowd model.

Direction indices are 0-based here (``theta_i = i * 2*pi / n``); the scenario
files use the 1-based labels ``theta_1 .. theta_n``.

Two evaluation paths exist for the collision operator: the per-cell
:func:`collision_operator`, which sums the transition tables term by term, and
:class:`InteractionTables` / :func:`collision_field`, the vectorised form used
by the solver.  The tests cross-check one against the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConfigError, NumericStateError

TWO_PI = 2.0 * math.pi
_TIE = 1e-12
RHO_TOL = 1e-6

VELOCITY_LAWS = ("cubic", "purple", "orange", "blue")
# exponents of the cosine slowdown laws
_COSINE_EXPONENTS = {"purple": 2.0 / 3.0, "orange": 0.5, "blue": 1.0 / 3.0}
_FREE_FLOW_LIMIT = 0.2


@dataclass(frozen=True)
class DirectionSet:
    n: int = 8
    theta: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError(f"need at least 3 directions, got {self.n}", "model.directions")
        object.__setattr__(self, "theta", np.arange(self.n) * (TWO_PI / self.n))

    @property
    def delta(self) -> float:
        return TWO_PI / self.n

    def minus(self, h: int) -> int:
        return (h - 1) % self.n

    def plus(self, h: int) -> int:
        return (h + 1) % self.n

    @property
    def cos(self) -> np.ndarray:
        # exact zeros keep axis-aligned directions from leaking into the other sweep
        return np.round(np.cos(self.theta), 15)

    @property
    def sin(self) -> np.ndarray:
        return np.round(np.sin(self.theta), 15)


@dataclass(frozen=True)
class VelocityLaw:
    tag: str = "cubic"

    def __post_init__(self):
        if self.tag not in VELOCITY_LAWS:
            raise ConfigError(f"unknown velocity law {self.tag!r}; choose from {VELOCITY_LAWS}",
                              "model.velocity_law")

    def critical_density(self, alpha: float) -> float:
        return alpha / 5.0 if self.tag == "cubic" else _FREE_FLOW_LIMIT

    def __call__(self, rho, alpha):
        return speed(rho, alpha, self)


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.0
    epsilon: float = 0.4
    velocity_law: VelocityLaw = VelocityLaw()
    directions: DirectionSet = DirectionSet()
    # interaction rates are per ``T / rate_scale``: 1 means per reference time
    rate_scale: float = 1.0

    def __post_init__(self):
        if not self.rate_scale > 0.0:
            raise ConfigError(f"{self.rate_scale} must be positive", "model.rate_time_unit_s")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"{self.alpha} outside [0, 1]", "model.alpha")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"{self.epsilon} outside [0, 1]", "model.epsilon")


def cubic_coefficients(alpha: float) -> tuple[float, float, float, float]:
    """``(a0, a1, a2, a3)`` of the slowdown polynomial for quality ``alpha``."""
    k = 1.0 / (alpha ** 3 - 15 * alpha ** 2 + 75 * alpha - 125)
    return (k * (75 * alpha ** 2 - 125 * alpha),
            k * (-150 * alpha ** 2),
            k * (75 * alpha ** 2 + 375 * alpha),
            k * (-250 * alpha))


def speed(rho, alpha_local, law: VelocityLaw = VelocityLaw()):
    """Dimensionless walking speed for density ``rho`` (scalar or array).

    ``alpha_local`` broadcasts against ``rho``.  The cosine laws ignore alpha.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if rho_arr.size and (rho_arr.min() < -RHO_TOL or rho_arr.max() > 1.0 + RHO_TOL):
        bad = rho_arr.min() if rho_arr.min() < -RHO_TOL else rho_arr.max()
        raise NumericStateError(f"density {bad!r} outside [0, 1]")
    r = np.clip(rho_arr, 0.0, 1.0)
    alpha = np.asarray(alpha_local, dtype=float)
    if law.tag == "cubic":
        a0, a1, a2, a3 = cubic_coefficients(alpha)
        poly = ((a3 * r + a2) * r + a1) * r + a0
        v = np.where(r <= alpha / 5.0, alpha, poly)
    else:
        p = _COSINE_EXPONENTS[law.tag]
        s = np.clip(r - _FREE_FLOW_LIMIT, 0.0, None) / (1.0 - _FREE_FLOW_LIMIT)
        v = np.where(r <= _FREE_FLOW_LIMIT, 1.0, 0.5 * (1.0 + np.cos(np.pi * s ** p)))
    v = np.clip(v, 0.0, 1.0)
    return float(v) if v.ndim == 0 else v


def angular_distance(theta_p, theta_q):
    d = np.abs(np.asarray(theta_p) - np.asarray(theta_q)) % TWO_PI
    d = np.minimum(d, TWO_PI - d)
    return float(d) if np.ndim(d) == 0 else d


def _angle(vx, vy):
    return np.mod(np.arctan2(vy, vx), TWO_PI)


def geometric_preferred_direction(q, theta_h: Optional[float] = None) -> float:
    """Angle of the distance-weighted blend of the exit and wall directions.

    ``q`` is a :class:`~kincrowd.geometry.GeometricQuery`.  A missing vector
    (no exit, no wall hit) carries zero weight.  When the blend degenerates the
    exit direction is used, or ``theta_h`` when the domain has no exit.
    """
    bx = by = 0.0
    if q.u_E is not None:
        bx += (1.0 - q.d_E) * q.u_E[0]
        by += (1.0 - q.d_E) * q.u_E[1]
    if q.u_W is not None:
        bx += (1.0 - q.d_W) * q.u_W[0]
        by += (1.0 - q.d_W) * q.u_W[1]
    if math.hypot(bx, by) > 1e-12:
        return float(_angle(bx, by))
    if q.u_E is not None:
        return float(_angle(*q.u_E))
    if theta_h is None:
        raise ValueError("degenerate blend with no exit direction and no heading")
    return float(theta_h % TWO_PI)


def turn_weights(theta_h, theta_target, strength, delta):
    """Switching probability and side for the three-neighbour game.

    Returns ``(beta, plus)``: ``beta = strength * min(d(theta_h, target)/delta, 1)``
    and ``plus`` is True when the counterclockwise neighbour is the closer one
    to the target (ties go counterclockwise).  Broadcasts over arrays.
    """
    d_minus = angular_distance(theta_target, np.asarray(theta_h) - delta)
    d_plus = angular_distance(theta_target, np.asarray(theta_h) + delta)
    plus = d_plus <= d_minus + _TIE
    beta = strength * np.minimum(angular_distance(theta_h, theta_target) / delta, 1.0)
    return beta, plus


def table_A_row(h: int, theta_G: float, alpha_local: float,
                dirs: DirectionSet = DirectionSet()) -> tuple[float, float, float]:
    """Wall/exit game row for candidate ``h``: weights on ``(h-1, h, h+1)``."""
    beta, plus = turn_weights(dirs.theta[h], theta_G, alpha_local, dirs.delta)
    beta = float(beta)
    return (0.0, 1.0 - beta, beta) if plus else (beta, 1.0 - beta, 0.0)


def table_B_entry(h: int, k: int, theta_P: float, rho_local: float, alpha_local: float,
                  dirs: DirectionSet = DirectionSet()) -> tuple[float, float, float]:
    """Pedestrian game row for candidate ``h`` meeting field ``k``.

    ``k`` only enters through ``theta_P``; it is kept for a self-describing call.
    """
    rho = min(max(rho_local, 0.0), 1.0)
    beta, plus = turn_weights(dirs.theta[h], theta_P, alpha_local, dirs.delta)
    w = float(beta) * rho
    return (0.0, 1.0 - w, w) if plus else (w, 1.0 - w, 0.0)


def full_row(h: int, weights: tuple[float, float, float], n: int) -> np.ndarray:
    """Expand ``(h-1, h, h+1)`` weights into a length-``n`` row."""
    row = np.zeros(n)
    row[(h - 1) % n] += weights[0]
    row[h] += weights[1]
    row[(h + 1) % n] += weights[2]
    return row


def interaction_preferred_direction(theta_C, theta_k, epsilon):
    """Angle of the normalised blend of following direction ``theta_k`` and
    congestion-avoiding direction ``theta_C``; ``theta_C`` on cancellation."""
    bx = epsilon * np.cos(theta_k) + (1.0 - epsilon) * np.cos(theta_C)
    by = epsilon * np.sin(theta_k) + (1.0 - epsilon) * np.sin(theta_C)
    out = np.where(np.hypot(bx, by) > 1e-12, _angle(bx, by), np.mod(theta_C, TWO_PI))
    return float(out) if out.ndim == 0 else out


def _sample_offsets(dirs: DirectionSet, dx: float, dy: float):
    lam = min(dx, dy)
    ox = np.round(lam * dirs.cos / dx, 12)
    oy = np.round(lam * dirs.sin / dy, 12)
    return lam, ox, oy


def directional_derivatives(rho: np.ndarray, dirs: DirectionSet, dx: float, dy: float,
                            periodic_x: bool = False, periodic_y: bool = False) -> np.ndarray:
    """Forward directional derivative of ``rho`` along every direction.

    Sample ``rho`` one step ``min(dx, dy)`` ahead of each cell centre with
    bilinear interpolation; outside the grid the edge value is repeated, or
    the grid wraps on periodic axes.  Returns shape ``(n, nx, ny)``.
    """
    nx, ny = rho.shape
    pad = 2
    padded = np.pad(rho, ((pad, pad), (0, 0)), mode="wrap" if periodic_x else "edge")
    padded = np.pad(padded, ((0, 0), (pad, pad)), mode="wrap" if periodic_y else "edge")
    lam, ox, oy = _sample_offsets(dirs, dx, dy)
    out = np.empty((dirs.n, nx, ny))
    for j in range(dirs.n):
        i0, j0 = int(math.floor(ox[j])), int(math.floor(oy[j]))
        fx, fy = ox[j] - i0, oy[j] - j0
        acc = np.zeros((nx, ny))
        for di, wx in ((0, 1.0 - fx), (1, fx)):
            for dj, wy in ((0, 1.0 - fy), (1, fy)):
                w = wx * wy
                if w == 0.0:
                    continue
                a = pad + i0 + di
                b = pad + j0 + dj
                acc += w * padded[a:a + nx, b:b + ny]
        out[j] = (acc - rho) / lam
    return out


def congestion_choice(derivs: np.ndarray) -> np.ndarray:
    """Index of the least-congested of ``h-1, h, h+1`` for every ``h`` and cell.

    Ties keep ``h``; between the two neighbours the counterclockwise one wins.
    """
    n = derivs.shape[0]
    choice = np.empty(derivs.shape, dtype=np.intp)
    for h in range(n):
        best = derivs[h].copy()
        idx = np.full(best.shape, h, dtype=np.intp)
        for j in ((h + 1) % n, (h - 1) % n):
            better = derivs[j] < best - _TIE
            best = np.where(better, derivs[j], best)
            idx = np.where(better, j, idx)
        choice[h] = idx
    return choice


def congestion_direction(h: int, rho_field: np.ndarray, cell: tuple[int, int],
                         dirs: DirectionSet = DirectionSet(), dx: float = 1.0,
                         dy: float = 1.0, periodic_x: bool = False,
                         periodic_y: bool = False) -> float:
    """Angle of the least-congested admissible direction for candidate ``h``."""
    derivs = directional_derivatives(rho_field, dirs, dx, dy, periodic_x, periodic_y)
    p, q = cell
    return float(dirs.theta[congestion_choice(derivs[:, p:p + 1, q:q + 1])[h, 0, 0]])


def collision_operator(f: np.ndarray, theta_G: np.ndarray, theta_C: np.ndarray,
                       alpha_local: float, epsilon: float,
                       dirs: DirectionSet = DirectionSet()) -> np.ndarray:
    """Net interaction gain/loss for every direction at one cell.

    ``theta_G[h]`` and ``theta_C[h]`` are the geometric and congestion
    preferred directions of candidate ``h``.  Evaluated by explicit summation
    over the transition tables.
    """
    n = dirs.n
    f = np.asarray(f, dtype=float)
    rho = float(f.sum())
    rho_c = min(max(rho, 0.0), 1.0)
    mu, eta = 1.0 - rho_c, rho_c
    A = np.array([full_row(h, table_A_row(h, theta_G[h], alpha_local, dirs), n)
                  for h in range(n)])
    gain_G = A.T @ f
    gain_P = np.zeros(n)
    for h in range(n):
        for k in range(n):
            theta_P = interaction_preferred_direction(theta_C[h], dirs.theta[k], epsilon)
            row = full_row(h, table_B_entry(h, k, theta_P, rho_c, alpha_local, dirs), n)
            gain_P += row * f[h] * f[k]
    return mu * (gain_G - f) + eta * (gain_P - f * rho)


@dataclass
class InteractionTables:
    """Pre-assembled game tables for every cell of a grid.

    ``beta_G``/``plus_G`` (shape ``(n, nx, ny)``) encode the wall/exit game.
    ``b``/``plus_B`` (shape ``(n, n, nx, ny)``) hold the density-free pedestrian
    switching strength and side for each candidate/field pair; the full
    transition weight is ``b * rho``.
    """

    beta_G: np.ndarray
    plus_G: np.ndarray
    b: Optional[np.ndarray] = None
    plus_B: Optional[np.ndarray] = None

    @classmethod
    def geometric(cls, theta_G: np.ndarray, alpha: np.ndarray, dirs: DirectionSet):
        th = dirs.theta[:, None, None]
        beta, plus = turn_weights(th, theta_G, alpha[None], dirs.delta)
        return cls(beta_G=np.asarray(beta, dtype=float), plus_G=np.asarray(plus))

    def with_pedestrian(self, rho: np.ndarray, alpha: np.ndarray, epsilon: float,
                        dirs: DirectionSet, dx: float, dy: float,
                        periodic_x: bool = False, periodic_y: bool = False):
        n = dirs.n
        derivs = directional_derivatives(rho, dirs, dx, dy, periodic_x, periodic_y)
        # 0, 1, 2 <-> congestion choice h-1, h, h+1
        rel = (congestion_choice(derivs) - np.arange(n)[:, None, None] + 1) % n
        unit, side = _pedestrian_game(n, float(epsilon))
        b = np.empty((n, n) + rho.shape)
        plus = np.empty((n, n) + rho.shape, dtype=bool)
        for h in range(n):
            for k in range(n):
                b[h, k] = alpha * unit[h, k][rel[h]]
                plus[h, k] = side[h, k][rel[h]]
        return InteractionTables(self.beta_G, self.plus_G, b, plus)


@lru_cache(maxsize=None)
def _pedestrian_game(n: int, epsilon: float):
    """Unit-strength switching and side for every (h, k, congestion choice)."""
    dirs = DirectionSet(n)
    unit = np.empty((n, n, 3))
    side = np.empty((n, n, 3), dtype=bool)
    for h in range(n):
        for k in range(n):
            for c in range(3):
                theta_C = dirs.theta[(h + c - 1) % n]
                theta_P = interaction_preferred_direction(theta_C, dirs.theta[k], epsilon)
                unit[h, k, c], side[h, k, c] = turn_weights(dirs.theta[h], theta_P, 1.0,
                                                            dirs.delta)
    return unit, side


def collision_field(f: np.ndarray, tables: InteractionTables) -> np.ndarray:
    """Vectorised collision operator over a whole grid; ``f`` is ``(n, nx, ny)``."""
    n = f.shape[0]
    rho = f.sum(axis=0)
    rho_c = np.clip(rho, 0.0, 1.0)
    mu, eta = 1.0 - rho_c, rho_c
    out = np.zeros_like(f)

    moved = tables.beta_G * f
    out -= mu * moved
    for h in range(n):
        up = np.where(tables.plus_G[h], moved[h], 0.0)
        out[(h + 1) % n] += mu * up
        out[(h - 1) % n] += mu * (moved[h] - up)

    if tables.b is not None:
        scale = eta * rho_c
        for h in range(n):
            w_plus = np.zeros_like(rho)
            w_minus = np.zeros_like(rho)
            for k in range(n):
                bf = tables.b[h, k] * f[k]
                pk = tables.plus_B[h, k]
                w_plus += np.where(pk, bf, 0.0)
                w_minus += np.where(pk, 0.0, bf)
            out[h] -= scale * f[h] * (w_plus + w_minus)
            out[(h + 1) % n] += scale * f[h] * w_plus
            out[(h - 1) % n] += scale * f[h] * w_minus
    return out
