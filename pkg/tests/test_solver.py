import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kincrowd import builtins
from kincrowd.errors import ConfigError, NumericStateError
from kincrowd.kinetics import DirectionSet, InteractionTables, ModelParams
from kincrowd.metrics import person_count
from kincrowd.solver import (
    BoundaryPolicy, Grid, Simulation, TimeStepping, advect_x, advect_y, auto_substeps,
    interaction_step, lax_friedrichs_sweep, run,
)

DIRS = DirectionSet(8)
PERIODIC = BoundaryPolicy("periodic", "periodic", "periodic", "periodic")


def test_grid_invariants():
    g = Grid.from_spacing(1.0, 0.5, 0.1, 0.05)
    assert g.nx * g.dx == pytest.approx(1.0, abs=1e-12)
    assert g.ny * g.dy == pytest.approx(0.5, abs=1e-12)
    assert 0 < g.x_centers.min() and g.x_centers.max() < 1.0
    with pytest.raises(ConfigError):
        Grid.from_spacing(1.0, 1.0, 0.3, 0.1)


def test_stepping_and_boundaries_validation():
    g = Grid.from_spacing(1.0, 1.0, 0.1, 0.1)
    with pytest.raises(ConfigError):
        TimeStepping(0.1, 2, 1.0)
    with pytest.raises(ConfigError, match="CFL"):
        TimeStepping(0.6, 3, 1.0).check_cfl(g)
    TimeStepping(0.3, 3, 1.0).check_cfl(g)
    assert auto_substeps(0.6, g) == 6 and auto_substeps(0.1, g) == 3
    with pytest.raises(ConfigError):
        BoundaryPolicy(left="periodic")
    with pytest.raises(ConfigError):
        BoundaryPolicy(top="open")


# -- Lax-Friedrichs transport ---------------------------------------------------------------

def test_lf_zero_speed_is_neighbour_averaging():
    rng = np.random.default_rng(0)
    phi = rng.uniform(0, 1, (1, 12))
    a = np.zeros_like(phi)
    open_ = np.ones(13)
    out, _ = lax_friedrichs_sweep(phi, a, 1.0, open_, "periodic", "periodic")
    np.testing.assert_allclose(out, 0.5 * (np.roll(phi, 1, -1) + np.roll(phi, -1, -1)),
                               atol=1e-15)
    lam = 0.4
    out, _ = lax_friedrichs_sweep(phi, a, lam, open_, "periodic", "periodic")
    # the averaging term carries h/(2 tau), so the step is independent of lam
    lap = np.roll(phi, 1, -1) - 2 * phi + np.roll(phi, -1, -1)
    np.testing.assert_allclose(out, phi + 0.5 * lap, atol=1e-15)


def _advect(f, thetas, rho, tau, grid, boundaries=PERIODIC, axis="x"):
    quality = np.ones((grid.nx, grid.ny))
    step = advect_x if axis == "x" else advect_y
    return step(f, rho, thetas, tau, grid, quality, boundaries=boundaries)


def test_uniform_state_is_unchanged():
    g = Grid.from_spacing(1.0, 1.0, 0.1, 0.1)
    f = np.full((8, g.nx, g.ny), 0.05)
    rho = f.sum(axis=0)
    for axis in ("x", "y"):
        np.testing.assert_allclose(_advect(f, DIRS.theta, rho, 0.05, g, axis=axis), f,
                                   atol=1e-15)
    # vertical direction, constant field, walls everywhere: nothing moves in x
    walls = BoundaryPolicy()
    np.testing.assert_allclose(
        _advect(f[2:3], DIRS.theta[2:3], rho, 0.05, g, walls, "x"), f[2:3], atol=1e-15)


def test_bump_moves_up_along_y():
    g = Grid.from_spacing(1.0, 2.0, 0.02, 0.02)
    y = g.y_centers
    bump = 0.2 * np.exp(-((y - 0.6) / 0.1) ** 2)
    f = np.broadcast_to(bump, (1, g.nx, g.ny)).copy()
    rho = np.zeros((g.nx, g.ny))                      # free flow, v = 1
    tau = 0.01
    steps = 20
    for _ in range(steps):
        f = _advect(f, [math.pi / 2], rho, tau, g, axis="y")
    com = (f[0, 0] * y).sum() / f[0, 0].sum()
    expected = 0.6 + steps * tau
    assert abs(com - expected) <= 0.2 * steps * tau
    assert f.sum() == pytest.approx(np.broadcast_to(bump, (g.nx, g.ny)).sum(), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.05, 1.0))
def test_transport_conserves_mass_periodic(seed, courant):
    g = Grid.from_spacing(1.0, 1.0, 0.1, 0.1)
    f = np.random.default_rng(seed).uniform(0, 0.12, (8, g.nx, g.ny))
    rho = f.sum(axis=0)
    out = _advect(_advect(f, DIRS.theta, rho, courant * g.dx, g), DIRS.theta, rho,
                  courant * g.dy, g, axis="y")
    assert out.sum() == pytest.approx(f.sum(), rel=1e-12)


# -- interactions ------------------------------------------------------------------------

def _tables(f, rng, dx=0.05):
    n, nx, ny = f.shape
    theta_G = rng.uniform(0, 2 * math.pi, (n, nx, ny))
    alpha = rng.uniform(0, 1, (nx, ny))
    return InteractionTables.geometric(theta_G, alpha, DIRS).with_pedestrian(
        f.sum(axis=0), alpha, 0.4, DIRS, dx, dx)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_interaction_preserves_cell_density(seed):
    rng = np.random.default_rng(seed)
    f = rng.uniform(0, 0.125, (8, 6, 5))
    out = interaction_step(f, 0.2, _tables(f, rng), substeps=3)
    np.testing.assert_allclose(out.sum(axis=0), f.sum(axis=0), atol=1e-12)
    assert out.min() >= 0.0


def test_interaction_vacuum_and_aligned_state():
    rng = np.random.default_rng(1)
    z = np.zeros((8, 4, 4))
    np.testing.assert_array_equal(interaction_step(z, 0.1, _tables(z, rng)), z)
    f = np.zeros((8, 4, 4))
    f[1] = 0.5
    theta_G = np.full((8, 4, 4), DIRS.theta[1])
    alpha = np.ones((4, 4))
    tables = InteractionTables.geometric(theta_G, alpha, DIRS).with_pedestrian(
        f.sum(axis=0), alpha, 0.4, DIRS, 0.1, 0.1)
    np.testing.assert_allclose(interaction_step(f, 0.1, tables), f, atol=1e-15)


def test_interaction_negativity_is_an_error():
    rng = np.random.default_rng(2)
    f = np.zeros((8, 3, 3))
    f[0] = 0.5
    tables = _tables(f, rng)
    tables.beta_G[:] = 1.0
    with pytest.raises(NumericStateError):
        interaction_step(f, 5.0, tables)


def test_non_finite_state_is_an_error():
    rng = np.random.default_rng(3)
    f = np.full((8, 3, 3), 0.05)
    tables = _tables(f, rng)
    f[2, 1, 1] = np.nan
    with pytest.raises(NumericStateError, match="non-finite"):
        interaction_step(f, 0.1, tables)


# -- stepping ----------------------------------------------------------------------------

def _sim(name="room-one-exit-46"):
    p = builtins.builtin(name).to_problem()
    return p, Simulation(p.domain, p.grid, p.stepping, p.params, p.boundaries)


def test_lie_step_identities():
    p, sim = _sim()
    f = p.initial
    np.testing.assert_array_equal(sim.lie_step(f, dt=0.0), f)
    z = np.zeros_like(f)
    np.testing.assert_array_equal(sim.lie_step(z), z)


def test_one_step_in_room_count_does_not_grow_and_mass_balances():
    p, sim = _sim()
    room = p.grid.region_mask(p.domain.room_region)
    f0 = p.initial
    m0 = sim.total_mass(f0)
    f1 = f0
    for _ in range(5):
        before = person_count(f1, room, p.refs, p.grid)
        f1 = sim.lie_step(f1)
        assert person_count(f1, room, p.refs, p.grid) <= before + 1e-9
    assert sim.total_mass(f1) + sim.outflow == pytest.approx(m0, rel=1e-10)


def test_simulation_rejects_cfl_violation():
    p, _ = _sim()
    bad = TimeStepping(p.stepping.dt, 3, p.stepping.t_end)
    with pytest.raises(ConfigError, match="CFL"):
        Simulation(p.domain, p.grid, bad, p.params, p.boundaries)


def test_run_with_zero_horizon():
    cfg = builtins.builtin("room-one-exit-46").with_overrides({"numerics.t_end": 0.0})
    trace = run(cfg)
    assert trace.times == [0.0]
    assert len(trace.snapshots) == 1
    assert trace.series["in_room"][0] == pytest.approx(46.0, abs=0.5)


def test_rate_scale_must_be_positive():
    assert ModelParams(rate_scale=2.0).rate_scale == 2.0
    with pytest.raises(ConfigError):
        ModelParams(rate_scale=0.0)
