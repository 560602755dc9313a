import math

import numpy as np
import pytest

from axiboussinesq import semigroup as sg
from axiboussinesq.errors import ConfigError, DivergedError, DomainError, SchedulingError
from axiboussinesq.grid_fields import Measure, ScalarField, axisym_mass, gaussian, lp_norm, make_grid
from axiboussinesq.mild_solver import (
    SolverConfig, State, duhamel_rhs, evolve, initial_state, picard_solve, transport_gamma,
)


def _rel(a, b, p=4 / 3):
    g = a.grid
    return lp_norm(ScalarField(g, a.values - b.values), p) / lp_norm(b, p)


@pytest.fixture(scope="module")
def moderate(small_grid):
    """Vortex ring with density on the axis, two windows."""
    data = initial_state(small_grid, -1.0, 4.0, 2.0, 0.0, 1.0, 4.0, 0.0, 0.0)
    cfg = SolverConfig(small_grid, T=0.2)
    return evolve(data, 0.4, cfg), cfg


def test_state_requires_compatible_rho_tilde(small_grid):
    om = gaussian(small_grid)
    rho = gaussian(small_grid, measure=Measure.AXISYM)
    with pytest.raises(DomainError):
        State(0.0, om, rho.with_values(rho.values, Measure.PLANAR), rho)
    State(0.0, om, om, rho, strict=False)
    with pytest.raises(DomainError):
        State.from_arrays(-1.0, small_grid, om.values, rho.values)


@pytest.mark.parametrize("kwargs,key", [
    (dict(T=0.0), "solver.T"),
    (dict(n_time=4), "solver.n_time"),
    (dict(n_quad=1), "solver.n_quad"),
    (dict(picard_tol=0.5), "solver.picard_tol"),
    (dict(picard_max=0), "solver.picard_max"),
    (dict(restart_count=0), "solver.restart_count"),
])
def test_config_validation(small_grid, kwargs, key):
    with pytest.raises(ConfigError) as err:
        SolverConfig(small_grid, **kwargs)
    assert err.value.key == key


def test_zero_data_stays_zero(small_grid):
    z = np.zeros(small_grid.shape)
    states, wl = picard_solve(State.from_arrays(0.0, small_grid, z, z), SolverConfig(small_grid, T=0.1))
    assert wl.converged and all(np.all(s.omega.values == 0) and np.all(s.rho.values == 0) for s in states)


def test_zero_density_stays_zero(small_grid):
    data = initial_state(small_grid, -2.0, 4.0, 2.0, 0.0, 0.0)
    states, _ = picard_solve(data, SolverConfig(small_grid, T=0.1))
    assert all(np.all(s.rho.values == 0) for s in states)


def test_frozen_velocity_reduces_to_linear_flows(small_grid):
    data = initial_state(small_grid, 1.0, 4.0, 2.0, 0.0, 0.0)
    states, _ = picard_solve(data, SolverConfig(small_grid, T=0.1, frozen_velocity=True))
    np.testing.assert_allclose(states[-1].omega.values, sg.apply_S1(0.1, data.omega).values, atol=1e-13)
    data = initial_state(small_grid, 1.0, 4.0, 2.0, 0.0, 1.0, 4.0, 1.0, 0.5)
    states, _ = picard_solve(data, SolverConfig(small_grid, T=0.1, frozen_velocity=True))
    np.testing.assert_allclose(states[-1].rho.values, sg.apply_S2_axi(0.1, data.rho).values, atol=1e-13)


def test_tiny_data_follows_the_linear_flow(small_grid):
    data = initial_state(small_grid, 1e-6, 4.0, 2.0, 0.0, 0.0)
    states, _ = picard_solve(data, SolverConfig(small_grid, T=0.2))
    for s in states:
        assert _rel(s.omega, sg.apply_S1(s.t, data.omega)) < 1e-6


def test_fixed_point_satisfies_all_three_integral_equations(moderate):
    traj, cfg = moderate
    data = traj.states[0]
    t = traj.states[8].t
    rhs = duhamel_rhs(traj.states[:9], t, data, cfg)
    st = traj.states[8]
    assert _rel(rhs.rho, st.rho) < 1e-6
    assert _rel(rhs.omega, st.omega) < 1e-2
    # the rho_tilde line carries the largest spatial error of the d_r rho source
    assert _rel(rhs.rho_tilde, st.rho_tilde) < 1e-2


def test_duhamel_rhs_scheduling(moderate):
    traj, cfg = moderate
    with pytest.raises(SchedulingError):
        duhamel_rhs(traj.states[:3], traj.states[8].t, traj.states[0], cfg)
    with pytest.raises(SchedulingError):
        duhamel_rhs(traj.states, 0.0, traj.states[0], cfg)


def test_mass_is_conserved(moderate):
    traj, _ = moderate
    m0 = axisym_mass(traj.states[0].rho)
    assert all(abs(axisym_mass(s.rho) - m0) <= 1e-12 * abs(m0) for s in traj.states)


def test_time_continuity_across_windows(moderate):
    traj, _ = moderate
    om = np.stack([s.omega.values for s in traj.states])
    jumps = np.max(np.abs(np.diff(om, axis=0)), axis=(1, 2))
    k = 8  # first node of the second window
    assert jumps[k] < 2 * max(jumps[k - 1], jumps[k + 1])


def test_odd_vorticity_stays_odd(small_grid):
    # without density, omega -> -omega(r, -z) maps solutions to solutions
    om0 = (gaussian(small_grid, 1.0, 4.0, 2.0, 1.0) - gaussian(small_grid, 1.0, 4.0, 2.0, -1.0)).values
    data = State.from_arrays(0.0, small_grid, om0 * 3.0, np.zeros(small_grid.shape))
    states, _ = picard_solve(data, SolverConfig(small_grid, T=0.1))
    om = states[-1].omega.values
    np.testing.assert_allclose(om, -om[:, ::-1], atol=1e-10 * np.abs(om).max())


def test_large_data_diverges_with_ratios_above_one():
    g = make_grid(8, 8, 32, 64)
    data = initial_state(g, -100.0, 4.0, 2.0, 0.0, 100.0, 4.0, 0.0, 0.0)
    with pytest.raises(DivergedError) as err:
        picard_solve(data, SolverConfig(g, T=0.5))
    assert err.value.ratios and max(err.value.ratios) >= 1.0


def test_evolve_halves_the_window_after_divergence():
    g = make_grid(8, 8, 32, 64)
    data = initial_state(g, -100.0, 4.0, 2.0, 0.0, 100.0, 4.0, 0.0, 0.0)
    traj = evolve(data, 0.1, SolverConfig(g, T=0.5), window=0.1)
    failed = [w for w in traj.windows if not w.converged]
    assert failed and traj.windows[0].length == pytest.approx(0.1)
    assert traj.windows[1].length == pytest.approx(0.05)
    assert traj.states[-1].t == pytest.approx(0.1) and traj.aborted is None


def test_grid_mismatch_is_rejected(small_grid):
    data = initial_state(small_grid)
    with pytest.raises(ConfigError):
        picard_solve(data, SolverConfig(make_grid(8, 8, 16, 32)))
    with pytest.raises(DomainError):
        evolve(data, 0.0, SolverConfig(small_grid))


def test_transport_reproduces_the_solution(moderate):
    traj, cfg = moderate
    out = transport_gamma(traj, traj.states[0].gamma_tilde(), cfg)
    assert len(out) == len(traj.states)
    g_end = traj.states[-1].gamma_tilde()
    assert np.max(np.abs(out[-1] - g_end)) < 1e-3 * np.max(np.abs(g_end))


def test_picard_ratio_is_small_for_small_data(small_grid):
    data = initial_state(small_grid, -0.1, 4.0, 2.0, 0.0, 0.1, 4.0, 0.0, 0.0)
    _, wl = picard_solve(data, SolverConfig(small_grid, T=0.2))
    assert wl.converged and max(wl.ratios) < 0.1
