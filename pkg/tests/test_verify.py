import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from axiboussinesq import semigroup as sg
from axiboussinesq.errors import DomainError
from axiboussinesq.grid_fields import Measure, ScalarField, d_dr, d_dz, gaussian, lp_norm, make_grid
from axiboussinesq.biot_savart import velocity_from_vorticity
from axiboussinesq.verify import (
    HEAT3D_CONSTANT, decay_report, default_ensemble, fit_decay, grid_convergence, operator_norm_probe,
)


def test_fit_recovers_a_power_law():
    ts = np.geomspace(0.5, 5.0, 12)
    slope, c = fit_decay([(t, 3.0 * t**-1.5) for t in ts])
    assert slope == pytest.approx(-1.5, abs=1e-12) and c == pytest.approx(3.0, rel=1e-12)


def test_fit_window_and_sample_count():
    ts = np.geomspace(0.1, 10.0, 20)
    samples = [(t, t**-1.0 if t < 1 else t**-2.0) for t in ts]
    assert fit_decay(samples, (1.0, 10.0))[0] == pytest.approx(-2.0, abs=1e-12)
    with pytest.raises(DomainError):
        fit_decay([(1, 1), (2, 0.5), (3, 0.3)])
    with pytest.raises(DomainError):
        fit_decay([(t, -1.0) for t in ts])
    with pytest.raises(DomainError):
        fit_decay([(0.0, 1.0)] + [(t, 1.0) for t in ts])


def test_fit_is_stable_under_small_perturbations():
    rng = np.random.default_rng(1)
    ts = np.geomspace(0.5, 5.0, 12)
    noisy = [(t, t**-1.5 * (1 + 1e-3 * rng.standard_normal())) for t in ts]
    assert fit_decay(noisy)[0] == pytest.approx(-1.5, abs=1e-2)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(1e-6, 1e6), slope=st.floats(-4, 0))
def test_fit_slope_ignores_amplitude(c, slope):
    ts = np.geomspace(1.0, 10.0, 8)
    assert fit_decay([(t, c * t**slope) for t in ts], (1.0, 10.0))[0] == pytest.approx(slope, abs=1e-9)


def test_decay_report_pass_flag():
    ts = np.geomspace(0.5, 5.0, 12)
    rep = decay_report("x", 2.0, [(t, t**-1.45) for t in ts], -1.5, 0.1)
    assert rep.passed and rep.fitted_slope == pytest.approx(-1.45)
    assert not decay_report("x", 2.0, [(t, t**-1.2) for t in ts], -1.5, 0.1).passed


def test_probe_is_homogeneous():
    g = make_grid(12, 12, 32, 64)
    ens = default_ensemble(g)
    a = operator_norm_probe("S1", ens, 4 / 3, 2.0, 0.125, times=(0.5, 1.0))
    b = operator_norm_probe("S1", [f * 5.0 for f in ens], 4 / 3, 2.0, 0.125, times=(0.5, 1.0))
    assert a.constant == pytest.approx(b.constant, rel=1e-12)
    assert a.per_member.shape == (2, 12) and len(a.rows) == 2


def test_heat_flow_is_a_contraction_in_L1():
    g = make_grid(12, 12, 48, 96)
    ens = [f for f in default_ensemble(g, Measure.AXISYM)]
    res = operator_norm_probe("S2", ens, 1.0, 1.0, 0.0, times=(0.1, 1.0))
    assert res.constant <= 1.0 + 1e-9
    # nonnegative members keep their mass
    pos = [f for f in ens if f.values.min() >= 0]
    assert operator_norm_probe("S2", pos, 1.0, 1.0, 0.0, times=(1.0,)).constant == pytest.approx(1.0, rel=1e-9)


def test_heat_flow_L1_to_Linf_rate():
    g = make_grid(24, 24, 64, 128)
    ens = default_ensemble(g, Measure.AXISYM)
    res = operator_norm_probe("S2", ens, 1.0, math.inf, 1.5, times=(1.0, 2.0, 4.0))
    assert res.constant <= HEAT3D_CONSTANT * 1.01
    assert res.constant >= 0.9 * HEAT3D_CONSTANT
    assert res.spread() < 0.1


def test_probe_argument_errors():
    g = make_grid(4, 4, 8, 16)
    with pytest.raises(DomainError):
        operator_norm_probe("S3", default_ensemble(g), 1, 1)
    with pytest.raises(DomainError):
        operator_norm_probe("S1", [], 1, 1)
    with pytest.raises(DomainError):
        operator_norm_probe("S1", [ScalarField(g, np.zeros(g.shape))], 1, 1)


def test_custom_operator_and_seed():
    g = make_grid(4, 4, 8, 16)
    ident = lambda t, f: f  # noqa: E731
    res = operator_norm_probe(ident, default_ensemble(g, seed=3), 2, 2, seed=3)
    assert res.constant == pytest.approx(1.0) and res.seed == 3
    a = default_ensemble(g, seed=3)[-1].values
    b = default_ensemble(g, seed=4)[-1].values
    assert not np.array_equal(a, b) and np.array_equal(a, default_ensemble(g, seed=3)[-1].values)


def test_grid_convergence_of_a_second_order_quantity():
    # not harmonic and not vanishing at the box edge, so the midpoint error is O(h^2)
    def study(g):
        R, Z = g.mesh()
        return lp_norm(ScalarField(g, 2.0 + np.exp(R / 8) * np.cos(Z / 4)), 1)

    res = grid_convergence(study, [make_grid(8, 8, n, 2 * n) for n in (8, 16, 32)])
    assert res.order == pytest.approx(2.0, abs=0.3)


def test_grid_convergence_error_mode_and_sentinel():
    grids = [make_grid(8, 8, n, 2 * n) for n in (8, 16, 32)]
    errs = {8: 1e-2, 16: 2.5e-3, 32: 6.25e-4}
    assert grid_convergence(lambda g: errs[g.n_r], grids, errors=True).order == pytest.approx(2.0)
    assert grid_convergence(lambda g: 1.0, grids).orders == [math.inf]


def test_grid_convergence_preconditions():
    with pytest.raises(DomainError):
        grid_convergence(lambda g: 0.0, [make_grid(8, 8, 8, 16), make_grid(8, 8, 16, 32)])
    with pytest.raises(DomainError):
        grid_convergence(lambda g: 0.0, [make_grid(8, 8, n, 2 * n) for n in (8, 12, 24)])


def test_biot_savart_curl_converges():
    def err(g):
        om = gaussian(g)
        v = velocity_from_vorticity(om)
        return lp_norm(ScalarField(g, d_dz(v.vr, g) - d_dr(v.vz, g) - om.values), 2)

    res = grid_convergence(err, [make_grid(8, 8, n, 2 * n) for n in (16, 32, 64)], errors=True)
    assert res.order >= 1.5
