"""Acceptance criteria 1-10; each test prints one PASS/FAIL line through ``record``."""

import csv
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from axiboussinesq import special_kernels as sk
from axiboussinesq.biot_savart import kernel_bound_probe, velocity_from_vorticity
from axiboussinesq.coupled_diagnostics import compute_gamma, max_principle_check, monotonicity_check
from axiboussinesq.grid_fields import (
    Measure, ScalarField, axisym_mass, d_dr, d_dz, gaussian, lp_norm, make_grid, weighted_lp_norm,
)
from axiboussinesq.mild_solver import SolverConfig, State, picard_solve
from axiboussinesq.semigroup import apply_S2_axi
from axiboussinesq.verify import HEAT3D_CONSTANT, decay_report, default_ensemble, operator_norm_probe

from conftest import record


def test_criterion_01_special_function_asymptotics():
    t0 = time.perf_counter()
    cases = [("F@1e-6", sk.eval_F(1e-6), sk.leading_F(1e-6, "small")),
             ("F@1e4", sk.eval_F(1e4), sk.leading_F(1e4, "large"))]
    for which, ev in ((1, sk.eval_N1), (2, sk.eval_N2)):
        for t, regime in ((1e-6, "small"), (1e6, "large")):
            cases.append((f"N{which}@{t:g}", ev(t), sk.leading_N(which, t, regime)))
    gaps = {name: abs(a - b) / abs(a) for name, a, b in cases}
    elapsed = time.perf_counter() - t0
    worst = max(gaps, key=gaps.get)
    ok = max(gaps.values()) <= 1e-3 and elapsed < 5
    record(1, ok, f"worst gap {gaps[worst]:.2e} ({worst}), {elapsed:.2f} s")
    assert ok


def test_criterion_02_kernel_bound():
    t0 = time.perf_counter()
    a = kernel_bound_probe(n=10_000, seed=0)
    b = kernel_bound_probe(n=10_000, seed=1)
    elapsed = time.perf_counter() - t0
    rel = abs(a["max"] / b["max"] - 1)
    ok = math.isfinite(a["max"]) and rel <= 0.05 and elapsed < 10
    record(2, ok, f"max {a['max']:.6f}, reseeded {b['max']:.6f} ({rel:.2%}), {elapsed:.2f} s")
    assert ok


def _curl_error(n):
    g = make_grid(8.0, 8.0, n, 2 * n)
    om = gaussian(g)
    v = velocity_from_vorticity(om)
    curl = d_dz(v.vr, g) - d_dr(v.vz, g)
    return lp_norm(ScalarField(g, curl - om.values), 2) / lp_norm(om, 2)


def test_criterion_03_biot_savart_curl():
    t0 = time.perf_counter()
    e1, e2 = _curl_error(128), _curl_error(256)
    elapsed = time.perf_counter() - t0
    ok = e1 <= 0.05 and e1 / e2 >= 3 and elapsed < 300
    record(3, ok, f"rel L2 {e1:.4f} at 128x256, {e2:.4f} at 256x512 (x{e1 / e2:.2f}), {elapsed:.1f} s")
    assert ok


def test_criterion_04_heat_exactness():
    g = make_grid(12.0, 12.0, 128, 256)
    R, Z = g.mesh()
    f = ScalarField(g, np.exp(-(R**2 + Z**2) / 4), Measure.AXISYM)
    u = apply_S2_axi(1.0, f)
    exact = 2**-1.5 * np.exp(-(R**2 + Z**2) / 8)
    err = float(np.max(np.abs(u.values - exact)) / exact.max())
    mass = abs(axisym_mass(u) / axisym_mass(f) - 1)
    ok = err <= 1e-4 and mass <= 1e-10
    record(4, ok, f"L-inf rel {err:.2e}, mass drift {mass:.1e}")
    assert ok


def test_criterion_05_semigroup_rates():
    g = make_grid(24.0, 24.0, 128, 256)
    times = np.geomspace(0.1, 10.0, 9)
    s1 = operator_norm_probe("S1", default_ensemble(g, Measure.PLANAR), 1.0, math.inf, 1.0, times)
    s2 = operator_norm_probe("S2", default_ensemble(g, Measure.AXISYM), 1.0, math.inf, 1.5, times)
    rel = abs(s2.constant / HEAT3D_CONSTANT - 1)
    ok = s1.spread() < 0.25 and s2.spread() < 0.25 and rel <= 0.10
    record(5, ok, f"spread S1 {s1.spread():.1%}, S2 {s2.spread():.1%}; heat constant {s2.constant:.5f} "
                  f"vs {HEAT3D_CONSTANT:.5f}")
    assert ok


def test_criterion_06_picard_contraction():
    g = make_grid(8.0, 8.0, 64, 128)
    om = gaussian(g, -1.0, 4.0, 2.0, 0.0, Measure.PLANAR)
    rh = gaussian(g, 1.0, 4.0, 0.0, 0.0, Measure.AXISYM)
    scale = 1e-2 / (lp_norm(om, 1) + lp_norm(rh, 1, full_volume=True))
    data = State.from_arrays(0.0, g, scale * om.values, scale * rh.values)
    t0 = time.perf_counter()
    _, wl = picard_solve(data, SolverConfig(g, T=0.1, picard_tol=1e-8, picard_max=20))
    elapsed = time.perf_counter() - t0
    ok = wl.converged and wl.iterations <= 20 and max(wl.ratios) < 0.5 and wl.changes[-1] < 1e-8 and elapsed < 600
    record(6, ok, f"{wl.iterations} iterations, max ratio {max(wl.ratios):.2e}, "
                  f"final change {wl.changes[-1]:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_07_maximum_principle(decay_run):
    traj, _ = decay_run
    rep = max_principle_check(traj, rel_eps=1e-8)
    ok = rep.applicable and rep.passed
    record(7, ok, f"sign {rep.sign:+d}, worst {rep.worst:.2e} at t={rep.worst_time:.3g} (limit {-rep.eps:.1e})")
    assert ok


def test_criterion_08_gamma_monotonicity(decay_run):
    traj, _ = decay_run
    parts, ok = [], True
    for p in (1.0, 2.0, math.inf):
        rep = monotonicity_check(traj, p, rel_tol=1e-8)
        every_decade = all(n >= 1 for n in rep.strict_per_decade.values())
        ok &= rep.passed and every_decade
        parts.append(f"p={p:g}: {'monotone' if rep.passed else 'NOT monotone'}, strict/decade "
                     + ",".join(f"1e{k}:{n}" for k, n in sorted(rep.strict_per_decade.items())))
    record(8, ok, "; ".join(parts))
    assert ok


def test_criterion_09_decay_rates(decay_run):
    traj, _ = decay_run
    t0 = time.perf_counter()
    states = [s for s in traj.states if s.t > 0]
    rho_inf = [(s.t, lp_norm(s.rho, math.inf)) for s in states]
    om_l2 = [(s.t, lp_norm(s.omega, 2)) for s in states]
    rrho_inf = [(s.t, weighted_lp_norm(s.rho, 1.0, math.inf)) for s in states]
    reps = [decay_report("rho", math.inf, rho_inf, -1.5, 0.15, (0.5, 5.0)),
            decay_report("omega", 2.0, om_l2, -0.5, 0.15, (0.5, 5.0)),
            decay_report("r rho", math.inf, rrho_inf, -1.0, 0.2, (0.5, 5.0))]
    ok = all(r.passed for r in reps)
    record(9, ok, ", ".join(f"{r.quantity} {r.fitted_slope:.3f} (want {r.predicted_slope}+-{r.tolerance})"
                            for r in reps))
    assert ok
    assert time.perf_counter() - t0 < 1800


def _csvs(d):
    return {p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))}


def test_criterion_10_cli_determinism(tmp_path):
    runs = []
    for name in ("a", "b"):
        t0 = time.perf_counter()
        res = subprocess.run([sys.executable, "-m", "axiboussinesq", "smoke", "--output", name],
                             cwd=tmp_path, capture_output=True, text=True, timeout=600)
        runs.append((res.returncode, time.perf_counter() - t0))
    a, b = _csvs(tmp_path / "a"), _csvs(tmp_path / "b")
    same = bool(a) and a == b
    ok = all(code == 0 and dt < 30 for code, dt in runs) and same
    record(10, ok, f"exit codes {[c for c, _ in runs]}, {max(dt for _, dt in runs):.1f} s, "
                   f"{len(a)} CSVs {'identical' if same else 'DIFFER'}")
    assert ok
