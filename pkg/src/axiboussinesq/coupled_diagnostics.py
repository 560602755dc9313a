"""The coupled function ``Gamma = omega / r - rho / 2`` and its diagnostics.

``Gamma`` obeys a source-free drift-diffusion equation, so along a solution it
keeps its sign, its L^p norms do not grow, and it decays like a
three-dimensional heat flow. The checks below measure these properties on
stored trajectories. Every L^p norm named "R^3" here includes the ``2 pi``
angular factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .grid_fields import Measure, ScalarField, lp_norm

__all__ = [
    "GammaSnapshot",
    "compute_gamma",
    "axis_trace",
    "MaxPrincipleReport",
    "max_principle_check",
    "MonotonicityReport",
    "monotonicity_check",
    "NashReport",
    "nash_constant",
    "nash_decay_check",
    "BoundsReport",
    "theorem_bounds_check",
    "rho_bounds_check",
    "SplitReport",
    "split_evolution_check",
]

LP_TABLE = (1.0, 2.0, 4.0, math.inf)


_ROUNDOFF = 1e-13


def _states(trajectory):
    return list(getattr(trajectory, "states", trajectory))


@dataclass(frozen=True, eq=False)
class GammaSnapshot:
    t: float
    gamma: ScalarField
    gamma_tilde: ScalarField
    lp_table: dict
    min_value: float
    max_value: float


def compute_gamma(state) -> GammaSnapshot:
    """``Gamma`` and ``Gamma~ = r Gamma`` of a state, with its R^3 norms."""
    grid = state.omega.grid
    r = grid.r[:, None]
    gv = state.omega.values / r - 0.5 * state.rho.values
    gamma = ScalarField(grid, gv, Measure.AXISYM)
    gt = ScalarField(grid, r * gv, Measure.PLANAR)
    table = {p: lp_norm(gamma, p, full_volume=True) for p in LP_TABLE}
    return GammaSnapshot(state.t, gamma, gt, table, float(gv.min()), float(gv.max()))


def axis_trace(values: np.ndarray, grid, power: float = 1.0) -> float:
    """``int |f(0, z)|^power dz`` with ``f(0, z)`` linearly extrapolated from the two innermost cells."""
    f0 = 1.5 * values[0] - 0.5 * values[1]
    return float(np.sum(np.abs(f0) ** power) * grid.dz)


# ---------------------------------------------------------------------------


@dataclass
class MaxPrincipleReport:
    applicable: bool
    sign: int
    eps: float
    worst: float
    worst_time: float
    passed: bool
    note: str = ""


def max_principle_check(trajectory, rel_eps: float = 1e-8) -> MaxPrincipleReport:
    """Sign preservation of ``Gamma`` along a trajectory.

    ``worst`` is ``min_t min_x sign(Gamma_0) Gamma(t)`` in absolute units; the
    check passes when it is at least ``-rel_eps * max|Gamma_0|``. For
    ``Gamma_0 = 0`` the check asks ``|Gamma(t)| <= eps`` with ``eps`` an
    absolute ``rel_eps`` scaled by the largest ``|omega_0/r|``.
    """
    states = _states(trajectory)
    snaps = [compute_gamma(s) for s in states]
    g0 = snaps[0]
    gmax = max(abs(g0.min_value), abs(g0.max_value))
    data_scale = max(float(np.max(np.abs(states[0].omega.values / states[0].omega.grid.r[:, None]))),
                     0.5 * float(np.max(np.abs(states[0].rho.values))))
    # values within roundoff of the data scale count as zero
    noise = _ROUNDOFF * max(data_scale, gmax)
    if gmax <= noise:
        gmax = 0.0
    elif g0.min_value < -noise and g0.max_value > noise:
        return MaxPrincipleReport(False, 0, math.nan, math.nan, math.nan, False,
                                  "Gamma_0 changes sign; use split_evolution_check")
    if gmax == 0:
        scale = max(data_scale, 1.0)
        eps = rel_eps * scale
        amps = [max(abs(s.min_value), abs(s.max_value)) for s in snaps]
        k = int(np.argmax(amps))
        return MaxPrincipleReport(True, 0, eps, -amps[k], snaps[k].t, amps[k] <= eps, "Gamma_0 vanishes")
    sign = 1 if g0.max_value > noise else -1
    eps = rel_eps * gmax
    vals = [s.min_value if sign > 0 else -s.max_value for s in snaps]
    k = int(np.argmin(vals))
    return MaxPrincipleReport(True, sign, eps, vals[k], snaps[k].t, vals[k] >= -eps)


@dataclass
class MonotonicityReport:
    p: float
    times: np.ndarray
    norms: np.ndarray
    decrements: np.ndarray
    strict_per_decade: dict
    axis_flux: np.ndarray
    passed: bool


def monotonicity_check(trajectory, p: float, rel_tol: float = 1e-8) -> MonotonicityReport:
    """``t -> ||Gamma(t)||_{L^p(R^3)}`` nonincreasing, with decrements per decade.

    Discrete sampling cannot certify strict decrease, so the pass flag asks
    for ``n_{k+1} <= n_k (1 + rel_tol)`` up to a roundoff floor set by the
    size of the two terms that make up ``Gamma_0``; strict decrements are counted per
    decade of the later time. ``axis_flux`` is ``int Gamma(t,0,z)^p dz`` for
    finite ``p``, the boundary loss term of the L^p balance.
    """
    if not (p >= 1):
        raise DomainError(f"p must lie in [1, inf], got {p}")
    states = _states(trajectory)
    snaps = [compute_gamma(s) for s in states]
    times = np.array([s.t for s in snaps])
    norms = np.array([lp_norm(s.gamma, p, full_volume=True) for s in snaps])
    dec = norms[:-1] - norms[1:]
    s0 = states[0]
    grid = s0.omega.grid
    parts = np.abs(s0.omega.values / grid.r[:, None]) + 0.5 * np.abs(s0.rho.values)
    floor = _ROUNDOFF * lp_norm(ScalarField(grid, parts, Measure.AXISYM), p, full_volume=True)
    ok = bool(np.all(norms[1:] <= norms[:-1] * (1 + rel_tol) + floor))
    strict = {}
    for k, d in enumerate(dec):
        t = times[k + 1]
        if t <= 0:
            continue
        key = int(math.floor(math.log10(t)))
        strict.setdefault(key, 0)
        if d > 0:
            strict[key] += 1
    flux = np.array([axis_trace(s.gamma.values, s.gamma.grid, p) if math.isfinite(p) else math.nan
                     for s in snaps])
    return MonotonicityReport(p, times, norms, dec, strict, flux, ok)


# ---------------------------------------------------------------------------


def _grad_sq_norm(values: np.ndarray, grid) -> float:
    """``||grad f||_{L^2(R^3)}^2`` with second-order differences (one-sided at the edges)."""
    gr = np.gradient(values, grid.dr, axis=0, edge_order=2)
    gz = np.gradient(values, grid.dz, axis=1, edge_order=2)
    f = ScalarField(grid, np.sqrt(gr**2 + gz**2), Measure.AXISYM)
    return lp_norm(f, 2, full_volume=True) ** 2


def nash_constant(f: ScalarField) -> float:
    """Smallest ``C`` with ``||f||_2^2 <= C (||grad f||_2^2)^{3/5} ||f||_1^{4/5}`` for this ``f`` (R^3 norms)."""
    l2 = lp_norm(f, 2, full_volume=True) ** 2
    l1 = lp_norm(f, 1, full_volume=True)
    g2 = _grad_sq_norm(f.values, f.grid)
    if l2 == 0:
        return 0.0
    return float(l2 / (g2**0.6 * l1**0.8))


@dataclass
class NashReport:
    nash_constants: np.ndarray
    max_nash_constant: float
    slope: float
    predicted_slope: float
    window: tuple
    conclusive: bool
    passed: bool


def nash_decay_check(trajectory, predicted_slope: float = -1.5, tolerance: float = 0.1) -> NashReport:
    """Nash constants of the ``Gamma`` snapshots and the late-time ``L^inf`` decay slope.

    The slope is fitted on the last decade of positive times. The decay claim
    is an upper bound, so the check passes when the slope is at most
    ``predicted_slope + tolerance``. Trajectories spanning less than a decade
    are inconclusive and do not pass.
    """
    from .verify import fit_decay

    states = _states(trajectory)
    snaps = [compute_gamma(s) for s in states]
    consts = np.array([nash_constant(s.gamma) for s in snaps])
    times = np.array([s.t for s in snaps])
    pos = times > 0
    t_end = times[-1]
    conclusive = bool(pos.any() and t_end / times[pos][0] >= 10 * (1 - 1e-12))
    slope = math.nan
    window = (t_end / 10, t_end)
    if conclusive:
        samples = [(s.t, s.lp_table[math.inf]) for s in snaps if s.t > 0]
        try:
            slope, _ = fit_decay(samples, window)
        except DomainError:
            conclusive = False
    passed = conclusive and slope <= predicted_slope + tolerance
    cmax = float(consts.max()) if consts.size else 0.0
    return NashReport(consts, cmax, slope, predicted_slope, window, conclusive, bool(passed))


# ---------------------------------------------------------------------------


@dataclass
class BoundsReport:
    p: float
    sup_omega: float
    sup_rho_tilde: float
    sup_rho: float
    sup_half_span: tuple
    growth: tuple
    passed: bool


def theorem_bounds_check(trajectory, p: float, max_growth: float = 0.05) -> BoundsReport:
    """Measured constants ``sup_t t^a ||.||_p`` for ``omega``, ``rho_tilde`` and ``rho``.

    ``a = 1 - 1/p`` for the planar fields and ``(3/2)(1 - 1/p)`` for ``rho`` in
    R^3. Each supremum is compared with the one over the first half of the
    time span; the check passes when all are finite and none grows by more
    than ``max_growth``.
    """
    if not (p >= 1):
        raise DomainError(f"p must lie in [1, inf], got {p}")
    a = 1.0 - 1.0 / p
    states = [s for s in _states(trajectory) if s.t > 0]
    if not states:
        raise DomainError("trajectory has no positive times")
    t = np.array([s.t for s in states])
    om = np.array([t_**a * lp_norm(s.omega, p) for t_, s in zip(t, states)])
    rt = np.array([t_**a * lp_norm(s.rho_tilde, p) for t_, s in zip(t, states)])
    rh = np.array([t_ ** (1.5 * a) * lp_norm(s.rho, p, full_volume=True) for t_, s in zip(t, states)])
    half = t <= 0.5 * t[-1] * (1 + 1e-12)
    if not half.any():
        half = np.zeros_like(t, dtype=bool)
        half[0] = True
    full = (float(om.max()), float(rt.max()), float(rh.max()))
    part = (float(om[half].max()), float(rt[half].max()), float(rh[half].max()))
    growth = tuple((f / h - 1.0) if h > 0 else (0.0 if f == 0 else math.inf) for f, h in zip(full, part))
    ok = all(math.isfinite(x) for x in full) and all(g < max_growth for g in growth)
    return BoundsReport(p, *full, part, growth, ok)


def rho_bounds_check(trajectory, ps=(1.0, 2.0, math.inf), rel_tol: float = 1e-6) -> dict:
    """``||rho(t)||_p <= ||rho_0||_p (1 + rel_tol)``: returns ``p -> (max ratio, passed)``."""
    states = _states(trajectory)
    out = {}
    for p in ps:
        n0 = lp_norm(states[0].rho, p, full_volume=True)
        ratios = [lp_norm(s.rho, p, full_volume=True) / n0 if n0 > 0 else 0.0 for s in states]
        worst = max(ratios)
        out[p] = (worst, worst <= 1 + rel_tol)
    return out


# ---------------------------------------------------------------------------


@dataclass
class SplitReport:
    p: float
    times: np.ndarray
    norm_full: np.ndarray
    norm_bound: np.ndarray
    linearity_error: float
    min_parts: tuple
    passed: bool = field(default=False)


def split_evolution_check(trajectory, cfg, p: float = 1.0, rel_tol: float = 1e-6) -> SplitReport:
    """Mixed-sign ``Gamma_0``: compare with the positive and negative parts carried by the same flow.

    ``Gamma_0^+`` and ``Gamma_0^-`` are transported with the trajectory's
    velocity. The report records ``||Gamma(t)||_p`` against the bound
    ``||Gamma^+(t)||_p + ||Gamma^-(t)||_p``, the largest deviation of
    ``Gamma^+ - Gamma^-`` from ``Gamma`` (relative to ``max|Gamma_0|``) and
    the minima of both parts relative to ``max|Gamma_0|``.
    """
    from .mild_solver import transport_gamma

    states = _states(trajectory)
    grid = states[0].omega.grid
    r = grid.r[:, None]
    g0 = compute_gamma(states[0]).gamma.values
    scale = float(np.max(np.abs(g0))) or 1.0
    plus = transport_gamma(trajectory, r * np.maximum(g0, 0.0), cfg)
    minus = transport_gamma(trajectory, r * np.maximum(-g0, 0.0), cfg)
    n = min(len(plus), len(states))
    full, bound, lin, mins = [], [], 0.0, [0.0, 0.0]
    for k in range(n):
        gk = compute_gamma(states[k]).gamma.values
        gp, gm = plus[k] / r, minus[k] / r
        full.append(lp_norm(ScalarField(grid, gk, Measure.AXISYM), p, full_volume=True))
        bound.append(lp_norm(ScalarField(grid, gp, Measure.AXISYM), p, full_volume=True)
                     + lp_norm(ScalarField(grid, gm, Measure.AXISYM), p, full_volume=True))
        lin = max(lin, float(np.max(np.abs(gp - gm - gk))) / scale)
        mins = [min(mins[0], float(gp.min()) / scale), min(mins[1], float(gm.min()) / scale)]
    full, bound = np.array(full), np.array(bound)
    times = np.array([s.t for s in states[:n]])
    ok = bool(np.all(full <= bound * (1 + rel_tol) + rel_tol * scale))
    return SplitReport(p, times, full, bound, lin, tuple(mins), ok)
