r"""Mild solutions of the vorticity-density system by Picard iteration.

The unknowns are the azimuthal vorticity ``omega``, the density ``rho`` and
the redundant ``rho_tilde = r rho``. Their integral formulation reads

.. math::

    \omega(t) &= S_1(t)\omega_0 - \int_0^t S_1(t-\tau)\,\mathrm{div}_\star(v\omega)\,d\tau
                 - \int_0^t S_1(t-\tau)\,\partial_r\rho\,d\tau,\\
    \tilde\rho(t) &= S_1(t)\tilde\rho_0 - \int_0^t S_1(t-\tau)\,\mathrm{div}_\star(v\tilde\rho)\,d\tau
                 - 2\int_0^t S_1(t-\tau)\,\partial_r\rho\,d\tau,\\
    \rho(t) &= S_2(t)\rho_0 - \int_0^t S_2(t-\tau)\,\mathrm{div}(v\rho)\,d\tau,

with ``v`` the Biot-Savart velocity of ``omega``.

Iterated variables
------------------
Subtracting half the second line from the first removes the ``d_r rho``
source: ``g = omega - r rho / 2`` obeys

.. math:: g(t) = S_1(t)g_0 - \int_0^t S_1(t-\tau)\,\mathrm{div}_\star(v g)\,d\tau .

Picard iteration runs on ``(g, rho)``; ``omega = g + r rho / 2`` and
``rho_tilde = r rho`` are reconstructed, so the compatibility of the
redundant unknowns holds exactly. :func:`duhamel_rhs` still evaluates all
three lines as written above and is used for residual checks.

Time discretisation
-------------------
A window ``[t0, t0 + T_w]`` carries ``n_time`` equally spaced snapshot
nodes. Each Duhamel integral up to a node ``s`` is split at ``s / 2``; on
each half the lag is measured from the outer end as ``(s / 2) u^2`` with
``n_quad / 2`` midpoint nodes in ``u``, which smooths both the weak
singularity at zero lag and the initial layer. The iterate is interpolated
between snapshot nodes with a cubic spline that includes the window start.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from . import semigroup as sg
from .biot_savart import BSConfig, velocity_batch
from .errors import ConfigError, DivergedError, DomainError, SchedulingError
from .grid_fields import Grid, Measure, ScalarField, axisym_mass, gaussian, lp_norm, weighted_lp_norm

__all__ = [
    "State",
    "SolverConfig",
    "WindowLog",
    "Trajectory",
    "initial_state",
    "duhamel_rhs",
    "picard_solve",
    "evolve",
    "transport_gamma",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class State:
    """Snapshot ``(omega, rho_tilde, rho)`` at time ``t``.

    ``rho_tilde`` must equal ``r * rho`` nodewise unless ``strict=False``
    (used for raw Duhamel right-hand sides, where the two lines are
    evaluated independently).
    """

    t: float
    omega: ScalarField
    rho_tilde: ScalarField
    rho: ScalarField
    strict: bool = True

    def __post_init__(self):
        if self.t < 0:
            raise DomainError(f"state time must be >= 0, got {self.t}")
        if self.strict:
            expect = self.rho.values * self.rho.grid.r[:, None]
            scale = max(1.0, float(np.max(np.abs(expect))) if expect.size else 1.0)
            if np.max(np.abs(self.rho_tilde.values - expect)) > 1e-12 * scale:
                raise DomainError("rho_tilde differs from r * rho")

    @property
    def grid(self) -> Grid:
        return self.omega.grid

    @classmethod
    def from_arrays(cls, t: float, grid: Grid, omega, rho) -> "State":
        om = ScalarField(grid, omega, Measure.PLANAR)
        rh = ScalarField(grid, rho, Measure.AXISYM)
        return cls(t, om, ScalarField(grid, rh.values * grid.r[:, None], Measure.PLANAR), rh)

    def gamma_tilde(self) -> np.ndarray:
        return self.omega.values - 0.5 * self.rho_tilde.values


def initial_state(grid: Grid, omega_amp: float = 1.0, omega_a: float = 4.0, omega_r0: float = 2.0,
                  omega_z0: float = 0.0, rho_amp: float = 1.0, rho_a: float = 4.0, rho_r0: float = 2.0,
                  rho_z0: float = 0.0) -> State:
    """Gaussian initial data for both unknowns."""
    om = gaussian(grid, omega_amp, omega_a, omega_r0, omega_z0, Measure.PLANAR)
    rh = gaussian(grid, rho_amp, rho_a, rho_r0, rho_z0, Measure.AXISYM)
    return State.from_arrays(0.0, grid, om.values, rh.values)


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    T: float = 0.5
    n_time: int = 8
    n_quad: int = 16
    picard_tol: float = 1e-8
    picard_max: int = 50
    bs: BSConfig = BSConfig()
    restart_count: int = 10000
    frozen_velocity: bool = False
    stall_limit: int = 3

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError("T must be positive", key="solver.T")
        if not (0 < self.picard_tol < 1e-2):
            raise ConfigError("picard_tol must lie in (0, 1e-2)", key="solver.picard_tol")
        if int(self.n_time) != self.n_time or self.n_time < 8:
            raise ConfigError("n_time must be an integer >= 8", key="solver.n_time")
        if int(self.n_quad) != self.n_quad or self.n_quad < 2:
            raise ConfigError("n_quad must be an integer >= 2", key="solver.n_quad")
        if int(self.picard_max) != self.picard_max or self.picard_max < 1:
            raise ConfigError("picard_max must be a positive integer", key="solver.picard_max")
        if int(self.restart_count) != self.restart_count or self.restart_count < 1:
            raise ConfigError("restart_count must be a positive integer", key="solver.restart_count")


@dataclass
class WindowLog:
    t0: float
    length: float
    iterations: int
    ratios: list
    changes: list
    converged: bool


@dataclass
class Trajectory:
    states: list
    windows: list = field(default_factory=list)
    aborted: str | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def max_ratio(self) -> float:
        rs = [r for w in self.windows if w.converged for r in w.ratios]
        return max(rs) if rs else 0.0


# ---------------------------------------------------------------------------
# Duhamel machinery


def _duhamel_nodes(s: float, n_quad: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes ``tau``, lags ``s - tau`` and weights for integrals over ``[0, s]``.

    The interval is split at ``s/2``; each half uses ``tau = (s/2) u^2``
    measured from its outer endpoint with ``n_quad // 2`` midpoint nodes in
    ``u``, so both the ``tau -> 0`` and the ``s - tau -> 0`` singularities are
    smoothed.
    """
    m = max(n_quad // 2, 1)
    u = (np.arange(m) + 0.5) / m
    h = 0.5 * s
    near = h * u**2
    w = 2.0 * h * u / m
    taus = np.concatenate([near, s - near])
    return taus, s - taus, np.concatenate([w, w])


def _velocity(omega: np.ndarray, cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    if cfg.frozen_velocity:
        return np.zeros_like(omega), np.zeros_like(omega)
    return velocity_batch(omega, cfg.grid, cfg.bs)


def _xnorm(g_vals: np.ndarray, rho_vals: np.ndarray, s: np.ndarray, grid: Grid) -> float:
    """Window version of the critical norm: X (omega part) + Y (r rho) + Z (rho)."""
    p = 4.0 / 3.0
    best_x = best_y = best_z = 0.0
    r = grid.r[:, None]
    for k in range(len(s)):
        om = ScalarField(grid, g_vals[k] + 0.5 * r * rho_vals[k], Measure.PLANAR)
        rh = ScalarField(grid, rho_vals[k], Measure.AXISYM)
        best_x = max(best_x, s[k] ** 0.25 * lp_norm(om, p))
        best_y = max(best_y, s[k] ** 0.25 * weighted_lp_norm(rh, 1.0, p))
        best_z = max(best_z, s[k] ** 0.375 * lp_norm(rh, p))
    return best_x + best_y + best_z


def _window_taus(s_nodes, n_quad):
    nodes = [_duhamel_nodes(s, n_quad) for s in s_nodes[1:]]
    return nodes, np.concatenate([nd[0] for nd in nodes]), np.concatenate([nd[1] for nd in nodes])


def _window_map(g0, rho0, s_nodes, g_nodes, rho_nodes, cfg: SolverConfig, vq=None):
    """One application of the Picard map on a window.

    ``g_nodes``/``rho_nodes`` hold the current iterate at ``s_nodes``
    (relative times, first entry 0). Returns the new iterate at the same
    nodes. ``vq`` prescribes the velocity at the quadrature times instead of
    computing it from the iterate.
    """
    grid = cfg.grid
    r = grid.r[:, None]
    new_g = np.empty_like(g_nodes)
    new_rho = np.empty_like(rho_nodes)
    new_g[0] = g0
    new_rho[0] = rho0
    spl_g = CubicSpline(s_nodes, g_nodes, axis=0) if len(s_nodes) > 2 else None
    spl_r = CubicSpline(s_nodes, rho_nodes, axis=0) if len(s_nodes) > 2 else None
    s_pos = s_nodes[1:]
    nodes, taus, lags = _window_taus(s_nodes, cfg.n_quad)
    gq = spl_g(taus)
    rq = spl_r(taus)
    vr, vz = _velocity(gq + 0.5 * r * rq, cfg) if vq is None else vq
    d1 = sg.apply_stack("S1div", lags, vr * gq, vz * gq, grid)
    d2 = sg.apply_stack("S2div", lags, vr * rq, vz * rq, grid)
    nq = len(nodes[0][2])
    for n, s in enumerate(s_pos):
        sl = slice(n * nq, (n + 1) * nq)
        wts = nodes[n][2]
        duh_g = np.tensordot(wts, d1[sl], axes=(0, 0))
        duh_r = np.tensordot(wts, d2[sl], axes=(0, 0))
        new_g[n + 1] = sg._s_values(1, s, g0, grid) - duh_g
        new_rho[n + 1] = sg._s_values(2, s, rho0, grid) - duh_r
    return new_g, new_rho


def _free(g0, rho0, s_nodes, grid):
    g = np.empty((len(s_nodes),) + g0.shape)
    rh = np.empty_like(g)
    g[0], rh[0] = g0, rho0
    for n, s in enumerate(s_nodes[1:], start=1):
        g[n] = sg._s_values(1, s, g0, grid)
        rh[n] = sg._s_values(2, s, rho0, grid)
    return g, rh


def _solve_window(data: State, length: float, cfg: SolverConfig, velocity=None):
    grid = cfg.grid
    r = grid.r[:, None]
    g0 = data.gamma_tilde()
    rho0 = data.rho.values
    s_nodes = np.linspace(0.0, length, cfg.n_time + 1)
    vq = None
    if velocity is not None:
        vq = velocity(data.t + _window_taus(s_nodes, cfg.n_quad)[1])
    g, rh = _free(g0, rho0, s_nodes, grid)
    ratios, changes = [], []
    prev = None
    stall = 0
    for it in range(1, cfg.picard_max + 1):
        ng, nrh = _window_map(g0, rho0, s_nodes, g, rh, cfg, vq)
        if not (np.all(np.isfinite(ng)) and np.all(np.isfinite(nrh))):
            raise DivergedError("Picard iterate became non-finite", ratios, data.t, length)
        diff = _xnorm(ng[1:] - g[1:], nrh[1:] - rh[1:], s_nodes[1:], grid)
        size = _xnorm(ng[1:], nrh[1:], s_nodes[1:], grid)
        g, rh = ng, nrh
        rel = diff / size if size > 0 else 0.0
        changes.append(rel)
        if prev is not None and prev > 0:
            ratios.append(diff / prev)
            stall = stall + 1 if ratios[-1] >= 1.0 else 0
        prev = diff
        if rel < cfg.picard_tol:
            log.debug("window t0=%.6g len=%.6g converged in %d iterations", data.t, length, it)
            states = [State.from_arrays(data.t + s, grid, g[k] + 0.5 * r * rh[k], rh[k])
                      for k, s in enumerate(s_nodes) if k > 0]
            return states, WindowLog(data.t, length, it, ratios, changes, True)
        if stall >= cfg.stall_limit:
            break
    raise DivergedError(
        f"Picard iteration did not contract on window [{data.t:.6g}, {data.t + length:.6g}]",
        ratios, data.t, length)


def picard_solve(data: State, cfg: SolverConfig, length: float | None = None):
    """Solve on one window of length ``cfg.T`` (or ``length``) starting at ``data.t``.

    Returns
    -------
    states : list of State
        Snapshots at the window nodes, excluding the start.
    log : WindowLog
        Iteration count, relative changes and contraction ratios.

    Raises
    ------
    DivergedError
        If the relative change does not fall below ``picard_tol`` within
        ``picard_max`` iterations, or the ratios stay at or above one.
    """
    if data.grid != cfg.grid:
        raise ConfigError("initial state lives on a different grid", key="grid")
    L = cfg.T if length is None else float(length)
    if L <= 0:
        raise DomainError("window length must be positive")
    return _solve_window(data, L, cfg)


def evolve(data: State, t_end: float, cfg: SolverConfig, window: float | None = None,
           on_window=None) -> Trajectory:
    """Continue the solution to ``t_end`` by restarting Picard windows.

    The window is halved after a divergence and grown by 1.5 after a success,
    never exceeding ``cfg.T``. A window shorter than the propagator's
    ``dt_min`` aborts the run; the trajectory up to that point is returned
    with ``aborted`` set.
    """
    if t_end <= data.t:
        raise DomainError("t_end must exceed the initial time")
    traj = Trajectory([data])
    cur = data
    L = min(cfg.T, window or cfg.T)
    floor = sg.dt_min(cfg.grid) * cfg.n_time
    restarts = 0
    while cur.t < t_end * (1 - 1e-12):
        L_eff = min(L, t_end - cur.t)
        try:
            states, wl = _solve_window(cur, L_eff, cfg)
        except DivergedError as exc:
            traj.windows.append(WindowLog(cur.t, L_eff, len(exc.ratios) + 1, exc.ratios, [], False))
            L = 0.5 * L_eff
            if L < floor:
                traj.aborted = f"window underflow at t={cur.t:.6g} (length {L:.3g} < {floor:.3g})"
                exc.trajectory = traj
                raise exc
            continue
        traj.windows.append(wl)
        traj.states.extend(states)
        cur = states[-1]
        if on_window is not None:
            on_window(wl)
        L = min(cfg.T, 1.5 * L_eff) if L_eff >= L * (1 - 1e-12) else L
        restarts += 1
        if restarts > cfg.restart_count:
            traj.aborted = f"restart limit {cfg.restart_count} reached at t={cur.t:.6g}"
            break
    return traj


def transport_gamma(trajectory: Trajectory, gamma_tilde0, cfg: SolverConfig) -> list:
    """Carry ``gamma_tilde0`` along with the velocity of an existing trajectory.

    Solves the linear equation ``g = S_1 g_0 - int S_1 div_*(v g)`` on the
    same windows as ``trajectory``, with ``v`` the Biot-Savart velocity of the
    trajectory's (spline-interpolated) vorticity. Returns arrays of ``g`` at
    the trajectory's times.
    """
    grid = cfg.grid
    spl = _history_spline(trajectory.states, trajectory.states[0].t, trajectory.states[-1].t)[0]
    velocity = lambda tt: _velocity(spl(tt), cfg)  # noqa: E731
    out = [np.asarray(gamma_tilde0, dtype=float)]
    zero = np.zeros(grid.shape)
    cur = State.from_arrays(trajectory.states[0].t, grid, out[0], zero)
    for w in trajectory.windows:
        if not w.converged:
            continue
        states, _ = _solve_window(cur, w.length, cfg, velocity)
        out.extend(st.omega.values for st in states)
        cur = states[-1]
    return out


# ---------------------------------------------------------------------------
# residual evaluation


def _history_spline(history, t0: float, t: float):
    hs = sorted(history, key=lambda s: s.t)
    times = np.array([s.t for s in hs])
    if times.size < 2 or times[0] > t0 + 1e-12 or times[-1] < t - 1e-12:
        raise SchedulingError(f"history covers [{times.min() if times.size else None}, "
                              f"{times.max() if times.size else None}], need [{t0}, {t}]")
    keep = np.concatenate([[True], np.diff(times) > 0])
    hs = [h for h, k in zip(hs, keep) if k]
    times = times[keep]
    om = np.stack([h.omega.values for h in hs])
    rt = np.stack([h.rho_tilde.values for h in hs])
    rh = np.stack([h.rho.values for h in hs])
    kind = CubicSpline if len(hs) > 2 else None
    if kind is None:
        raise SchedulingError("need at least three history nodes")
    return CubicSpline(times, om, axis=0), CubicSpline(times, rt, axis=0), CubicSpline(times, rh, axis=0)


def duhamel_rhs(history, t: float, data: State, cfg: SolverConfig | None = None, n_quad: int | None = None) -> State:
    """Right-hand sides of all three integral equations at time ``t``.

    ``history`` must cover ``[data.t, t]``; the lag variable is measured from
    ``data.t``. The d_r rho source is applied as ``S_1 div_*`` of ``(rho, 0)``.
    The returned state is not required to satisfy ``rho_tilde = r rho``.
    """
    grid = data.grid
    if cfg is None:
        cfg = SolverConfig(grid)
    nq = cfg.n_quad if n_quad is None else n_quad
    s = float(t) - data.t
    if s <= 0:
        raise SchedulingError("t must be later than the data time")
    so, srt, srh = _history_spline(history, data.t, t)
    rel, lags, wts = _duhamel_nodes(s, nq)
    taus = data.t + rel
    om_q, rt_q, rh_q = so(taus), srt(taus), srh(taus)
    vr, vz = _velocity(om_q, cfg)
    zero = np.zeros_like(rh_q)
    d_om = sg.apply_stack("S1div", lags, vr * om_q, vz * om_q, grid)
    d_rt = sg.apply_stack("S1div", lags, vr * rt_q, vz * rt_q, grid)
    d_src = sg.apply_stack("S1div", lags, rh_q, zero, grid)
    d_rh = sg.apply_stack("S2div", lags, vr * rh_q, vz * rh_q, grid)
    red = lambda a: np.tensordot(wts, a, axes=(0, 0))  # noqa: E731
    om = sg._s_values(1, s, data.omega.values, grid) - red(d_om) - red(d_src)
    rt = sg._s_values(1, s, data.rho_tilde.values, grid) - red(d_rt) - 2.0 * red(d_src)
    rh = sg._s_values(2, s, data.rho.values, grid) - red(d_rh)
    return State(float(t), ScalarField(grid, om, Measure.PLANAR), ScalarField(grid, rt, Measure.PLANAR),
                 ScalarField(grid, rh, Measure.AXISYM), strict=False)
