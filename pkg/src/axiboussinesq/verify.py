"""Decay fits, operator-norm probes and grid-convergence studies.

Measured constants are maxima over a finite ensemble and a finite set of
times, so they are lower bounds for the true operator norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import semigroup as sg
from .biot_savart import BSConfig, _speed_field, velocity_from_vorticity
from .errors import DomainError
from .grid_fields import Grid, Measure, ScalarField, gaussian, lp_norm

__all__ = [
    "DecayReport",
    "fit_decay",
    "decay_report",
    "default_ensemble",
    "ProbeResult",
    "operator_norm_probe",
    "GridStudy",
    "grid_convergence",
    "HEAT3D_CONSTANT",
]

HEAT3D_CONSTANT = (4.0 * math.pi) ** -1.5


def fit_decay(samples, window: tuple[float, float] | None = None) -> tuple[float, float]:
    """Least-squares fit of ``log value`` against ``log t``.

    Parameters
    ----------
    samples : sequence of (t, value)
    window : (t_lo, t_hi), optional
        Defaults to the last half-decade ``[t_max / sqrt(10), t_max]``.

    Returns
    -------
    slope, constant
        ``value ~ constant * t ** slope``.
    """
    arr = np.asarray(samples, dtype=float).reshape(-1, 2)
    t, v = arr[:, 0], arr[:, 1]
    if np.any(t <= 0):
        raise DomainError("sample times must be positive")
    if window is None:
        window = (t.max() / math.sqrt(10.0), t.max())
    lo, hi = window
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if sel.sum() < 4:
        raise DomainError(f"need at least 4 samples in [{lo:.4g}, {hi:.4g}], got {int(sel.sum())}")
    if not np.all(np.isfinite(v[sel])) or np.any(v[sel] <= 0):
        raise DomainError("decay samples must be finite and positive")
    slope, icpt = np.polyfit(np.log(t[sel]), np.log(v[sel]), 1)
    return float(slope), float(math.exp(icpt))


@dataclass
class DecayReport:
    quantity: str
    p: float
    fitted_slope: float
    predicted_slope: float
    tolerance: float
    measured_constant: float
    samples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        finite = all(math.isfinite(v) for _, v in self.samples)
        return finite and abs(self.fitted_slope - self.predicted_slope) <= self.tolerance


def decay_report(quantity: str, p: float, samples, predicted: float, tolerance: float,
                 window: tuple[float, float] | None = None) -> DecayReport:
    slope, const = fit_decay(samples, window)
    return DecayReport(quantity, p, slope, predicted, tolerance, const, [(float(a), float(b)) for a, b in samples])


# ---------------------------------------------------------------------------
# operator-norm probes

# (r0 / r_max, z0 / z_half, a, sign)
_MEMBERS = (
    (0.0, 0.0, 25.0, 1),
    (0.0, 0.0, 4.0, 1),
    (0.08, 0.0, 4.0, 1),
    (0.08, 0.05, 1.0, -1),
    (0.04, -0.08, 9.0, 1),
    (0.16, 0.0, 4.0, -1),
    (0.25, 0.12, 2.0, 1),
    (0.6, 0.0, 25.0, 1),
    (0.4, -0.2, 1.0, -1),
    (0.12, 0.12, 16.0, 1),
    (0.33, 0.0, 4.0, 1),
)


def _rough_field(grid: Grid, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    vals = np.zeros(grid.shape)
    nr, nz = max(grid.n_r // 8, 2), max(grid.n_z // 8, 2)
    z0 = grid.n_z // 2 - nz // 2
    vals[:nr, z0:z0 + nz] = rng.uniform(-1.0, 1.0, size=(nr, nz))
    # one pass of a five-point average
    pad = np.pad(vals, 1)
    return (pad[1:-1, 1:-1] + pad[:-2, 1:-1] + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:]) / 5.0


def default_ensemble(grid: Grid, measure: Measure = Measure.PLANAR, seed: int = 0) -> list[ScalarField]:
    """Eleven Gaussians of varied centre, width and sign plus one seeded rough field."""
    out = [gaussian(grid, s, a, fr * grid.r_max, fz * grid.z_half, measure) for fr, fz, a, s in _MEMBERS]
    out.append(ScalarField(grid, _rough_field(grid, seed), measure))
    return out


def _norm(f: ScalarField, p: float) -> float:
    return lp_norm(f, p, full_volume=f.measure is Measure.AXISYM)


_OPS: dict[str, Callable] = {
    "S1": sg.apply_S1,
    "S2": sg.apply_S2_axi,
    "S2_heat3d": sg.apply_S2_heat3d,
}


@dataclass
class ProbeResult:
    operator: str
    p: float
    q: float
    rate: float
    constant: float
    rows: list
    per_member: np.ndarray
    seed: int | None = None

    def spread(self) -> float:
        """``max / min - 1`` of the ensemble-maximum ratio over the sampled times."""
        vals = np.array([r for _, r in self.rows])
        return float(vals.max() / vals.min() - 1.0) if vals.size and vals.min() > 0 else math.inf


def operator_norm_probe(op, ensemble: Sequence[ScalarField], p: float, q: float, rate: float = 0.0,
                        times=(1.0,), bs: BSConfig = BSConfig(), seed: int | None = None) -> ProbeResult:
    """Largest ``t**rate * ||op(t, f)||_q / ||f||_p`` over the ensemble and ``times``.

    ``op`` is ``"S1"``, ``"S2"``, ``"S2_heat3d"``, ``"BS"`` (the speed of the
    Biot-Savart velocity; time is ignored) or a callable ``op(t, f)``
    returning a :class:`ScalarField`. Norms of axisymmetric fields are taken
    in R^3.
    """
    ensemble = list(ensemble)
    if not ensemble:
        raise DomainError("ensemble is empty")
    if op == "BS":
        name = "BS"
        fn = lambda t, f: _speed_field(velocity_from_vorticity(f, bs))  # noqa: E731
        times = (1.0,)
    elif callable(op):
        name, fn = getattr(op, "__name__", "custom"), op
    elif op in _OPS:
        name, fn = op, _OPS[op]
    else:
        raise DomainError(f"unknown operator {op!r}")
    denom = []
    for f in ensemble:
        n = _norm(f, p)
        if n == 0:
            raise DomainError("ensemble contains a zero field")
        denom.append(n)
    table = np.empty((len(times), len(ensemble)))
    for i, t in enumerate(times):
        for j, f in enumerate(ensemble):
            table[i, j] = t**rate * _norm(fn(t, f), q) / denom[j]
    rows = [(float(t), float(table[i].max())) for i, t in enumerate(times)]
    return ProbeResult(name, p, q, rate, float(table.max()), rows, table, seed)


# ---------------------------------------------------------------------------
# grid convergence


@dataclass
class GridStudy:
    grids: list
    values: list
    differences: list
    orders: list

    @property
    def order(self) -> float:
        return self.orders[-1]


def _doubling(a: Grid, b: Grid) -> bool:
    return (b.n_r == 2 * a.n_r and b.n_z == 2 * a.n_z
            and math.isclose(a.r_max, b.r_max) and math.isclose(a.z_half, b.z_half))


def grid_convergence(study: Callable[[Grid], object], grids: Sequence[Grid], errors: bool = False) -> GridStudy:
    """Observed order of ``study`` along a ladder of doubling grids.

    ``study(grid)`` returns a scalar or a fixed-size array. With
    ``errors=False`` the orders come from successive differences,
    ``log2(|v1 - v0| / |v2 - v1|)``; with ``errors=True`` the values are
    already errors and the orders are ``log2(e_k / e_{k+1})``. A vanishing
    denominator gives an order of ``inf``.
    """
    grids = list(grids)
    if len(grids) < 3:
        raise DomainError("grid_convergence needs at least 3 grids")
    for a, b in zip(grids, grids[1:]):
        if not _doubling(a, b):
            raise DomainError("grids must double n_r and n_z over the same box")
    values = [np.asarray(study(g), dtype=float) for g in grids]

    def size(x):
        return float(np.max(np.abs(x))) if np.ndim(x) else float(abs(x))

    if errors:
        diffs = [size(v) for v in values]
    else:
        diffs = [size(b - a) for a, b in zip(values, values[1:])]
    orders = []
    for d0, d1 in zip(diffs, diffs[1:]):
        if d1 == 0:
            orders.append(math.inf)
        else:
            orders.append(math.log2(d0 / d1))
    return GridStudy(grids, [v.tolist() if v.ndim else float(v) for v in values], diffs, orders)
