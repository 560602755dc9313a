r"""Linear propagators on the half-plane and their divergence compositions.

Both semigroups have kernels that split into a radial and a vertical factor,

.. math::

    (\mathbb S_i(t)f)(r,z) = \iint a_i(t; r,\tilde r)\,g_t(z-\tilde z)\,f(\tilde r,\tilde z)\,d\tilde r\,d\tilde z,

    a_i = \frac{1}{\sqrt{4\pi t}}\sqrt{\tilde r/r}\;\mathcal N_i\!\Big(\frac{t}{r\tilde r}\Big)e^{-(r-\tilde r)^2/4t},
    \qquad g_t(z) = \frac{e^{-z^2/4t}}{\sqrt{4\pi t}},

so on the grid each propagator is a pair of small dense matrices and
``S f = A @ f @ Z.T``. ``S_1`` is the propagator of ``Delta - 1/r^2`` on
planar fields; ``S_2`` is the three-dimensional heat flow on axisymmetric
fields.

Discretisation
--------------
* Source sums use the midpoint rule with the innermost cell reweighted by
  11/12. All integrands met here are odd in ``r~`` near the axis, and the
  correction makes the radial sum fourth-order.
* The vertical Gaussian is normalised column by column so every source
  column sums to one. This absorbs the lattice error at small t and the loss
  through the ends of the box.
* ``S_2`` columns are rescaled so the discrete axisymmetric mass (see
  :func:`grid_fields.axisym_mass`) is conserved to rounding. ``S_1`` columns
  get the same factors, which matters once the kernel is narrower than a
  cell.
* The divergence forms use the integrated-by-parts kernels, so ``f`` is never
  differenced. In the radial part,

  .. math::

      b_i = \frac{1}{\sqrt{4\pi t}}\sqrt{\tilde r/r}\Big[\frac{t}{r\tilde r^2}\mathcal N_i'
            - \Big(\frac{1}{2\tilde r} + \frac{r-\tilde r}{2t}\Big)\mathcal N_i\Big]e^{-(r-\tilde r)^2/4t},

  and ``S_2 div`` adds ``a_2 / r~`` for the ``f^r/r`` part of the
  three-dimensional divergence. The vertical part is ``-(z-z~)/(2t) g_t``.
* Below ``dt_min`` the propagator is the identity. Below ``div_t_min`` the
  sampled derivative kernels are too coarse and the divergence forms switch
  to ``S(t)`` applied to a centred-difference divergence.
"""

from __future__ import annotations

import enum
import functools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import special_kernels as sk
from .errors import DomainError
from .grid_fields import (
    Grid,
    Measure,
    ScalarField,
    VectorField,
    div_axi,
    div_star,
    lp_norm,
    radial_weights,
    weighted_lp_norm,
)

__all__ = [
    "Operator",
    "PropagatorRequest",
    "propagate",
    "apply_S1",
    "apply_S2_axi",
    "apply_S2_heat3d",
    "apply_S1_div_star",
    "apply_S2_div",
    "weighted_semigroup_probe",
    "dt_min",
    "div_t_min",
    "operators",
    "apply_stack",
]


class Operator(enum.Enum):
    S1 = "S1"
    S2 = "S2"
    S1_DIV_STAR = "S1_DIV_STAR"
    S2_DIV = "S2_DIV"
    S2_HEAT3D = "S2_HEAT3D"


def dt_min(grid: Grid) -> float:
    """Below this time the propagators are replaced by the identity."""
    return (min(grid.dr, grid.dz) / 8.0) ** 2


# Threshold in units of h^2 for the sampled derivative kernels.
DIV_T_MIN_FACTOR = 0.25


def div_t_min(grid: Grid) -> float:
    return DIV_T_MIN_FACTOR * max(grid.dr, grid.dz) ** 2


@dataclass(frozen=True, eq=False)
class _Ops:
    t: float
    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray | None
    B2: np.ndarray | None
    Z: np.ndarray
    Zd: np.ndarray | None


def _check_t(t: float) -> float:
    t = float(t)
    if not (t > 0) or not math.isfinite(t):
        raise DomainError(f"propagation time must be positive, got {t!r}")
    return t


@functools.lru_cache(maxsize=4096)
def operators(grid: Grid, t: float) -> _Ops:
    """Matrices of every propagator at time ``t`` (cached per grid and time)."""
    t = _check_t(t)
    r = grid.r
    w = radial_weights(grid)
    R = r[:, None]
    RT = r[None, :]
    tau = t / (R * RT)
    gauss_r = np.exp(-((R - RT) ** 2) / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)
    pre = np.sqrt(RT / R) * gauss_r
    n1, n1p = sk._n_both(1, tau)
    n2, n2p = sk._n_both(2, tau)
    A1 = pre * n1 * w[None, :]
    A2 = pre * n2 * w[None, :]
    # conserve the discrete axisymmetric mass column by column; S_1 shares the
    # sampled Gaussian, so the same factor fixes its lattice error at small t
    mass_w = r * w
    col = mass_w @ A2
    fix = (mass_w / col)[None, :]
    A2 = A2 * fix
    A1 = A1 * fix

    z = grid.z
    dzz = z[:, None] - z[None, :]
    g = np.exp(-(dzz**2) / (4.0 * t))
    Z = g / g.sum(axis=0)[None, :]

    B1 = B2 = Zd = None
    if t >= div_t_min(grid):
        shift = (1.0 / (2.0 * RT) + (R - RT) / (2.0 * t))
        B1 = pre * (t / (R * RT**2) * n1p - shift * n1) * w[None, :]
        B2 = pre * (t / (R * RT**2) * n2p - shift * n2 + n2 / RT) * w[None, :]
        # remove the tiny mass defect of the sampled derivative kernel
        defect = mass_w @ B2
        B2 = B2 - A2 * (defect / mass_w)[None, :]
        Zd = -(dzz / (2.0 * t)) * Z
        Zd = Zd - Z * Zd.sum(axis=0)[None, :]
    return _Ops(t, A1, A2, B1, B2, Z, Zd)


def _apply(A: np.ndarray, Z: np.ndarray, vals: np.ndarray) -> np.ndarray:
    return A @ vals @ Z.T


def _s_values(which: int, t: float, vals: np.ndarray, grid: Grid) -> np.ndarray:
    if t < dt_min(grid):
        return np.array(vals, dtype=float, copy=True)
    ops = operators(grid, t)
    return _apply(ops.A1 if which == 1 else ops.A2, ops.Z, vals)


def _sdiv_values(which: int, t: float, fr: np.ndarray, fz: np.ndarray, grid: Grid) -> np.ndarray:
    if t < div_t_min(grid):
        vf = VectorField(grid, fr, fz)
        d = div_star(vf) if which == 1 else div_axi(vf)
        return _s_values(which, t, d, grid)
    ops = operators(grid, t)
    if which == 1:
        return _apply(ops.B1, ops.Z, fr) + _apply(ops.A1, ops.Zd, fz)
    return _apply(ops.B2, ops.Z, fr) + _apply(ops.A2, ops.Zd, fz)


def apply_S1(t: float, f: ScalarField) -> ScalarField:
    """Propagator of ``Delta - 1/r^2`` on the half-plane."""
    t = _check_t(t)
    return ScalarField(f.grid, _s_values(1, t, f.values, f.grid), Measure.PLANAR)


def apply_S2_axi(t: float, f: ScalarField) -> ScalarField:
    """Three-dimensional heat flow of an axisymmetric field via the N_2 kernel."""
    t = _check_t(t)
    return ScalarField(f.grid, _s_values(2, t, f.values, f.grid), Measure.AXISYM)


def apply_S1_div_star(t: float, f: VectorField) -> ScalarField:
    """``S_1(t) div_* f`` through the integrated-by-parts kernels."""
    t = _check_t(t)
    return ScalarField(f.grid, _sdiv_values(1, t, f.fr, f.fz, f.grid), Measure.PLANAR)


def apply_S2_div(t: float, f: VectorField) -> ScalarField:
    """``S_2(t) div f`` with ``div f = d_r f^r + f^r/r + d_z f^z``."""
    t = _check_t(t)
    return ScalarField(f.grid, _sdiv_values(2, t, f.fr, f.fz, f.grid), Measure.AXISYM)


@functools.lru_cache(maxsize=64)
def _heat3d_radial(grid: Grid, t: float) -> np.ndarray:
    """Radial matrix of the 3-D heat kernel by trapezoidal quadrature in the angle."""
    r = grid.r
    w = radial_weights(grid)
    x_max = r[-1] ** 2 / (2.0 * t)
    n_theta = int(max(64, math.ceil(16.0 * math.sqrt(x_max) + 32)))
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    R = r[:, None]
    RT = r[None, :]
    acc = np.zeros((grid.n_r, grid.n_r))
    for c in np.cos(theta):
        acc += np.exp(-(R * R + RT * RT - 2.0 * R * RT * c) / (4.0 * t))
    acc *= 2.0 * math.pi / n_theta
    return acc * RT * w[None, :] / (4.0 * math.pi * t) ** 1.5


def apply_S2_heat3d(t: float, f: ScalarField) -> ScalarField:
    """Plain 3-D heat flow, built from the Gaussian kernel without the N_2 profile.

    Independent of :func:`apply_S2_axi` (angular quadrature instead of the
    Bessel closed form, and no mass renormalisation), used as a cross-check.
    """
    t = _check_t(t)
    g = f.grid
    if t < dt_min(g):
        return ScalarField(g, f.values, Measure.AXISYM)
    z = g.z
    gz = np.exp(-((z[:, None] - z[None, :]) ** 2) / (4.0 * t)) * g.dz / math.sqrt(4.0 * math.pi * t)
    A = _heat3d_radial(g, t)
    # the angular integral already carries 1/(4 pi t)^(3/2); undo the z normalisation
    return ScalarField(g, A @ f.values @ gz.T * math.sqrt(4.0 * math.pi * t), Measure.AXISYM)


@dataclass(frozen=True)
class PropagatorRequest:
    t: float
    operator: Operator
    input: object

    def __post_init__(self):
        _check_t(self.t)
        vector = self.operator in (Operator.S1_DIV_STAR, Operator.S2_DIV)
        if vector and not isinstance(self.input, VectorField):
            raise DomainError(f"{self.operator.value} needs a vector input")
        if not vector and not isinstance(self.input, ScalarField):
            raise DomainError(f"{self.operator.value} needs a scalar input")


_DISPATCH = {
    Operator.S1: apply_S1,
    Operator.S2: apply_S2_axi,
    Operator.S2_HEAT3D: apply_S2_heat3d,
    Operator.S1_DIV_STAR: apply_S1_div_star,
    Operator.S2_DIV: apply_S2_div,
}


def propagate(req: PropagatorRequest) -> ScalarField:
    return _DISPATCH[req.operator](req.t, req.input)


def apply_stack(kind: str, times, fr: np.ndarray, fz: np.ndarray | None = None, grid: Grid | None = None) -> np.ndarray:
    """Apply one propagator kind at several times to a stack of inputs.

    ``kind`` is one of ``"S1"``, ``"S2"``, ``"S1div"``, ``"S2div"``; ``fr`` has
    shape (B, n_r, n_z) and ``fz`` is required for the divergence kinds.
    """
    out = np.empty_like(fr)
    for b, t in enumerate(times):
        if kind == "S1":
            out[b] = _s_values(1, t, fr[b], grid)
        elif kind == "S2":
            out[b] = _s_values(2, t, fr[b], grid)
        elif kind == "S1div":
            out[b] = _sdiv_values(1, t, fr[b], fz[b], grid)
        elif kind == "S2div":
            out[b] = _sdiv_values(2, t, fr[b], fz[b], grid)
        else:
            raise DomainError(f"unknown propagator kind {kind!r}")
    return out


def weighted_semigroup_probe(t: float, f: ScalarField, alpha: float, beta: float, p: float, q: float,
                             which: int = 1) -> float:
    """``t^(1/p - 1/q + (beta-alpha)/2) |r^alpha S_i(t) f|_q / |r^beta f|_p``.

    Raises
    ------
    DomainError
        Unless ``-1 <= alpha <= beta <= 2`` and ``1 <= p <= q``.
    """
    if not (-1.0 <= alpha <= beta <= 2.0):
        raise DomainError(f"need -1 <= alpha <= beta <= 2, got alpha={alpha}, beta={beta}")
    if not (1.0 <= p <= q):
        raise DomainError(f"need 1 <= p <= q, got p={p}, q={q}")
    u = apply_S1(t, f) if which == 1 else apply_S2_axi(t, f)
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    expo = 1.0 / p - inv_q + 0.5 * (beta - alpha)
    den = weighted_lp_norm(f, beta, p)
    if den == 0.0:
        raise DomainError("probe needs r^beta f != 0")
    return t**expo * weighted_lp_norm(u, alpha, q) / den
