r"""Axisymmetric Biot-Savart law on the meridian half-plane.

The velocity is recovered from the azimuthal vorticity through

.. math::

    v^r = \iint K_r\,\omega\,d\tilde r\,d\tilde z, \qquad
    v^z = \iint K_z\,\omega\,d\tilde r\,d\tilde z,

with :math:`\xi^2 = ((r-\tilde r)^2 + (z-\tilde z)^2)/(r\tilde r)` and

.. math::

    K_r = -\frac{1}{\pi}\frac{z-\tilde z}{r^{3/2}\tilde r^{1/2}}F'(\xi^2),\qquad
    K_z = \frac{1}{\pi}\frac{r-\tilde r}{r^{3/2}\tilde r^{1/2}}F'(\xi^2)
          + \frac{1}{4\pi}\frac{\tilde r^{1/2}}{r^{3/2}}\big(F(\xi^2) - 2\xi^2F'(\xi^2)\big).

Quadrature is the midpoint rule over source cells. Cells close to the target
are averaged over ``subcell_refine**2`` sub-points; for the target's own cell
the sub-points are symmetric about the centre and never hit it, so the odd
part of the singularity cancels.

Because the grid is uniform in z, the discrete operator is Toeplitz in the
z index. The table ``K[i, k, j - l]`` is therefore built once per grid and the
double sum over source cells is evaluated as an exact discrete convolution
along z with real FFTs. The result is the same O(N^2) midpoint sum, only
reordered.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import special_kernels as sk
from .errors import ConfigError, DomainError
from .grid_fields import (
    Grid,
    Measure,
    ScalarField,
    VelocityField,
    d_dr,
    d_dz,
    lp_norm,
    weighted_lp_norm,
)

__all__ = [
    "BSConfig",
    "kernel_K",
    "stream_kernel",
    "velocity_from_vorticity",
    "velocity_batch",
    "stream_function",
    "velocity_from_stream",
    "measure_velocity_estimates",
    "vr_over_r_sup",
    "kernel_bound_probe",
    "divergence_residual",
    "speed",
]

# Tables larger than this many entries per component are streamed instead of cached.
_CACHE_LIMIT = 128 * 128 * 256


@dataclass(frozen=True)
class BSConfig:
    subcell_refine: int = 8
    near_radius: float | None = None  # None means 2 * max(dr, dz)

    def __post_init__(self):
        if int(self.subcell_refine) != self.subcell_refine or self.subcell_refine < 2:
            raise ConfigError("subcell_refine must be an integer >= 2", key="biot_savart.subcell_refine")
        if self.near_radius is not None and not self.near_radius > 0:
            raise ConfigError("near_radius must be positive", key="biot_savart.near_radius")

    def radius(self, grid: Grid) -> float:
        if self.near_radius is None:
            return 2.0 * max(grid.dr, grid.dz)
        return float(self.near_radius)


# ---------------------------------------------------------------------------
# pointwise kernels


def _kernels(r, dz_, rt, dr_=None):
    """Return (K_r, K_z) for targets r, sources rt and offsets z - z~ = dz_."""
    r = np.asarray(r, dtype=float)
    rt = np.asarray(rt, dtype=float)
    drr = r - rt if dr_ is None else dr_
    xi2 = (drr * drr + dz_ * dz_) / (r * rt)
    f, fp = sk._f_both(xi2)
    base = 1.0 / (math.pi * r * np.sqrt(r * rt))
    kr = -dz_ * base * fp
    kz = drr * base * fp + np.sqrt(rt) / (4.0 * math.pi * r * np.sqrt(r)) * (f - 2.0 * xi2 * fp)
    return kr, kz


def kernel_K(r, z, rt, zt, which: str = "R"):
    """Pointwise Biot-Savart kernel, ``which`` in {"R", "Z"}.

    Raises
    ------
    DomainError
        For non-positive radii or coincident points.
    """
    r, z, rt, zt = (np.asarray(a, dtype=float) for a in (r, z, rt, zt))
    if np.any(r <= 0) or np.any(rt <= 0):
        raise DomainError("kernel_K needs r > 0 and r~ > 0")
    if np.any((r == rt) & (z == zt)):
        raise DomainError("kernel_K is singular at coincident points; use the cell-averaged path")
    kr, kz = _kernels(r, z - zt, rt)
    w = str(which).upper()
    if w == "R":
        out = kr
    elif w == "Z":
        out = kz
    else:
        raise DomainError(f"which must be 'R' or 'Z', got {which!r}")
    return out[()] if out.ndim == 0 else out


def kernel_bound_probe(n: int = 10_000, seed: int = 0, span: float = 1e2) -> dict:
    """Largest ``dist * (|K_r| + |K_z|)`` over random pairs of distinct points.

    The product is invariant under scaling, so radii are drawn log-uniformly
    in ``[1/span, span]`` and vertical offsets uniformly in
    ``(r + r~) * [-2, 2]``.
    """
    if n < 1:
        raise DomainError("need at least one sample")
    rng = np.random.default_rng(seed)
    lo, hi = -math.log(span), math.log(span)
    r = np.exp(rng.uniform(lo, hi, n))
    rt = np.exp(rng.uniform(lo, hi, n))
    dz = (r + rt) * rng.uniform(-2.0, 2.0, n)
    kr, kz = _kernels(r, dz, rt)
    vals = np.hypot(r - rt, dz) * (np.abs(kr) + np.abs(kz))
    k = int(np.argmax(vals))
    return {"max": float(vals[k]), "r": float(r[k]), "rt": float(rt[k]), "dz": float(dz[k]), "samples": n, "seed": seed}


def stream_kernel(r, z, rt, zt):
    """Green's function of the stream-function problem, sqrt(r r~)/(2 pi) F(xi^2)."""
    r, z, rt, zt = (np.asarray(a, dtype=float) for a in (r, z, rt, zt))
    xi2 = ((r - rt) ** 2 + (z - zt) ** 2) / (r * rt)
    out = np.sqrt(r * rt) / (2.0 * math.pi) * sk.F(xi2)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# cell-effective tables


def _subpoints(n: int) -> np.ndarray:
    """Symmetric sub-cell midpoints in units of the cell width, centre excluded."""
    off = (np.arange(n) + 0.5) / n - 0.5
    return off


def _table_rows(grid: Grid, rows: np.ndarray, cfg: BSConfig, kind: str) -> list[np.ndarray]:
    """Cell-effective kernel rows ``T[i, k, m]`` for target rows ``i`` in ``rows``.

    ``m`` runs over ``-(n_z-1) .. n_z-1`` stored at index ``m + n_z - 1``. The
    entries already include the cell area ``dr * dz``.
    """
    nr, nz = grid.n_r, grid.n_z
    dr, dz = grid.dr, grid.dz
    r = grid.r
    m = np.arange(-(nz - 1), nz)
    R = r[rows][:, None, None]
    RT = r[None, :, None]
    DZ = (m * dz)[None, None, :]
    area = dr * dz
    self_mask = (rows[:, None, None] == np.arange(nr)[None, :, None]) & (m[None, None, :] == 0)
    RT_b = np.broadcast_to(RT, (len(rows), nr, len(m)))
    safe_rt = np.where(self_mask, RT_b + 0.5 * dr, RT_b)  # placeholder, overwritten below
    if kind == "velocity":
        kr, kz = _kernels(R, DZ, safe_rt)
        out = [kr * area, kz * area]
    else:
        xi2 = ((R - safe_rt) ** 2 + DZ**2) / (R * safe_rt)
        out = [np.sqrt(R * safe_rt) / (2.0 * math.pi) * sk.F(xi2) * area]

    # near-field cells: average over sub-points
    rad = cfg.radius(grid)
    n = int(cfg.subcell_refine)
    su = _subpoints(n)
    keep = ~((np.abs(su)[:, None] < 1e-15) & (np.abs(su)[None, :] < 1e-15))
    sr = (su[:, None] * dr + 0.0 * su[None, :])[keep]
    sz = (0.0 * su[:, None] + su[None, :] * dz)[keep]
    near = (np.abs(R - RT) <= rad + 1e-12) & (np.abs(DZ) <= rad + 1e-12)
    ii, kk, mm = np.nonzero(np.broadcast_to(near, (len(rows), nr, len(m))))
    if ii.size:
        rtar = r[rows][ii][:, None]
        rsrc = r[kk][:, None] + sr[None, :]
        dzz = (m[mm] * dz)[:, None] - sz[None, :]
        drr = rtar - rsrc
        ok = rsrc > 0
        rsrc_safe = np.where(ok, rsrc, 1.0)
        if kind == "velocity":
            kr, kz = _kernels(rtar, dzz, rsrc_safe, dr_=drr)
            vals = [np.where(ok, kr, 0.0), np.where(ok, kz, 0.0)]
        else:
            xi2 = (drr**2 + dzz**2) / (rtar * rsrc_safe)
            g = np.sqrt(rtar * rsrc_safe) / (2.0 * math.pi) * sk.F(xi2)
            vals = [np.where(ok, g, 0.0)]
        cnt = sr.size
        for o, v in zip(out, vals):
            o[ii, kk, mm] = v.sum(axis=1) / cnt * area
    return out


class _Operator:
    """FFT-diagonalised z-convolution for one grid and one kernel kind."""

    def __init__(self, grid: Grid, cfg: BSConfig, kind: str):
        self.grid = grid
        self.cfg = cfg
        self.kind = kind
        self.L = 2 * grid.n_z
        ncomp = 2 if kind == "velocity" else 1
        self.cached = grid.n_r * grid.n_r * grid.n_z <= _CACHE_LIMIT
        self._hat = None
        if self.cached:
            self._hat = [np.empty((grid.n_r, grid.n_r, self.L // 2 + 1), dtype=complex) for _ in range(ncomp)]
            for rows in self._chunks():
                for h, t in zip(self._hat, self._rows_hat(rows)):
                    h[rows] = t
            # (f, i, k) layout so each frequency is one contiguous matrix
            self._hat = [np.ascontiguousarray(h.transpose(2, 0, 1)) for h in self._hat]

    def _chunks(self):
        g = self.grid
        per_row = g.n_r * 2 * g.n_z
        step = max(1, int(4_000_000 // per_row))
        for s in range(0, g.n_r, step):
            yield np.arange(s, min(g.n_r, s + step))

    def _rows_hat(self, rows):
        g = self.grid
        tabs = _table_rows(g, rows, self.cfg, self.kind)
        out = []
        for t in tabs:
            circ = np.zeros(t.shape[:2] + (self.L,))
            # m >= 0 at index m, m < 0 at index L + m
            circ[..., : g.n_z] = t[..., g.n_z - 1 :]
            circ[..., self.L - (g.n_z - 1) :] = t[..., : g.n_z - 1]
            out.append(np.fft.rfft(circ, axis=-1))
        return out

    def apply(self, values: np.ndarray) -> list[np.ndarray]:
        """Apply to ``values`` of shape (..., n_r, n_z); returns one array per component."""
        g = self.grid
        vals = np.asarray(values, dtype=float)
        lead = vals.shape[:-2]
        flat = vals.reshape((-1, g.n_r, g.n_z))
        what = np.fft.rfft(flat, n=self.L, axis=-1)  # (B, k, f)
        wt = np.ascontiguousarray(what.transpose(2, 1, 0))  # (f, k, B)
        ncomp = 2 if self.kind == "velocity" else 1
        res = [np.empty((flat.shape[0], g.n_r, g.n_z)) for _ in range(ncomp)]
        if self.cached:
            for c in range(ncomp):
                prod = np.matmul(self._hat[c], wt)  # (f, i, B)
                full = np.fft.irfft(prod.transpose(2, 1, 0), n=self.L, axis=-1)
                res[c][:] = full[..., : g.n_z]
        else:
            for rows in self._chunks():
                hats = self._rows_hat(rows)
                for c in range(ncomp):
                    prod = np.matmul(hats[c].transpose(2, 0, 1), wt)
                    full = np.fft.irfft(prod.transpose(2, 1, 0), n=self.L, axis=-1)
                    res[c][:, rows] = full[..., : g.n_z]
        return [x.reshape(lead + (g.n_r, g.n_z)) for x in res]


@functools.lru_cache(maxsize=8)
def _operator(grid: Grid, cfg: BSConfig, kind: str) -> _Operator:
    return _Operator(grid, cfg, kind)


def velocity_batch(omega_values: np.ndarray, grid: Grid, cfg: BSConfig = BSConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Velocity for a stack of vorticity arrays of shape (..., n_r, n_z)."""
    vr, vz = _operator(grid, cfg, "velocity").apply(omega_values)
    return vr, vz


def velocity_from_vorticity(omega: ScalarField, cfg: BSConfig = BSConfig()) -> VelocityField:
    """Midpoint-rule Biot-Savart sum with near-field sub-cell averaging."""
    if omega.measure is not Measure.PLANAR:
        raise DomainError("vorticity must carry the PLANAR measure tag")
    vr, vz = velocity_batch(omega.values, omega.grid, cfg)
    return VelocityField(omega.grid, vr, vz)


def stream_function(omega: ScalarField, cfg: BSConfig = BSConfig()) -> ScalarField:
    """Stream function by the same cell-averaged quadrature with the Green's kernel."""
    (psi,) = _operator(omega.grid, cfg, "stream").apply(omega.values)
    return ScalarField(omega.grid, psi, Measure.PLANAR)


def velocity_from_stream(psi: ScalarField) -> VelocityField:
    """v = (-d_z psi / r, d_r psi / r) by centred differences."""
    g = psi.grid
    r = g.r[:, None]
    return VelocityField(g, -d_dz(psi.values, g) / r, d_dr(psi.values, g) / r)


# ---------------------------------------------------------------------------
# estimates


def speed(v: VelocityField) -> np.ndarray:
    return np.hypot(v.vr, v.vz)


def _speed_field(v: VelocityField) -> ScalarField:
    return ScalarField(v.grid, speed(v), Measure.PLANAR)


# (alpha, beta, p, q) tuples for the weighted velocity bound
WEIGHTED_CASES = ((0.0, 0.5, 4.0 / 3.0, 2.0), (1.0, 1.0, 4.0 / 3.0, 4.0))


def measure_velocity_estimates(omega: ScalarField, cfg: BSConfig = BSConfig(), v: VelocityField | None = None) -> dict:
    """Measured ratios for the velocity bounds.

    Keys
    ----
    ``lq_lp``       |v|_4 / |omega|_{4/3}
    ``linf_interp`` |v|_inf / (|omega|_{4/3}^(1/2) |omega|_4^(1/2))
    ``weighted_a{alpha}_b{beta}`` |r^alpha v|_q / |r^beta omega|_p for each case
    in ``WEIGHTED_CASES``.
    """
    om = omega.with_values(omega.values, Measure.PLANAR)
    if lp_norm(om, 1.0) == 0.0:
        raise DomainError("velocity estimates need a nonzero vorticity")
    if v is None:
        v = velocity_from_vorticity(om, cfg)
    sp = _speed_field(v)
    out = {}
    out["lq_lp"] = lp_norm(sp, 4.0) / lp_norm(om, 4.0 / 3.0)
    sigma = 0.5
    out["linf_interp"] = lp_norm(sp, math.inf) / (lp_norm(om, 4.0 / 3.0) ** sigma * lp_norm(om, 4.0) ** (1 - sigma))
    for a, b, p, q in WEIGHTED_CASES:
        key = f"weighted_a{a:g}_b{b:g}"
        out[key] = weighted_lp_norm(sp, a, q) / weighted_lp_norm(om, b, p)
    return out


def divergence_residual(v: VelocityField) -> float:
    """Planar L^2 norm of ``d_r(r v^r) + d_z(r v^z)`` by centred differences."""
    g = v.grid
    r = g.r[:, None]
    div = d_dr(r * v.vr, g) + d_dz(r * v.vz, g)
    return lp_norm(ScalarField(g, div, Measure.PLANAR), 2.0)


def vr_over_r_sup(v: VelocityField) -> float:
    """max |v^r| / r over the nodes."""
    return float(np.max(np.abs(v.vr) / v.grid.r[:, None])) if v.vr.size else 0.0
