"""Numerical laboratory for the axisymmetric viscous Boussinesq system without swirl.

The vorticity ``omega`` and density ``rho`` on the half-plane ``r > 0`` are
built as mild solutions from explicit heat-type semigroups and the
axisymmetric Biot-Savart law; the package measures decay rates, sign
preservation and operator norms along the computed solutions.

Setting ``AXIB_THREADS`` (0 means automatic) before import caps the BLAS
thread pools.
"""

import os as _os

_threads = _os.environ.get("AXIB_THREADS", "").strip()
if _threads and _threads != "0":
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .errors import ConfigError, DivergedError, DomainError, SchedulingError  # noqa: E402
from .grid_fields import Grid, Measure, ScalarField, VectorField, VelocityField, make_grid  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DivergedError",
    "DomainError",
    "SchedulingError",
    "Grid",
    "Measure",
    "ScalarField",
    "VectorField",
    "VelocityField",
    "make_grid",
]
