r"""Profile functions of the Biot-Savart kernel and of the half-plane heat kernels.

Definitions
-----------
The stream-function profile is

.. math::

    F(s) = \int_0^\pi \frac{\cos\alpha\,d\alpha}{\sqrt{2(1-\cos\alpha) + s}}, \qquad s > 0,

and the heat profiles are

.. math::

    \mathcal N_1(t) = \frac{1}{\sqrt{\pi t}}\int_0^\pi e^{-\sin^2\alpha/t}\cos 2\alpha\,d\alpha,
    \qquad
    \mathcal N_2(t) = \frac{1}{\sqrt{\pi t}}\int_0^\pi e^{-\sin^2\alpha/t}\,d\alpha .

Two evaluation routes are provided.

* ``eval_*`` scalars: adaptive quadrature of the defining integrals in the
  core regime and asymptotic or convergent series outside it. These are the
  reference evaluators and do not touch the closed forms below.
* ``F``, ``F_prime``, ``N``, ``N_prime``: vectorised closed forms used by the
  kernels. With ``m = 4/(s+4)``,

  .. math:: F(s) = \tfrac{\sqrt{s+4}}{2}\big((2-m)K(m) - 2E(m)\big),

  and with ``x = 1/(2t)``, ``N_1 = \sqrt{\pi/t}\,e^{-x}I_1(x)`` and
  ``N_2 = \sqrt{\pi/t}\,e^{-x}I_0(x)``.

For large ``s`` the elliptic form cancels badly, so ``F`` switches to the
binomial series in ``2/(s+2)``. For small ``t`` the Bessel form of the
derivative cancels, so ``N_prime`` switches to the Hankel expansion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, DomainError

__all__ = [
    "SpecialFnConfig",
    "eval_F",
    "eval_F_prime",
    "eval_N1",
    "eval_N2",
    "eval_N1_prime",
    "eval_N2_prime",
    "F",
    "F_prime",
    "N",
    "N_prime",
    "regime_consistency",
    "monotonicity_probe",
    "leading_F",
    "leading_N",
]


@dataclass(frozen=True)
class SpecialFnConfig:
    rel_tol: float = 1e-10
    s_small: float = 1e-8
    s_large: float = 1e8
    t_small: float = 1e-4
    t_large: float = 1e4

    def __post_init__(self):
        if not (0 < self.s_small < self.s_large):
            raise ConfigError("need 0 < s_small < s_large", key="special.s_small")
        if not (0 < self.t_small < self.t_large):
            raise ConfigError("need 0 < t_small < t_large", key="special.t_small")
        if not (0 < self.rel_tol <= 1e-4):
            raise ConfigError("rel_tol must lie in (0, 1e-4]", key="special.rel_tol")


DEFAULT = SpecialFnConfig()


def _positive(x: float, name: str) -> float:
    x = float(x)
    if not (x > 0) or math.isinf(x):
        raise DomainError(f"{name} must be positive and finite, got {x!r}")
    return x


def _quad(func, a: float, b: float, rel_tol: float, breaks=()) -> float:
    """Adaptive Gauss-Kronrod (QUADPACK) with optional interior breakpoints."""
    pts = [a] + sorted(p for p in breaks if a < p < b) + [b]
    parts = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=rel_tol * 0.1, limit=500)
        parts.append(val)
    return math.fsum(parts)


# ---------------------------------------------------------------------------
# series pieces shared by the scalar evaluators


def _ke_near_one(p: float, nterms: int = 10) -> tuple[float, float]:
    """Complete elliptic integrals K(1-p), E(1-p) from their logarithmic series."""
    lg = -0.5 * math.log(p)
    k_sum = 0.0
    e_sum = 1.0
    a = 1.0
    b = 1.0
    for m in range(nterms):
        if m > 0:
            a *= ((m - 0.5) / m) ** 2
            b *= (m - 0.5) * (m + 0.5) / ((m + 1) * m)
        d = special.digamma(1 + m) - special.digamma(0.5 + m)
        k_sum += a * p**m * (lg + d)
        e_sum += 0.5 * b * p ** (m + 1) * (lg + d - 1.0 / ((2 * m + 1) * (2 * m + 2)))
    return k_sum, e_sum


def _f_from_ke(s, m, K, E):
    """F and F' given K(m), E(m) with m = 4/(s+4)."""
    p = s / (s + 4.0)
    sq = np.sqrt(s + 4.0)
    core = (2.0 - m) * K - 2.0 * E
    dK = (E - p * K) / (2.0 * m * p)
    dE = (E - K) / (2.0 * m)
    dcore = -K + (2.0 - m) * dK - 2.0 * dE
    val = 0.5 * sq * core
    der = core / (4.0 * sq) - 0.125 * m * m * sq * dcore
    return val, der


def _large_s_coeffs(nmax: int = 121) -> tuple[np.ndarray, np.ndarray]:
    ns, cs = [], []
    for n in range(1, nmax + 1, 2):
        c = Fraction(math.comb(2 * n, n), 4**n) * Fraction(math.comb(n + 1, (n + 1) // 2), 2 ** (n + 1)) * 2**n
        ns.append(n)
        cs.append(float(c) * math.pi)
    return np.array(ns, dtype=float), np.array(cs)


_LS_N, _LS_C = _large_s_coeffs()


def _f_large(s, nterms: int | None = None):
    """Convergent series in A = s + 2: F = sum_n c_n A^(-n-1/2) over odd n."""
    s = np.asarray(s, dtype=float)
    A = s + 2.0
    nt = len(_LS_N) if nterms is None else nterms
    val = np.zeros_like(A)
    der = np.zeros_like(A)
    # sum from the smallest terms upwards
    for n, c in zip(_LS_N[:nt][::-1], _LS_C[:nt][::-1]):
        t = c * A ** (-n - 0.5)
        val = val + t
        der = der - (n + 0.5) * t / A
    return val, der


def _hankel_coeffs(order: int, kmax: int = 24) -> np.ndarray:
    mu = 4.0 * order * order
    out = [1.0]
    a = 1.0
    for k in range(1, kmax + 1):
        a *= (mu - (2 * k - 1) ** 2) / (k * 8.0)
        out.append(a)
    return np.array(out)


_HANKEL = {1: _hankel_coeffs(1), 2: _hankel_coeffs(0)}


def _n_small(which: int, t, kmax: int = 16):
    """Hankel expansion N(t) = sum_k (-1)^k a_k (2t)^k and its derivative."""
    t = np.asarray(t, dtype=float)
    a = _HANKEL[which]
    val = np.zeros_like(t)
    der = np.zeros_like(t)
    for k in range(kmax, -1, -1):
        ck = (-1) ** k * a[k] * 2.0**k
        val = val + ck * t**k
        if k > 0:
            der = der + ck * k * t ** (k - 1)
    return val, der


def _n_large(which: int, t: float, nterms: int = 8) -> tuple[float, float]:
    """Power series of sqrt(pi/t) e^{-x} I(x) at x = 1/(2t) and its t-derivative."""
    x = 0.5 / t
    # sum_k c_k x^(2k+nu), c_k = 1/(2^(2k+nu) k! (k+nu)!)
    nu = 1 if which == 1 else 0
    ser = 0.0
    dser = 0.0
    for k in range(nterms):
        c = 1.0 / (2.0 ** (2 * k + nu) * math.factorial(k) * math.factorial(k + nu))
        ser += c * x ** (2 * k + nu)
        if 2 * k + nu > 0:
            dser += c * (2 * k + nu) * x ** (2 * k + nu - 1)
    pref = math.sqrt(math.pi / t)
    ex = math.exp(-x)
    val = pref * ex * ser
    # d/dt = dx/dt * d/dx, dx/dt = -2x^2, and pref = sqrt(2 pi x)
    dval_dx = math.sqrt(2 * math.pi) * ex * (ser / (2 * math.sqrt(x)) + math.sqrt(x) * (dser - ser))
    return val, dval_dx * (-2.0 * x * x)


# ---------------------------------------------------------------------------
# scalar reference evaluators


def _f_quad(s: float, rel_tol: float, deriv: bool) -> float:
    # alpha = 2 beta turns 2(1 - cos alpha) into X = 4 sin^2 beta. Since the
    # cosine weight integrates to zero, the value of the power at X = 0 is
    # subtracted first; this removes the cancellation that otherwise costs
    # a factor s of relative accuracy for large s.
    a = math.sqrt(s)
    if deriv:
        def g(b):
            sb = math.sin(b)
            x = 4.0 * sb * sb
            bb = math.sqrt(x + s)
            # (x+s)^(-3/2) - s^(-3/2) = (a^3 - bb^3) / (a bb)^3
            diff = (-x / (a + bb)) * (a * a + a * bb + bb * bb) / (a * bb) ** 3
            return -(1.0 - 2.0 * sb * sb) * diff
    else:
        def g(b):
            sb = math.sin(b)
            x = 4.0 * sb * sb
            bb = math.sqrt(x + s)
            diff = -x / (a * bb * (a + bb))
            return 2.0 * (1.0 - 2.0 * sb * sb) * diff
    breaks = [c * a for c in (1.0, 10.0, 100.0, 1000.0)] + [math.pi / 4]
    return _quad(g, 0.0, math.pi / 2, rel_tol, breaks)


def _f_series(s: float, deriv: bool, small: bool) -> float:
    if small:
        p = s / (s + 4.0)
        K, E = _ke_near_one(p)
        val, der = _f_from_ke(s, 4.0 / (s + 4.0), K, E)
    else:
        val, der = _f_large(s)
        val, der = float(val), float(der)
    return der if deriv else val


def eval_F(s: float, cfg: SpecialFnConfig = DEFAULT) -> float:
    """F(s) by adaptive quadrature, or by series outside ``[s_small, s_large]``."""
    s = _positive(s, "s")
    if cfg.s_small <= s <= cfg.s_large:
        return _f_quad(s, cfg.rel_tol, deriv=False)
    return _f_series(s, False, s < cfg.s_small)


def eval_F_prime(s: float, cfg: SpecialFnConfig = DEFAULT) -> float:
    """F'(s) by differentiating under the integral sign."""
    s = _positive(s, "s")
    if cfg.s_small <= s <= cfg.s_large:
        return _f_quad(s, cfg.rel_tol, deriv=True)
    return _f_series(s, True, s < cfg.s_small)


def _n_quad(which: int, t: float, rel_tol: float, deriv: bool) -> float:
    pref = 2.0 / math.sqrt(math.pi * t)

    def weight(a):
        return math.cos(2.0 * a) if which == 1 else 1.0

    if deriv:
        def g(a):
            s2 = math.sin(a) ** 2
            return pref * math.exp(-s2 / t) * weight(a) * (s2 / t**2 - 0.5 / t)
    else:
        def g(a):
            return pref * math.exp(-math.sin(a) ** 2 / t) * weight(a)
    w = math.sqrt(t)
    breaks = [c * w for c in (1.0, 4.0, 10.0)]
    return _quad(g, 0.0, math.pi / 2, rel_tol, breaks)


def _n_eval(which: int, t: float, cfg: SpecialFnConfig, deriv: bool) -> float:
    t = _positive(t, "t")
    if t < cfg.t_small:
        val, der = _n_small(which, t, kmax=6)
        return float(der if deriv else val)
    if t > cfg.t_large:
        val, der = _n_large(which, t)
        return der if deriv else val
    return _n_quad(which, t, cfg.rel_tol, deriv)


def eval_N1(t: float, cfg: SpecialFnConfig = DEFAULT) -> float:
    return _n_eval(1, t, cfg, False)


def eval_N2(t: float, cfg: SpecialFnConfig = DEFAULT) -> float:
    return _n_eval(2, t, cfg, False)


def eval_N1_prime(t: float, cfg: SpecialFnConfig = DEFAULT) -> float:
    return _n_eval(1, t, cfg, True)


def eval_N2_prime(t: float, cfg: SpecialFnConfig = DEFAULT) -> float:
    return _n_eval(2, t, cfg, True)


# ---------------------------------------------------------------------------
# vectorised closed forms

# above _S_SWITCH, 2/(s+2) <= 1/11 and 14 odd terms reach rounding level
_S_SWITCH = 20.0
_S_TERMS = 14
_T_SWITCH = 0.02


def _f_both(s):
    s = np.asarray(s, dtype=float)
    val = np.empty_like(s)
    der = np.empty_like(s)
    big = s >= _S_SWITCH
    if np.any(big):
        v, d = _f_large(s[big], _S_TERMS)
        val[big], der[big] = v, d
    sm = ~big
    if np.any(sm):
        ss = s[sm]
        p = ss / (ss + 4.0)
        m = 4.0 / (ss + 4.0)
        v, d = _f_from_ke(ss, m, special.ellipkm1(p), special.ellipe(m))
        val[sm], der[sm] = v, d
    return val, der


def F(s):
    """Vectorised F(s) for ``s > 0``."""
    return _f_both(s)[0]


def F_prime(s):
    return _f_both(s)[1]


def _n_both(which: int, t):
    t = np.asarray(t, dtype=float)
    val = np.empty_like(t)
    der = np.empty_like(t)
    sm = t < _T_SWITCH
    if np.any(sm):
        v, d = _n_small(which, t[sm])
        val[sm], der[sm] = v, d
    big = ~sm
    if np.any(big):
        tt = t[big]
        x = 0.5 / tt
        i0 = special.i0e(x)
        i1 = special.i1e(x)
        if which == 1:
            ie, die = i1, i0 - i1 * (1.0 + 1.0 / x)
        else:
            ie, die = i0, i1 - i0
        sx = np.sqrt(2.0 * np.pi * x)
        val[big] = sx * ie
        dndx = np.sqrt(2.0 * np.pi) * (ie / (2.0 * np.sqrt(x)) + np.sqrt(x) * die)
        der[big] = dndx * (-2.0 * x * x)
    return val, der


def N(which: int, t):
    """Vectorised heat profile; ``which`` is 1 or 2."""
    if which not in (1, 2):
        raise DomainError(f"profile index must be 1 or 2, got {which!r}")
    return _n_both(which, t)[0]


def N_prime(which: int, t):
    if which not in (1, 2):
        raise DomainError(f"profile index must be 1 or 2, got {which!r}")
    return _n_both(which, t)[1]


# ---------------------------------------------------------------------------
# diagnostics


def regime_consistency(cfg: SpecialFnConfig = DEFAULT) -> list[tuple[str, float, float, float, float]]:
    """Compare quadrature and series at every switchover point.

    Returns rows ``(name, x, quadrature, series, relative_gap)``.
    """
    rows = []
    for s, small in ((cfg.s_small, True), (cfg.s_large, False)):
        for deriv, name in ((False, "F"), (True, "F_prime")):
            q = _f_quad(s, cfg.rel_tol, deriv)
            ser = _f_series(s, deriv, small)
            rows.append((name, s, q, float(ser), abs(q - ser) / abs(q)))
    for t in (cfg.t_small, cfg.t_large):
        for which in (1, 2):
            for deriv in (False, True):
                q = _n_quad(which, t, cfg.rel_tol, deriv)
                if t <= cfg.t_small:
                    v, d = _n_small(which, t, kmax=6)
                    ser = float(d if deriv else v)
                else:
                    v, d = _n_large(which, t)
                    ser = d if deriv else v
                name = f"N{which}" + ("_prime" if deriv else "")
                rows.append((name, t, q, float(ser), abs(q - ser) / abs(q)))
    return rows


def monotonicity_probe(which: int, t_min: float = 1e-6, t_max: float = 1e6, n: int = 2001) -> dict:
    """Sample N_which on a log grid and report any increase between neighbours."""
    t = np.geomspace(t_min, t_max, n)
    v = N(which, t)
    d = N_prime(which, t)
    inc = np.nonzero(np.diff(v) > 0)[0]
    return {
        "which": which,
        "samples": n,
        "increases": int(inc.size),
        "max_derivative": float(d.max()),
        "first_increase_t": float(t[inc[0]]) if inc.size else None,
    }


# ---------------------------------------------------------------------------
# leading-order asymptotics


def leading_F(s: float, regime: str) -> float:
    """Two-term small-``s`` or leading large-``s`` form of ``F``.

    ``regime="small"``: ``log(1/s)/2 + log 8 - 2``; ``regime="large"``:
    ``pi / (2 s^{3/2})``.
    """
    s = _positive(s, "s")
    if regime == "small":
        return 0.5 * math.log(1.0 / s) + math.log(8.0) - 2.0
    if regime == "large":
        return math.pi / (2.0 * s**1.5)
    raise DomainError(f"regime must be 'small' or 'large', got {regime!r}")


def leading_N(which: int, t: float, regime: str) -> float:
    """Two-term expansions of ``N_1``/``N_2`` near 0 and infinity.

    Small ``t``: ``N_1 = 1 - 3t/4`` and ``N_2 = 1 + t/4``. Large ``t``:
    ``N_1 = sqrt(pi) / (4 t^{3/2})`` and
    ``N_2 = sqrt(pi/t) - sqrt(pi) / (2 t^{3/2})``.
    """
    t = _positive(t, "t")
    if which not in (1, 2):
        raise DomainError(f"which must be 1 or 2, got {which!r}")
    if regime == "small":
        return 1.0 - 0.75 * t if which == 1 else 1.0 + 0.25 * t
    if regime == "large":
        rp = math.sqrt(math.pi)
        return rp / (4.0 * t**1.5) if which == 1 else rp / math.sqrt(t) - rp / (2.0 * t**1.5)
    raise DomainError(f"regime must be 'small' or 'large', got {regime!r}")
