import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from axiboussinesq import special_kernels as sk
from axiboussinesq.errors import ConfigError, DomainError


def test_F_matches_defining_integral_directly():
    # independent evaluation of the cosine integral with plain quad
    for s in (0.01, 0.3, 2.0, 40.0):
        val, _ = integrate.quad(lambda a: math.cos(a) / math.sqrt(2 * (1 - math.cos(a)) + s), 0, math.pi,
                                epsabs=0, epsrel=1e-12, limit=200)
        assert sk.eval_F(s) == pytest.approx(val, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(ls=st.floats(-6, 6))
def test_vectorised_F_matches_reference(ls):
    s = 10.0**ls
    assert float(sk.F(s)) == pytest.approx(sk.eval_F(s), rel=1e-9)
    assert float(sk.F_prime(s)) == pytest.approx(sk.eval_F_prime(s), rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(lt=st.floats(-5, 5), which=st.sampled_from([1, 2]))
def test_vectorised_N_matches_reference(lt, which):
    t = 10.0**lt
    ref = sk.eval_N1 if which == 1 else sk.eval_N2
    dref = sk.eval_N1_prime if which == 1 else sk.eval_N2_prime
    assert float(sk.N(which, t)) == pytest.approx(ref(t), rel=1e-9)
    assert float(sk.N_prime(which, t)) == pytest.approx(dref(t), rel=1e-7, abs=1e-300)


def test_derivatives_by_finite_differences():
    for s in (0.05, 1.0, 30.0):
        h = 1e-5 * s
        fd = (sk.eval_F(s + h) - sk.eval_F(s - h)) / (2 * h)
        assert sk.eval_F_prime(s) == pytest.approx(fd, rel=1e-6)
    for t in (0.05, 1.0, 30.0):
        h = 1e-5 * t
        fd = (sk.eval_N2(t + h) - sk.eval_N2(t - h)) / (2 * h)
        assert sk.eval_N2_prime(t) == pytest.approx(fd, rel=1e-6)


def test_regime_switches_are_seamless():
    for name, x, q, ser, gap in sk.regime_consistency():
        assert gap < 1e-8, (name, x)


@pytest.mark.parametrize("s,regime", [(1e-6, "small"), (1e4, "large")])
def test_F_leading_order(s, regime):
    assert sk.eval_F(s) == pytest.approx(sk.leading_F(s, regime), rel=1e-3)


@pytest.mark.parametrize("which", [1, 2])
@pytest.mark.parametrize("t,regime", [(1e-6, "small"), (1e6, "large")])
def test_N_leading_order(which, t, regime):
    ref = sk.eval_N1 if which == 1 else sk.eval_N2
    assert ref(t) == pytest.approx(sk.leading_N(which, t, regime), rel=1e-3)


def test_N2_grows_near_zero():
    # the linear coefficient is +1/4: at t = 0.01 the two-term form is good to O(t^2)
    t = 0.01
    assert sk.eval_N2(t) > 1.0
    assert sk.eval_N2(t) == pytest.approx(1 + t / 4, rel=1e-4)
    assert sk.eval_N2_prime(1e-4) == pytest.approx(0.25, rel=1e-3)


def test_monotonicity_probe_reports_N2_increase():
    p1 = sk.monotonicity_probe(1)
    p2 = sk.monotonicity_probe(2)
    assert p1["increases"] == 0 and p1["max_derivative"] <= 0
    assert p2["increases"] > 0 and p2["max_derivative"] > 0.4


def test_bad_arguments():
    with pytest.raises(DomainError):
        sk.eval_F(0.0)
    with pytest.raises(DomainError):
        sk.eval_N1(-1.0)
    with pytest.raises(DomainError):
        sk.leading_F(1.0, "middle")
    with pytest.raises(ConfigError):
        sk.SpecialFnConfig(s_small=1.0, s_large=0.5)


def test_closed_forms_are_vectorised():
    s = np.geomspace(1e-3, 1e3, 7)
    assert sk.F(s).shape == (7,)
    assert np.all(np.diff(sk.F(s)) < 0)
