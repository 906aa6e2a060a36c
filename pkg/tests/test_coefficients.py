import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import erf

from conftest import make_params
from kmwave.coefficients import (ModelParams, PeriodicFn, ell_for_mass, gaussian_kernel,
                                 integrate_periodic, kernel_weight, survival,
                                 truncated_gaussian_mass)
from kmwave.errors import ArgumentError


# -- PeriodicFn ------------------------------------------------------------

def test_constant_and_cosine_values():
    assert PeriodicFn.constant(3.0)(12.7) == 3.0
    f = PeriodicFn.cosine(2.0, 0.5, period=2.0)
    assert f(0.0) == pytest.approx(3.0)
    assert f(1.0) == pytest.approx(1.0)
    assert f(0.5) == pytest.approx(2.0)


@given(st.floats(-1e4, 1e4), st.integers(-50, 50))
def test_period_reduction_is_exact(t, k):
    # The only error left is the rounding of the argument t + kT itself.
    f = PeriodicFn.cosine(1.3, 0.7, period=0.8)
    slope = 1.3 * 0.7 * 2 * math.pi / 0.8
    tol = 4 * np.finfo(float).eps * (abs(t) + abs(k) * 0.8 + 1) * slope + 1e-15
    assert f(t + k * 0.8) == pytest.approx(f(t), abs=tol)


def test_tabulated_interpolates_samples_and_trig_polynomials():
    T = 3.0
    t = np.arange(16) * T / 16
    g = lambda s: 1.0 + 0.4 * np.cos(2 * np.pi * s / T) - 0.2 * np.sin(6 * np.pi * s / T)
    f = PeriodicFn.tabulated(g(t), period=T)
    np.testing.assert_allclose(f(t), g(t), atol=1e-14)
    s = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(f(s), g(s), atol=1e-13)
    dg = (-0.4 * 2 * np.pi / T * np.sin(2 * np.pi * s / T)
          - 0.2 * 6 * np.pi / T * np.cos(6 * np.pi * s / T))
    np.testing.assert_allclose(f.derivative(s), dg, atol=1e-12)
    assert f.mean == pytest.approx(1.0, abs=1e-15)


def test_shifted_and_minimum():
    f = PeriodicFn.cosine(2.0, 0.2)
    assert f.shifted(0.25)(0.0) == pytest.approx(f(0.25))
    assert f.minimum() == pytest.approx(1.6)
    assert PeriodicFn.tabulated([1.0, 3.0, 2.0]).minimum() <= 1.0


@pytest.mark.parametrize("kwargs", [
    dict(period=0.0), dict(period=-1.0), dict(period=1.0, kind="spline"),
    dict(period=1.0, kind="cosine", c0=1.0, amplitude=1.0),
    dict(period=1.0, kind="tabulated", samples=(1.0,)),
])
def test_periodic_fn_rejects(kwargs):
    with pytest.raises(ArgumentError):
        PeriodicFn(**kwargs)


# -- integrate_periodic ----------------------------------------------------

def test_integrate_constant():
    assert integrate_periodic(PeriodicFn.constant(0.7), 2.0, 3.5) == pytest.approx(0.7 * 1.5)


def test_integrate_cosine_over_period():
    f = PeriodicFn.cosine(1.7, 0.9, period=2.5)
    assert integrate_periodic(f, 0.3, 2.8) == pytest.approx(1.7 * 2.5, abs=1e-13)


def test_integrate_closed_form_oracle():
    # int_0^{1/4} 1 + 0.5 cos(2 pi s) ds = 1/4 + 0.5 / (2 pi)
    f = PeriodicFn.cosine(1.0, 0.5)
    assert integrate_periodic(f, 0.0, 0.25) == pytest.approx(0.25 + 0.5 / (2 * math.pi), abs=1e-14)
    assert integrate_periodic(f, 0.0, 0.25) == pytest.approx(0.3295775, abs=1e-7)


def test_integrate_tabulated_matches_quadrature():
    T = 1.5
    t = np.arange(32) * T / 32
    f = PeriodicFn.tabulated(np.exp(np.sin(2 * np.pi * t / T)), period=T)
    ref, _ = quad(f, 0.2, 7.9, limit=400, epsabs=1e-14)
    assert integrate_periodic(f, 0.2, 7.9) == pytest.approx(ref, abs=1e-12)


def test_integrate_rejects_reversed_bounds():
    with pytest.raises(ArgumentError):
        integrate_periodic(PeriodicFn.constant(1.0), 1.0, 0.0)


@settings(max_examples=50)
@given(st.floats(-20, 20), st.floats(0, 5), st.floats(0, 5))
def test_integral_additivity(a, l1, l2):
    f = PeriodicFn.cosine(1.2, 0.6, period=0.7)
    whole = integrate_periodic(f, a, a + l1 + l2)
    parts = integrate_periodic(f, a, a + l1) + integrate_periodic(f, a + l1, a + l1 + l2)
    assert whole == pytest.approx(parts, abs=1e-11)


# -- ModelParams -----------------------------------------------------------

def test_model_params_validation():
    p = make_params()
    assert p.period == 1.0 and p.autonomous
    assert not make_params(amplitude=0.2).autonomous
    with pytest.raises(ArgumentError):
        make_params(tau=0.0)
    with pytest.raises(ArgumentError):
        make_params(d2=-1.0)
    with pytest.raises(ArgumentError):
        ModelParams(1, 1, 1, 1, 1, PeriodicFn.constant(2, 1.0), PeriodicFn.constant(1, 2.0),
                    PeriodicFn.constant(0.1, 1.0))
    with pytest.raises(ArgumentError):
        make_params(gamma=0.0)


# -- kernel identities -----------------------------------------------------

def test_kernel_weight_examples():
    assert kernel_weight(make_params(gammaL=0.0), 0.3, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert kernel_weight(make_params(gammaL=0.4, tau=2.0), 0.3, 0.0) == pytest.approx(math.exp(-0.8))
    assert kernel_weight(make_params(gammaL=0.0), 0.0, 1.0) == pytest.approx(math.e, abs=1e-12)


def test_kernel_weight_is_gaussian_moment():
    p = ModelParams(1, 1, 0.7, 1.3, 1, PeriodicFn.constant(2.0),
                    PeriodicFn.constant(1.0), PeriodicFn.cosine(0.3, 0.5))
    t, mu = 0.37, 0.8
    moment, _ = quad(lambda y: gaussian_kernel(p.dL, p.tau, y) * math.exp(mu * y), -60, 60,
                     epsabs=1e-14, limit=200)
    assert kernel_weight(p, t, mu) == pytest.approx(survival(p, t) * moment, rel=1e-11)


def test_truncated_mass_and_inverse():
    assert truncated_gaussian_mass(1.0, 1.0, 2.0) == pytest.approx(erf(1.0), abs=1e-15)
    mass, _ = quad(lambda y: gaussian_kernel(0.5, 2.0, y), -1.3, 1.3, epsabs=1e-15)
    assert truncated_gaussian_mass(0.5, 2.0, 1.3) == pytest.approx(mass, abs=1e-12)
    for m in (0.5, 0.95, 0.999999):
        assert truncated_gaussian_mass(1.0, 1.0, ell_for_mass(1.0, 1.0, m)) == pytest.approx(m, abs=1e-14)
    with pytest.raises(ArgumentError):
        truncated_gaussian_mass(1.0, 1.0, 0.0)
    with pytest.raises(ArgumentError):
        ell_for_mass(1.0, 1.0, 1.0)


def test_gaussian_kernel_has_unit_mass_and_variance():
    m0, _ = quad(lambda y: gaussian_kernel(0.8, 1.5, y), -np.inf, np.inf)
    m2, _ = quad(lambda y: y * y * gaussian_kernel(0.8, 1.5, y), -np.inf, np.inf)
    assert m0 == pytest.approx(1.0, abs=1e-12)
    assert m2 == pytest.approx(2 * 0.8 * 1.5, rel=1e-10)
