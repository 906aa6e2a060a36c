import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import make_params
from kmwave.errors import ArgumentError, PreconditionError
from kmwave.threshold import (compute_R0_eps, epsilon_sup, floquet_exponent_linearized,
                              threshold_report)


def characteristic_root(a, b, tau):
    f = lambda s: s - a - b * math.exp(-s * tau)
    lo, hi = a - 1.0, max(a + b, 0.0) + 1.0
    while f(lo) > 0:
        lo -= 2 * (hi - lo)
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)


def _draws(n, seed=7):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield dict(beta=rng.uniform(1.5, 4.0), gamma=rng.uniform(0.5, 1.2),
                   gammaL=rng.uniform(0.0, 0.3), tau=rng.choice([0.5, 1.0, 2.0]),
                   S0=rng.uniform(0.8, 1.5))


@pytest.mark.parametrize("kw", list(_draws(10)))
def test_autonomous_R0_closed_form(kw):
    p = make_params(**kw)
    expected = kw["beta"] * kw["S0"] * math.exp(-kw["gammaL"] * kw["tau"]) / kw["gamma"]
    assert compute_R0_eps(p) == pytest.approx(expected, rel=1e-8)


def test_R0_example_and_eps_sup_example():
    p = make_params(beta=2.0, gamma=1.0, gammaL=0.0)
    assert compute_R0_eps(p) == pytest.approx(2.0, abs=1e-8)
    assert epsilon_sup(p) == pytest.approx(0.5, abs=1e-7)


@pytest.mark.parametrize("kw", list(_draws(4, seed=3)))
def test_eps_sup_closed_form(kw):
    p = make_params(**kw)
    expected = kw["S0"] - kw["gamma"] * math.exp(kw["gammaL"] * kw["tau"]) / kw["beta"]
    if expected <= 0:
        pytest.skip("draw has R0 <= 1")
    assert epsilon_sup(p) == pytest.approx(expected, abs=1e-7)


def test_exponent_matches_characteristic_root():
    p = make_params(beta=2.0, gamma=1.0, gammaL=0.0, tau=0.5)
    assert floquet_exponent_linearized(p) == pytest.approx(characteristic_root(-1, 2, 0.5), abs=1e-7)


def test_balanced_gain_gives_zero_exponent_and_unit_R0():
    p = make_params(beta=2.0, gamma=1.0, gammaL=0.1)
    eps = 1.0 - math.exp(0.1) / 2.0          # e^{-0.1} 2 (1 - eps) = 1
    assert floquet_exponent_linearized(p, eps) == pytest.approx(0.0, abs=1e-9)
    assert compute_R0_eps(p, eps) == pytest.approx(1.0, abs=1e-8)


def test_pure_decay_limit():
    p = make_params(amplitude=0.3)
    lam = floquet_exponent_linearized(p, p.S0 * (1 - 1e-8))
    assert lam == pytest.approx(-1.0, abs=1e-6)


def test_R0_limits():
    p = make_params(amplitude=0.2)
    r0 = compute_R0_eps(p)
    assert abs(compute_R0_eps(p, 1e-8 * p.S0) - r0) < 1e-5
    assert compute_R0_eps(p, p.S0 * (1 - 1e-8)) < 1e-4


def test_R0_strictly_decreasing_in_eps():
    p = make_params(amplitude=0.2)
    r = [compute_R0_eps(p, e) for e in np.linspace(0, 0.95, 10)]
    assert np.all(np.diff(r) < 0)
    lam = [floquet_exponent_linearized(p, e) for e in np.linspace(0, 0.95, 10)]
    assert np.all(np.diff(lam) < 0)


def test_threshold_equivalence_on_random_draws():
    rng = np.random.default_rng(11)
    for _ in range(20):
        p = make_params(beta=rng.uniform(0.5, 3.0), gamma=rng.uniform(0.5, 1.5),
                        gammaL=rng.uniform(0, 0.3), amplitude=rng.uniform(0, 0.6),
                        tau=rng.choice([0.5, 1.0, 1.5]))
        rep = threshold_report(p, rng.uniform(0, 0.9))
        assert np.sign(rep.R0_eps - 1) == np.sign(rep.exponent)


def test_eps_sup_root_continuity():
    p = make_params(amplitude=0.2)
    es = epsilon_sup(p)
    assert compute_R0_eps(p, es * (1 - 1e-6)) == pytest.approx(1.0, abs=1e-5)


def test_eps_sup_preconditions():
    with pytest.raises(PreconditionError):
        epsilon_sup(make_params(beta=0.5))
    boundary = make_params(beta=math.exp(0.1))    # R0 = 1 exactly
    assert compute_R0_eps(boundary) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(PreconditionError):
        epsilon_sup(boundary)


def test_eps_out_of_range():
    with pytest.raises(ArgumentError):
        compute_R0_eps(make_params(), 1.0)
    with pytest.raises(ArgumentError):
        compute_R0_eps(make_params(), -0.1)
