import dataclasses
import math

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar

from conftest import make_params
from kmwave.delay import periodic_attractor_u
from kmwave.errors import ArgumentError, GadgetInfeasibleError, PreconditionError
from kmwave.threshold import floquet_exponent_linearized
from kmwave.wavespeed import (attractor_residual, critical_speed, dispersion_exponent,
                              min_exponent_over_grid, proof_gadgets, speed_for_decay,
                              subsolution_residual, wave_multiplier)


def characteristic_root(a, b, tau):
    f = lambda s: s - a - b * math.exp(-s * tau)
    lo, hi = a - 1.0, max(a + b, 0.0) + 1.0
    while f(lo) > 0:
        lo -= 2 * (hi - lo)
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)


def oracle_c_star(beta, gamma, gammaL, tau, S0=1.0, d2=1.0, dL=1.0):
    """Explicit transcendental relation: c(mu) solves
    d2 mu^2 - c mu - gamma + beta S0 exp(-gammaL tau + dL tau mu^2 - c mu tau) = 0."""

    def c_of(mu):
        g = lambda c: (d2 * mu * mu - c * mu - gamma
                       + beta * S0 * math.exp(-gammaL * tau + dL * tau * mu * mu - c * mu * tau))
        hi = 1.0
        while g(hi) > 0:
            hi *= 2
        return brentq(g, 0.0, hi, xtol=1e-14, rtol=1e-15)

    mus = np.geomspace(1e-2, 10, 400)                 # brute-force scan ...
    k = int(np.argmin([c_of(m) for m in mus]))
    res = minimize_scalar(c_of, bounds=(mus[k - 1], mus[k + 1]), method="bounded",
                          options={"xatol": 1e-12})   # ... then refinement
    return res.fun, res.x


@pytest.fixture(scope="module")
def autonomous():
    p = make_params()
    return p, critical_speed(p)


@pytest.fixture(scope="module")
def periodic():
    p = make_params(amplitude=0.2, tau=0.5)
    return p, critical_speed(p)


# -- dispersion --------------------------------------------------------------

@pytest.mark.parametrize("c,mu", [(0.5, 0.3), (1.0, 0.6), (2.0, 1.5), (0.0, 2.0)])
def test_dispersion_matches_characteristic_oracle(c, mu):
    p = make_params()
    a = mu * mu - c * mu - 1.0
    b = 2.0 * math.exp(-0.1 + mu * mu - c * mu)
    assert dispersion_exponent(p, c, mu) == pytest.approx(characteristic_root(a, b, 1.0), abs=1e-7)


def test_dispersion_decreasing_in_c():
    p = make_params(amplitude=0.2, tau=0.5)
    rng = np.random.default_rng(5)
    for mu in rng.uniform(0.1, 2.0, 10):
        cs = np.sort(rng.uniform(0.0, 3.0, 6))
        lam = [dispersion_exponent(p, c, mu) for c in cs]
        assert np.all(np.diff(lam) < 0)


def test_dispersion_reduces_to_kinetic_linearisation():
    p = make_params(amplitude=0.3, tau=0.5)
    assert dispersion_exponent(p, 0.0, 0.0) == pytest.approx(floquet_exponent_linearized(p), abs=1e-12)


def test_dispersion_rejects_negative_arguments():
    with pytest.raises(ArgumentError):
        dispersion_exponent(make_params(), -1.0, 0.5)


# -- critical speed ------------------------------------------------------------

def test_critical_speed_matches_bruteforce_oracle(autonomous):
    _, cs = autonomous
    c_ref, mu_ref = oracle_c_star(2.0, 1.0, 0.1, 1.0)
    assert cs.c_star == pytest.approx(c_ref, abs=1e-6)
    assert cs.mu_star == pytest.approx(mu_ref, rel=1e-2)


def test_critical_speed_invariants(periodic):
    p, cs = periodic
    assert abs(cs.Lambda_at_star) < 1e-7
    assert cs.unimodal
    assert min_exponent_over_grid(p, cs.c_star * (1 - 1e-3), cs.mus) > 0
    for mu, c in list(zip(cs.mus, cs.cs))[::8]:
        assert abs(dispersion_exponent(p, c, mu)) < 1e-7


def test_seasonal_neutrality_band(periodic):
    # Mean-coefficient oracle; 25% band (sanity check, not a theorem).
    p, cs = periodic
    c_mean, _ = oracle_c_star(2.0, 1.0, 0.1, 0.5)
    assert abs(cs.c_star - c_mean) < 0.25 * c_mean


def test_minimality_sign_structure(periodic):
    p, cs = periodic
    assert min_exponent_over_grid(p, 0.9 * cs.c_star, cs.mus) > 0
    assert min_exponent_over_grid(p, 1.1 * cs.c_star, np.append(cs.mus, cs.mu_star)) < 0


def test_speed_for_decay_root():
    p = make_params(amplitude=0.2)
    c = speed_for_decay(p, 0.7)
    assert abs(dispersion_exponent(p, c, 0.7)) < 1e-7


def test_critical_speed_requires_R0_above_one():
    with pytest.raises(PreconditionError):
        critical_speed(make_params(beta=0.8))


# -- gadgets -------------------------------------------------------------------

@pytest.mark.parametrize("lam,cmu,m", [(1.0, 0.3, 1), (0.4, 1.0, 3), (0.5, 1.0, 3), (2.0, 1.9, 1)])
def test_wave_multiplier(lam, cmu, m):
    assert wave_multiplier(lam, cmu) == m
    assert m * lam > cmu and (m - 1) * lam <= cmu


def test_wave_multiplier_needs_growth():
    with pytest.raises(GadgetInfeasibleError):
        wave_multiplier(-0.1, 0.2)


def test_gadget_rejects_supercritical_speed(autonomous):
    p, cs = autonomous
    with pytest.raises(PreconditionError):
        proof_gadgets(p, 1.01 * cs.c_star, c_star=cs.c_star)


def test_gadget_assembles_at_half_critical_speed(autonomous):
    # Stated example: with constant coefficients the full gadget assembles at
    # c = c*/2 with all invariants.  Infeasible here (see the ledger): keeping
    # max u below A - 1 forces eps* close to eps_sup, where lambda_c < c mu_c.
    p, cs = autonomous
    g = proof_gadgets(p, 0.5 * cs.c_star, c_star=cs.c_star)
    assert all(g.invariants().values())


def test_gadget_infeasibility_is_reported(autonomous):
    p, cs = autonomous
    with pytest.raises(GadgetInfeasibleError) as info:
        proof_gadgets(p, 0.5 * cs.c_star, c_star=cs.c_star, refinements=1)
    report = info.value.report
    assert report["m"] > 1
    assert all(a["lambda_c"] <= a["c_mu_c"] for a in report["attempts"])


@pytest.fixture(scope="module")
def diagnostic_gadget(autonomous):
    p, cs = autonomous
    return proof_gadgets(p, 0.5 * cs.c_star, c_star=cs.c_star, enforce_attractor_bound=False)


def test_diagnostic_gadget_arithmetic(diagnostic_gadget):
    g = diagnostic_gadget
    inv = g.invariants()
    assert g.m == 1
    assert all(v for k, v in inv.items() if k != "attractor_below_bound")
    assert g.c * g.mu_c < g.m * g.lambda_c and (g.m - 1) * g.lambda_c <= g.c * g.mu_c
    assert g.factor < 0 and g.varsigma > 0
    assert g.K.residual < 1e-6


def test_subsolution_residual_and_second_order_match(diagnostic_gadget):
    g = diagnostic_gadget
    with pytest.raises(PreconditionError):
        subsolution_residual(g)                    # attractor bound not met
    reps = [subsolution_residual(g, (n, n), require_attractor_bound=False) for n in (32, 64, 128)]
    for r in reps:
        assert r.max_residual <= 1e-6
    # On the boundary omega = 0 and the exact residual vanishes (c = 2 d2 mu_c
    # cancels the first-derivative terms); the difference quotients leave O(h^2).
    edge = [np.max(np.abs(r.residual[:, [0, -1]])) for r in reps]
    orders = [math.log2(a.majorant_error / b.majorant_error) for a, b in zip(reps, reps[1:])]
    orders += [math.log2(a / b) for a, b in zip(edge, edge[1:])]
    assert min(orders) >= 1.9


def test_doubling_l_shifts_the_factor(diagnostic_gadget):
    g = diagnostic_gadget
    g2 = dataclasses.replace(g, l=2 * g.l)
    d2 = g.params.d2
    assert g.factor - g2.factor == pytest.approx(d2 * math.pi ** 2 * (1 / g.l ** 2 - 1 / (2 * g.l) ** 2),
                                                 rel=1e-12)


# -- attractor residual --------------------------------------------------------

def test_attractor_residual_constant_and_degenerate():
    p = make_params()
    u_star = math.exp(-0.1) * 2 * (1 - 0.2) - 1.0
    assert attractor_residual(p, u_star, 0.2).residual < 1e-14
    zero = attractor_residual(p, 0.0, 0.2)
    assert zero.residual == 0.0 and zero.degenerate


def test_attractor_residual_on_periodic_attractor():
    p = make_params(amplitude=0.3)
    u = periodic_attractor_u(p, 0.1)
    r = attractor_residual(p, u, 0.1)
    assert r.residual < 1e-6 and not r.degenerate
    t = np.linspace(0, 1, 50)
    np.testing.assert_allclose(u(t + 1.0), u(t), atol=1e-8)
