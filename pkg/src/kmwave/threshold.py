"""Reproduction numbers of the linearised infection equation

    I'(t) = survival(t) beta(t - tau) (S0 - eps) I(t - tau) - gamma(t) I(t).

``R0^eps`` is the factor ``r`` by which the infection term must be divided for
the Poincare map of this equation to have spectral radius exactly one.  In the
autonomous case this gives ``beta (S0 - eps) exp(-gammaL tau) / gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .coefficients import ModelParams, survival
from .delay import DEFAULT_N_PER_DELAY, LinearDelayEq, floquet_exponent
from .errors import ArgumentError, BracketingError, PreconditionError


@dataclass(frozen=True)
class ThresholdReport:
    eps: float
    R0_eps: float
    exponent: float
    bracket: float


def map_period(p: ModelParams):
    """Period of the Poincare map used for ``p``.

    Any period is valid for time-independent coefficients; the delay is used
    then so that tiny delays do not force huge step counts.
    """
    return p.tau if p.autonomous else p.period


def linearized_equation(p: ModelParams, eps: float = 0.0) -> LinearDelayEq:
    if not 0.0 <= eps < p.S0:
        raise ArgumentError(f"eps must lie in [0, S0), got {eps}")
    gamma, beta, tau = p.gamma, p.beta, p.tau
    return LinearDelayEq(
        period=map_period(p), tau=tau,
        a=lambda t: -gamma(t),
        b=lambda t: survival(p, t) * beta(np.asarray(t) - tau) * (p.S0 - eps),
    )


def floquet_exponent_linearized(p: ModelParams, eps: float = 0.0, *,
                                n_per_delay=DEFAULT_N_PER_DELAY) -> float:
    """Floquet exponent of the eps-perturbed linearisation at ``(S0, 0)``."""
    return floquet_exponent(linearized_equation(p, eps), n_per_delay=n_per_delay)


def _r0_of_equation(eq: LinearDelayEq, n_per_delay, xtol=1e-13):
    """Root in ``log r`` of the exponent of ``eq`` with gain divided by ``r``."""

    def f(x):
        return floquet_exponent(eq.scaled(-x), n_per_delay=n_per_delay)

    lo, hi = math.log(1e-6), math.log(1e6)
    flo, fhi = f(lo), f(hi)
    for _ in range(60):
        if flo > 0 and fhi < 0:
            break
        if flo <= 0:
            lo, hi, fhi = lo - (hi - lo), lo, flo
            flo = f(lo)
        else:
            lo, hi, flo = hi, hi + (hi - lo), fhi
            fhi = f(hi)
    else:
        raise BracketingError("could not bracket the reproduction number")
    x = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return math.exp(x)


def compute_R0_eps(p: ModelParams, eps: float = 0.0, *, n_per_delay=DEFAULT_N_PER_DELAY) -> float:
    return _r0_of_equation(linearized_equation(p, eps), n_per_delay)


def threshold_report(p: ModelParams, eps: float = 0.0, *, n_per_delay=DEFAULT_N_PER_DELAY):
    r0 = compute_R0_eps(p, eps, n_per_delay=n_per_delay)
    lam = floquet_exponent_linearized(p, eps, n_per_delay=n_per_delay)
    return ThresholdReport(eps=eps, R0_eps=r0, exponent=lam, bracket=r0 * 1e-13)


def epsilon_sup(p: ModelParams, *, n_per_delay=DEFAULT_N_PER_DELAY, rel_tol=1e-10) -> float:
    """Supremum of the perturbations keeping ``R0^eps > 1``.

    Located as the zero of the Floquet exponent in ``eps`` (same sign as
    ``R0^eps - 1``), which is decreasing in ``eps``.
    """
    r0 = compute_R0_eps(p, 0.0, n_per_delay=n_per_delay)
    if r0 <= 1.0 + 1e-8:
        raise PreconditionError(f"R0 = {r0:.10g} is not above one")

    def f(e):
        return floquet_exponent_linearized(p, e, n_per_delay=n_per_delay)

    hi = p.S0 * (1.0 - 1e-12)
    if f(hi) >= 0:
        raise BracketingError("exponent stays nonnegative up to S0")
    return brentq(f, 0.0, hi, xtol=rel_tol * p.S0, rtol=4 * np.finfo(float).eps)
