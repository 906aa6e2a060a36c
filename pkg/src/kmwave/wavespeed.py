"""Dispersion relation, critical wave speed and the lower-solution construction.

With the ansatz ``psi(t, z) = exp(mu z) eta(t)`` the infection equation of the
travelling-wave system, linearised at ``(S0, 0)``, becomes the periodic delay
equation

    eta' = [d2 mu^2 - c mu - gamma(t)] eta
           + survival(t) exp(dL tau mu^2 - c mu tau) beta(t - tau) S0 eta(t - tau),

whose principal Floquet exponent is ``Lambda(c, mu)``.  The critical speed is
``c* = inf_{mu > 0} c(mu)`` with ``Lambda(c(mu), mu) = 0`` (linear determinacy;
this characterisation is an assumption of the toolkit).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .coefficients import ModelParams, ell_for_mass, survival
from .delay import (DEFAULT_N_PER_DELAY, Attractor, LinearDelayEq,
                    PeriodicEigenfunction, attractor_gain, exponent_bounds,
                    floquet_exponent,
                    periodic_attractor_u, periodic_eigenfunction)
from .errors import (ArgumentError, BracketingError, GadgetInfeasibleError,
                     InconsistentShiftError, PreconditionError)
from .threshold import (compute_R0_eps, epsilon_sup,
                        floquet_exponent_linearized, map_period)


# ---------------------------------------------------------------------------
# dispersion relation
# ---------------------------------------------------------------------------

def dispersion_equation(p: ModelParams, c, mu) -> LinearDelayEq:
    if c < 0 or mu < 0:
        raise ArgumentError("speed and decay rate must be nonnegative")
    gamma, beta, tau = p.gamma, p.beta, p.tau
    drift = p.d2 * mu * mu - c * mu
    return LinearDelayEq(
        period=map_period(p), tau=tau,
        a=lambda t: drift - gamma(t),
        b=lambda t: survival(p, t) * beta(np.asarray(t) - tau) * p.S0,
        log_scale=p.dL * tau * mu * mu - c * mu * tau,
    )


def dispersion_exponent(p: ModelParams, c, mu, *, n_per_delay=DEFAULT_N_PER_DELAY) -> float:
    """``Lambda(c, mu)``."""
    return floquet_exponent(dispersion_equation(p, c, mu), n_per_delay=n_per_delay)


@dataclass(frozen=True)
class DispersionPoint:
    c: float
    mu: float
    Lambda: float


def _mean_coefficients(p: ModelParams):
    T = p.period
    t = np.linspace(0.0, T, 256, endpoint=False)
    gain = float(np.mean(survival(p, t) * p.beta(t - p.tau))) * p.S0
    return float(np.mean(p.gamma(t))), gain


def _speed_guess(p: ModelParams, mu, gbar, gain):
    """Root in c of the mean-coefficient relation (bracketing aid only)."""

    def g(c):
        e = p.dL * p.tau * mu * mu - c * mu * p.tau
        if e > 700:
            return math.inf
        return p.d2 * mu * mu - c * mu - gbar + gain * math.exp(e)

    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            return None
    return brentq(g, 0.0, hi, xtol=1e-12) if g(0.0) > 0 else None


def speed_for_decay(p: ModelParams, mu, *, rtol=1e-9, n_per_delay=DEFAULT_N_PER_DELAY,
                    _means=None) -> float:
    """The unique ``c(mu) > 0`` with ``Lambda(c(mu), mu) = 0``."""
    if not mu > 0:
        raise ArgumentError("mu must be positive")

    def lam(c):
        return dispersion_exponent(p, c, mu, n_per_delay=n_per_delay)

    gbar, gain = _means or _mean_coefficients(p)
    guess = _speed_guess(p, mu, gbar, gain) or 1.0
    step = 0.01 * max(guess, 1.0 / mu)
    f0 = lam(guess)
    if f0 > 0:
        lo, hi = guess, guess + step
        for _ in range(80):
            if lam(hi) < 0:
                break
            lo, step = hi, 2.0 * step
            hi = lo + step
        else:
            raise BracketingError(f"could not bracket c(mu) at mu = {mu}")
    else:
        lo, hi = max(guess - step, 0.0), guess
        while lam(lo) <= 0:
            if lo == 0.0:
                raise PreconditionError(f"Lambda(0, {mu}) <= 0: no positive speed")
            hi, step = lo, 2.0 * step
            lo = max(lo - step, 0.0)
    return brentq(lam, lo, hi, xtol=rtol * 1e-3 * max(lo, 1e-12), rtol=rtol)


@dataclass(frozen=True)
class CriticalSpeed:
    c_star: float
    mu_star: float
    mus: np.ndarray = field(repr=False)
    cs: np.ndarray = field(repr=False)
    tolerance: float
    Lambda_at_star: float
    unimodal: bool = True

    def curve(self):
        return np.column_stack([self.mus, self.cs])


def _is_unimodal(cs):
    """Nonincreasing then nondecreasing."""
    d = np.sign(np.diff(cs))
    rising = np.flatnonzero(d > 0)
    return rising.size == 0 or not np.any(d[rising[0]:] < 0)


def critical_speed(p: ModelParams, *, mu_range=(1e-3, 1e2), n_grid=32, rtol=1e-7,
                   n_per_delay=DEFAULT_N_PER_DELAY, executor=None) -> CriticalSpeed:
    """``c* = min_mu c(mu)``: log-spaced scan refined by golden-section search."""
    r0 = compute_R0_eps(p, 0.0, n_per_delay=n_per_delay)
    if r0 <= 1.0:
        raise PreconditionError(f"R0 = {r0:.6g} <= 1: no travelling waves")
    means = _mean_coefficients(p)
    mus = np.geomspace(mu_range[0], mu_range[1], n_grid)

    def c_of(mu):
        return speed_for_decay(p, mu, rtol=min(1e-9, rtol), n_per_delay=n_per_delay, _means=means)

    mapper = executor.map if executor is not None else map
    cs = np.array(list(mapper(c_of, mus)))
    unimodal = _is_unimodal(cs)
    if not unimodal:
        warnings.warn("c(mu) is not unimodal on the scan grid; using a dense scan", RuntimeWarning)
        mus = np.geomspace(mu_range[0], mu_range[1], 8 * n_grid)
        cs = np.array(list(mapper(c_of, mus)))
    i = int(np.argmin(cs))
    i = min(max(i, 1), len(mus) - 2)
    x = np.log(mus)

    def obj(s):
        return c_of(math.exp(s))

    res = minimize_scalar(obj, bracket=(x[i - 1], x[i], x[i + 1]), method="golden",
                          tol=1e-6)
    mu_star = math.exp(res.x)
    c_star = float(res.fun)
    if c_star > cs.min():
        j = int(np.argmin(cs))
        mu_star, c_star = float(mus[j]), float(cs[j])
    lam = dispersion_exponent(p, c_star, mu_star, n_per_delay=n_per_delay)
    return CriticalSpeed(c_star=c_star, mu_star=mu_star, mus=mus, cs=cs,
                         tolerance=rtol, Lambda_at_star=lam, unimodal=unimodal)


def min_exponent_over_grid(p: ModelParams, c, mus, *, n_per_delay=DEFAULT_N_PER_DELAY):
    """``min Lambda(c, mu)`` over ``mus``.

    Far from the minimiser ``Lambda`` can be of order ``d2 mu^2`` and too stiff
    for the fixed-step integrator; such points are skipped once their
    comparison lower bound already exceeds the running minimum.
    """
    lower = [exponent_bounds(dispersion_equation(p, c, mu))[0] for mu in mus]
    best = math.inf
    for k in np.argsort(lower):
        if lower[k] >= best:
            break
        best = min(best, dispersion_exponent(p, c, mus[k], n_per_delay=n_per_delay))
    return best


# ---------------------------------------------------------------------------
# lower-solution gadgets
# ---------------------------------------------------------------------------

def wave_multiplier(lambda_c, c_mu_c):
    """Smallest positive integer ``m`` with ``m * lambda_c > c_mu_c``."""
    if not lambda_c > 0:
        raise GadgetInfeasibleError(
            f"lambda_c = {lambda_c:.6g} <= 0: the truncation loss or eps* must shrink")
    m = max(1, math.floor(c_mu_c / lambda_c))
    while m * lambda_c <= c_mu_c:
        m += 1
    while m > 1 and (m - 1) * lambda_c > c_mu_c:
        m -= 1
    return m


def growth_equation(p: ModelParams, c, eps_star, varrho, variant="squared") -> LinearDelayEq:
    """Truncated linear growth equation at decay rate ``mu_c = c / (2 d2)``.

    ``variant="literal"`` uses ``d2 mu_c`` instead of ``d2 mu_c**2`` in the
    instantaneous coefficient.
    """
    if variant not in ("squared", "literal"):
        raise ArgumentError(f"unknown variant {variant!r}")
    mu_c = c / (2.0 * p.d2)
    inst = p.d2 * mu_c * mu_c if variant == "squared" else p.d2 * mu_c
    gamma, beta, tau = p.gamma, p.beta, p.tau
    return LinearDelayEq(
        period=p.period, tau=tau,
        a=lambda t: inst - gamma(t),
        b=lambda t: survival(p, t) * beta(np.asarray(t) - tau) * (p.S0 - eps_star) * (1.0 - varrho),
    )


@dataclass(frozen=True)
class ProofGadget:
    params: ModelParams = field(repr=False)
    c: float
    c_star: float
    eps_sup: float
    eps_star: float
    varrho: float
    A: float
    ell: float
    r: float
    l: float
    mu_c: float
    lambda_c: float
    m: int
    rho_exp: float
    varsigma: float
    max_u: float
    attractor: Attractor = field(repr=False)
    K: PeriodicEigenfunction = field(repr=False)
    variant: str = "squared"

    def invariants(self):
        d2 = self.params.d2
        return {
            "growth_beats_drift": self.c * self.mu_c < self.m * self.lambda_c,
            "m_is_minimal": (self.m - 1) * self.lambda_c <= self.c * self.mu_c,
            "interval_long_enough": d2 * math.pi ** 2 / self.l ** 2 < self.m * self.lambda_c - self.rho_exp,
            "l_exceeds_ell_squared": self.l > self.ell ** 2,
            "attractor_below_bound": self.max_u < self.A - 1.0,
            "rho_in_window": self.c * self.mu_c < self.rho_exp < self.m * self.lambda_c,
        }

    @property
    def factor(self):
        """``d2 pi^2 / l^2 + rho - m lambda_c``; negative when the gadget works."""
        return self.params.d2 * math.pi ** 2 / self.l ** 2 + self.rho_exp - self.m * self.lambda_c

    def to_dict(self):
        keys = ("c", "c_star", "eps_sup", "eps_star", "varrho", "A", "ell", "r", "l", "mu_c",
                "lambda_c", "m", "rho_exp", "varsigma", "max_u", "variant")
        out = {k: getattr(self, k) for k in keys}
        out["factor"] = self.factor
        out["K_residual"] = self.K.residual
        out["invariants"] = self.invariants()
        return out


def _choose_eps_star(p, eps_sup, A, enforce, n_per_delay, max_halvings=40):
    """eps* in (0, eps_sup) with R0^eps* > 1 and max u < A - 1.

    u shrinks to zero as eps* approaches eps_sup, so the gap to eps_sup is
    halved until the bound holds.
    """
    gap = 0.5 * eps_sup
    for _ in range(max_halvings):
        eps = eps_sup - gap
        if floquet_exponent_linearized(p, eps, n_per_delay=n_per_delay) > 0:
            u = periodic_attractor_u(p, eps, A, n_per_delay=n_per_delay, check_threshold=False)
            if u.below_bound or not enforce:
                return eps, u
        gap *= 0.5
    raise GadgetInfeasibleError("no eps* keeps the periodic attractor below A - 1")


def proof_gadgets(p: ModelParams, c, varrho=0.05, *, c_star=None, variant="squared",
                  enforce_attractor_bound=True, refinements=3,
                  n_per_delay=DEFAULT_N_PER_DELAY) -> ProofGadget:
    """Assemble the quantities of the lower-solution argument at speed ``c``.

    The truncation loss ``varrho`` is halved up to ``refinements`` times while
    ``lambda_c <= c mu_c``.  When that never clears, ``m > 1`` is needed and the
    periodic factor K must solve a shifted equation at ``m lambda_c``; such K
    exists only if that shift is a Floquet exponent, which is checked rather
    than assumed.
    """
    if c_star is None:
        c_star = critical_speed(p, n_per_delay=n_per_delay).c_star
    if not 0 < c < c_star:
        raise PreconditionError(f"speed {c} must lie in (0, c* = {c_star})")
    if not 0 < varrho < 1:
        raise ArgumentError("varrho must lie in (0, 1)")
    eps_sup = epsilon_sup(p, n_per_delay=n_per_delay)
    mu_c = c / (2.0 * p.d2)
    attempts = []
    for k in range(refinements + 1):
        vr = varrho * 0.5 ** k
        A = 1.0 / (1.0 - vr)
        eps_star, u = _choose_eps_star(p, eps_sup, A, enforce_attractor_bound, n_per_delay)
        lam_c = floquet_exponent(growth_equation(p, c, eps_star, vr, variant),
                                 n_per_delay=n_per_delay)
        attempts.append({"varrho": vr, "eps_star": eps_star, "max_u": u.max_u,
                         "lambda_c": lam_c, "c_mu_c": c * mu_c})
        if lam_c > c * mu_c:
            break
    report = {"c": c, "c_star": c_star, "eps_sup": eps_sup, "mu_c": mu_c, "attempts": attempts}
    m = wave_multiplier(lam_c, c * mu_c)
    report["m"] = m
    rho_exp = 0.5 * (c * mu_c + m * lam_c)
    ell = ell_for_mass(p.dL, p.tau, 1.0 - vr)
    l = max(ell ** 2 + 1.0, math.pi * math.sqrt(p.d2 / (m * lam_c - rho_exp)) + 1.0)
    r = 10.0 * ell
    try:
        K = periodic_eigenfunction(growth_equation(p, c, eps_star, vr, variant), m * lam_c, m,
                                   n_per_delay=n_per_delay)
    except InconsistentShiftError as exc:
        raise GadgetInfeasibleError(
            f"lambda_c = {lam_c:.6g} <= c mu_c = {c * mu_c:.6g} for every tested varrho; "
            f"with m = {m} no positive periodic K exists ({exc})", report) from exc
    # W >= u on the initial strip, so any varsigma with varsigma * w <= min u works.
    s = np.linspace(-p.tau, 0.0, 65)
    z = np.linspace(-r - l, -r, 257)
    w0 = _w(s[:, None], z[None, :], K, rho_exp, mu_c, c, r, l)
    varsigma = float(np.min(u(s)) / np.max(w0))
    return ProofGadget(params=p, c=c, c_star=c_star, eps_sup=eps_sup, eps_star=eps_star,
                       varrho=vr, A=A, ell=ell, r=r, l=l, mu_c=mu_c, lambda_c=lam_c, m=m,
                       rho_exp=rho_exp, varsigma=varsigma, max_u=u.max_u, attractor=u, K=K,
                       variant=variant)


def _omega(z, r, l):
    return np.sin(-np.pi * (z + r) / l)


def _w(t, z, K, rho, mu_c, c, r, l):
    return np.exp(rho * t + mu_c * (z - c * t)) * K(t) * _omega(z, r, l)


@dataclass(frozen=True)
class SubsolutionReport:
    max_residual: float
    max_ratio: float
    factor: float
    majorant_error: float
    exact_error: float
    grid: tuple
    residual: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)


def subsolution_residual(g: ProofGadget, grid=(64, 64), *, require_attractor_bound=True):
    """Apply the truncated linear operator

        U_t - d2 U_zz + c U_z - gain_eps(t) (1 - varrho) U(t - tau, z) + gamma U

    to ``w = exp(rho t + mu_c (z - c t)) K(t) omega(z)`` on a uniform grid of
    ``[0, m T] x [-r - l, -r]`` using centred differences.

    ``majorant_error`` compares, after replacing the delayed growth factor
    ``exp(-(rho - c mu_c) tau)`` by the smaller ``exp(-m lambda_c tau)``, with
    the closed form ``factor * w``; ``exact_error`` compares the unmodified
    operator with its own closed form.  Both are O(h^2).  Errors are scaled by
    ``max w``.
    """
    inv = g.invariants()
    needed = [k for k in inv if k != "attractor_below_bound" or require_attractor_bound]
    bad = [k for k in needed if not inv[k]]
    if bad:
        raise PreconditionError(f"gadget invariants violated: {bad}")
    p = g.params
    n_t, n_z = grid
    T_m = g.m * p.period
    t = np.linspace(0.0, T_m, n_t + 1)[:, None]
    z = np.linspace(-g.r - g.l, -g.r, n_z + 1)[None, :]
    ht, hz = T_m / n_t, g.l / n_z
    args = (g.K, g.rho_exp, g.mu_c, g.c, g.r, g.l)
    w = _w(t, z, *args)
    wt = (_w(t + ht, z, *args) - _w(t - ht, z, *args)) / (2 * ht)
    wzp, wzm = _w(t, z + hz, *args), _w(t, z - hz, *args)
    wz = (wzp - wzm) / (2 * hz)
    wzz = (wzp - 2 * w + wzm) / hz ** 2
    gain = (survival(p, t) * p.beta(t - p.tau) * (p.S0 - g.eps_star) * (1.0 - g.varrho))
    w_del = _w(t - p.tau, z, *args)
    lin = wt - p.d2 * wzz + g.c * wz + p.gamma(t) * w
    L = lin - gain * w_del
    # w(t - tau, z) = exp(-(rho - c mu_c) tau) * [envelope at t] * K(t - tau) omega(z)
    wtilde = w_del * math.exp((g.rho_exp - g.c * g.mu_c) * p.tau)
    M = lin - gain * wtilde * math.exp(-g.m * g.lambda_c * p.tau)
    exact = g.factor * w - gain * wtilde * (math.exp(-(g.rho_exp - g.c * g.mu_c) * p.tau)
                                            - math.exp(-g.m * g.lambda_c * p.tau))
    scale = float(np.max(np.abs(w)))
    interior = np.abs(_omega(z, g.r, g.l)) > 1e-3 * np.ones_like(t)
    ratio = np.where(interior, L / np.where(interior, w, 1.0), -np.inf)
    return SubsolutionReport(
        max_residual=float(np.max(L)),
        max_ratio=float(np.max(ratio)),
        factor=g.factor,
        majorant_error=float(np.max(np.abs(M - g.factor * w)) / scale),
        exact_error=float(np.max(np.abs(L - exact)) / scale),
        grid=(n_t, n_z), residual=L, w=w,
    )


@dataclass(frozen=True)
class AttractorResidual:
    residual: float
    degenerate: bool


def attractor_residual(p: ModelParams, u, eps_star, n=512) -> AttractorResidual:
    """Sup-norm residual of ``u' = gain u(t - tau) / (1 + u(t - tau)) - gamma u``.

    ``u`` is a constant, an :class:`Attractor` or any periodic callable with a
    ``derivative`` method.
    """
    t = np.linspace(0.0, p.period, n, endpoint=False)
    if np.isscalar(u):
        val, dval, vdel = np.full(n, float(u)), np.zeros(n), np.full(n, float(u))
    else:
        fn = u.fn if isinstance(u, Attractor) else u
        val, dval, vdel = fn(t), fn.derivative(t), fn(t - p.tau)
    res = dval - attractor_gain(p, eps_star, t) * vdel / (1.0 + vdel) + p.gamma(t) * val
    return AttractorResidual(residual=float(np.max(np.abs(res))),
                             degenerate=bool(np.max(np.abs(val)) == 0.0))
