"""Delay differential equations with periodic coefficients.

All integrations use the method of steps with the classical fourth-order
Runge-Kutta scheme on a uniform grid whose spacing divides the delay.  Delayed
values at grid nodes are read directly; the half-step lookups needed by the
middle stages come from four-point cubic interpolation of the stored solution.

Floquet quantities of scalar linear equations

    eta'(t) = a(t) eta(t) + b(t) eta(t - tau),   b > 0,

are obtained from the discrete Poincare (monodromy) matrix acting on history
segments, by power iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import logsumexp, wrightomega

from .coefficients import ModelParams, PeriodicFn, survival
from .errors import (ArgumentError, ConvergenceError, DivergenceError,
                     InconsistentShiftError, PositivityError, PreconditionError)

DEFAULT_N_PER_DELAY = 64
MIN_NODES = 33


# ---------------------------------------------------------------------------
# history segments and the stepping kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HistorySegment:
    """Uniform samples of a state on ``[t_end - tau, t_end]``.

    ``values`` has shape ``(n_nodes,)`` for scalar states or ``(n_nodes, dim)``.
    ``extra`` optionally holds the node just before the segment so that
    continued integration keeps the centred interpolation stencil.

    ``kink`` is the time of a derivative discontinuity of the stored state.
    A prescribed history joined to the solution generally has one at
    ``t_end``, which is the default for segments without ``extra``.
    ``-inf`` means none.  Delayed lookups never interpolate across it.
    """

    tau: float
    values: np.ndarray
    t_end: float = 0.0
    extra: np.ndarray | None = None
    kink: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.shape[0] < 5:
            raise ArgumentError("history segment needs at least 5 nodes")
        if not self.tau > 0:
            raise ArgumentError("delay must be positive")
        if self.kink is None:
            object.__setattr__(self, "kink", self.t_end if self.extra is None else -math.inf)

    @classmethod
    def constant(cls, tau, value, n_nodes=DEFAULT_N_PER_DELAY + 1, t_end=0.0):
        value = np.asarray(value, dtype=float)
        return cls(tau, np.broadcast_to(value, (n_nodes,) + value.shape).copy(), t_end)

    @classmethod
    def from_function(cls, tau, fn, n_nodes=DEFAULT_N_PER_DELAY + 1, t_end=0.0):
        t = np.linspace(t_end - tau, t_end, n_nodes)
        return cls(tau, np.array([np.asarray(fn(s), dtype=float) for s in t]), t_end)

    @property
    def n_nodes(self):
        return self.values.shape[0]

    @property
    def h(self):
        return self.tau / (self.n_nodes - 1)

    @property
    def times(self):
        return np.linspace(self.t_end - self.tau, self.t_end, self.n_nodes)

    def __call__(self, t):
        """Dense output (not-a-knot cubic spline through the nodes)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_end - self.tau - 1e-12 * self.tau) or np.any(t > self.t_end + 1e-12 * self.tau):
            raise ArgumentError("evaluation outside the history interval")
        return CubicSpline(self.times, self.values, axis=0)(t)

    def _rows(self):
        if self.extra is None:
            return self.values
        return np.concatenate([np.asarray(self.extra)[None], self.values])

    def _kink_row(self):
        """Index of ``kink`` in :meth:`_rows`, or None."""
        rows = self.n_nodes + (self.extra is not None)
        k = (self.t_end - self.kink) / self.h
        if not math.isfinite(k) or k > rows - 1 + 1e-9:
            return None
        return rows - 1 - int(round(k))


def _steps(duration, h):
    n = duration / h
    k = int(round(n))
    if k < 1 or abs(n - k) > 1e-9 * max(1.0, n):
        raise ArgumentError(f"duration {duration} is not a positive multiple of the step {h}")
    return k


def _half_value(buf, d, kink):
    """Delayed state at the midpoint of nodes ``d`` and ``d + 1``.

    Four-point cubic interpolation: centred where possible, one-sided at the
    start of the buffer or when the centred stencil would straddle the kink
    at row ``kink``.
    """
    k = None if kink is None else kink - d
    if k == 1:                      # kink at the right node: stay on the left
        if d >= 2:
            return (buf[d - 2] - 5.0 * buf[d - 1] + 15.0 * buf[d] + 5.0 * buf[d + 1]) * 0.0625
        if d >= 1:
            return (-buf[d - 1] + 6.0 * buf[d] + 3.0 * buf[d + 1]) * 0.125
        return 0.5 * (buf[d] + buf[d + 1])
    if d >= 1 and k != 0:
        return (9.0 * (buf[d] + buf[d + 1]) - buf[d - 1] - buf[d + 2]) * 0.0625
    return (5.0 * buf[d] + 15.0 * buf[d + 1] - 5.0 * buf[d + 2] + buf[d + 3]) * 0.0625


def _integrate(rhs, rows, n_delay, n_steps, h, t0, kink=None):
    """Fill ``n_steps`` new rows after ``rows`` (history, oldest first).

    ``rhs(j, t, y, y_delayed)`` receives the half-step index ``j`` counted
    from ``t0`` so that callers may use precomputed coefficient tables.
    ``kink`` is the row index of a derivative discontinuity (see
    :func:`_half_value`).
    """
    H = rows.shape[0]
    buf = np.empty((H + n_steps,) + rows.shape[1:])
    buf[:H] = rows
    first = H - 1 - n_delay
    half = 0.5 * h
    for i in range(n_steps):
        c = H - 1 + i
        d = first + i
        y = buf[c]
        y0 = buf[d]
        y1 = buf[d + 1]
        ym = _half_value(buf, d, kink)
        t = t0 + i * h
        j = 2 * i
        k1 = rhs(j, t, y, y0)
        k2 = rhs(j + 1, t + half, y + half * k1, ym)
        k3 = rhs(j + 1, t + half, y + half * k2, ym)
        k4 = rhs(j + 2, t + h, y + h * k3, y1)
        buf[c + 1] = y + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        if (i & 63) == 63 and not np.all(np.isfinite(buf[c + 1])):
            raise DivergenceError(f"solution blew up near t = {t + h}")
    if not np.all(np.isfinite(buf[-1])):
        raise DivergenceError("solution blew up")
    return buf


def integrate(rhs: Callable, seg: HistorySegment, duration: float):
    """Solve ``y' = rhs(t, y(t), y(t - tau))`` from history ``seg``.

    Returns ``(times, values)`` for the nodes of ``[t_end, t_end + duration]``.
    """
    h = seg.h
    n_delay = seg.n_nodes - 1
    n = _steps(duration, h)
    rows = seg._rows()
    buf = _integrate(lambda j, t, y, yd: rhs(t, y, yd), rows, n_delay, n, h, seg.t_end,
                     seg._kink_row())
    out = buf[rows.shape[0] - 1:]
    return seg.t_end + h * np.arange(n + 1), out


def advance(rhs: Callable, seg: HistorySegment, duration: float) -> HistorySegment:
    """History segment at ``seg.t_end + duration``."""
    h = seg.h
    n_delay = seg.n_nodes - 1
    n = _steps(duration, h)
    rows = seg._rows()
    buf = _integrate(lambda j, t, y, yd: rhs(t, y, yd), rows, n_delay, n, h, seg.t_end,
                     seg._kink_row())
    return HistorySegment(seg.tau, buf[-(n_delay + 1):], seg.t_end + n * h,
                          extra=buf[-(n_delay + 2)], kink=seg.kink)


def commensurate_grid(tau, period, n_per_delay=DEFAULT_N_PER_DELAY):
    """Step ``h`` dividing both ``tau`` and ``period`` with ``tau / h >= n_per_delay``.

    Returns ``(h, steps_per_delay, steps_per_period)``.  ``tau / period`` must
    be a rational number with a modest denominator.
    """
    ratio = Fraction(tau / period).limit_denominator(1000)
    if ratio == 0 or abs(float(ratio) - tau / period) > 1e-12 * (tau / period):
        raise ArgumentError(f"tau/period = {tau / period!r} is not a simple rational number")
    p, q = ratio.numerator, ratio.denominator
    j = max(1, math.ceil(max(n_per_delay, MIN_NODES - 1) / p))
    return tau / (p * j), p * j, q * j


# ---------------------------------------------------------------------------
# linear equations, Poincare maps and Floquet exponents
# ---------------------------------------------------------------------------

def _const(value):
    return lambda t: np.full(np.shape(t), float(value)) if np.ndim(t) else float(value)


@dataclass(frozen=True)
class LinearDelayEq:
    """``eta' = (a(t) + offset) eta + b(t) exp(log_scale) eta(t - tau)``.

    ``a`` and ``b`` are vectorised callables with common period ``period``.
    ``offset`` and ``log_scale`` carry exponential shifts and scalings without
    rebuilding the coefficient functions.
    """

    period: float
    tau: float
    a: Callable
    b: Callable
    offset: float = 0.0
    log_scale: float = 0.0

    @classmethod
    def constant(cls, a, b, tau, period=None):
        return cls(period=tau if period is None else period, tau=tau, a=_const(a), b=_const(b))

    def a_eff(self, t):
        return self.a(t) + self.offset

    def b_eff(self, t):
        b = np.asarray(self.b(t), dtype=float)
        with np.errstate(divide="ignore"):
            return np.exp(np.log(b) + self.log_scale)

    def shifted(self, s):
        """Equation satisfied by ``eta(t) exp(-s t)``."""
        return replace(self, offset=self.offset - s, log_scale=self.log_scale - s * self.tau)

    def scaled(self, factor_log):
        """Delayed coefficient multiplied by ``exp(factor_log)``."""
        return replace(self, log_scale=self.log_scale + factor_log)


@dataclass(frozen=True)
class FloquetResult:
    rho: float
    exponent: float
    period: float
    times: np.ndarray = field(repr=False)
    eigenfunction: np.ndarray = field(repr=False)
    iterations: int
    residual: float

    @property
    def log_rho(self):
        return self.exponent * self.period


def _tables(eq: LinearDelayEq, h, n_steps, t0=0.0):
    th = t0 + 0.5 * h * np.arange(2 * n_steps + 1)
    return np.asarray(eq.a_eff(th), dtype=float), np.asarray(eq.b_eff(th), dtype=float)


def _log_b(eq: LinearDelayEq, t):
    b = np.asarray(eq.b(t), dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(b) + eq.log_scale


def principal_root(a, log_b, tau):
    """Real principal root of ``s = a + exp(log_b) exp(-s tau)``, overflow-free."""
    return a + float(np.real(wrightomega(log_b + math.log(tau) - a * tau))) / tau


def exponent_bounds(eq: LinearDelayEq, n_samples=1024):
    """Comparison bounds on the Floquet exponent of ``eq`` (``b > 0``).

    The solution map is order preserving, so replacing ``a`` and ``b`` by their
    (sampled) minima or maxima gives autonomous equations whose exponents
    enclose the periodic one.
    """
    t = np.linspace(0.0, eq.period, n_samples, endpoint=False)
    A = np.asarray(eq.a_eff(t), dtype=float) * np.ones(n_samples)
    LB = _log_b(eq, t) * np.ones(n_samples)
    return (principal_root(float(A.min()), float(LB.min()), eq.tau),
            principal_root(float(A.max()), float(LB.max()), eq.tau))


def _stabilising_shift(eq: LinearDelayEq, h, n_steps, span):
    """Coarse estimate of the Floquet exponent.

    The principal root of ``s = mean(a) + mean(b) exp(-s tau)`` rounded to a
    lattice of spacing ``1 / (8 span)``.  Shifting by it keeps the monodromy
    spectrum near the unit circle (no overflow or stiffness at extreme
    parameters) while the integrator still resolves the remaining exponent.
    """
    th = 0.5 * h * np.arange(2 * n_steps)
    abar = float(np.mean(eq.a_eff(th)))
    LB = _log_b(eq, th) * np.ones(th.size)
    if np.all(np.isfinite(LB)):
        est = principal_root(abar, float(logsumexp(LB) - math.log(LB.size)), eq.tau)
    else:
        est = abar
    q = 1.0 / (8.0 * span)
    return q * round(est / q)


def monodromy(eq: LinearDelayEq, duration, n_per_delay=DEFAULT_N_PER_DELAY):
    """Matrix of the time-``duration`` solution map on history nodes."""
    h, n_delay, _ = commensurate_grid(eq.tau, eq.period, n_per_delay)
    n = _steps(duration, h)
    A, B = _tables(eq, h, n)

    def rhs(j, t, y, yd):
        return A[j] * y + B[j] * yd

    rows = np.eye(n_delay + 1)
    buf = _integrate(rhs, rows, n_delay, n, h, 0.0)
    return buf[-(n_delay + 1):], h


def _power_iteration(M, tol, max_iter):
    v = np.ones(M.shape[0])
    rho_old = np.inf
    for it in range(1, max_iter + 1):
        w = M @ v
        rho = float(np.max(np.abs(w)))
        if not (rho > 0 and math.isfinite(rho)):
            raise ConvergenceError("power iteration collapsed")
        v = w / rho
        if abs(rho - rho_old) <= tol * rho:
            return rho, v, it
        rho_old = rho
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def _check_positive_b(eq, h, n_steps):
    _, B = _tables(eq, h, n_steps)
    if not np.all(B > 0):
        raise ArgumentError("delayed coefficient must be strictly positive")


def poincare_spectral_radius(eq: LinearDelayEq, period_multiple: int = 1, *,
                             n_per_delay=DEFAULT_N_PER_DELAY, tol=1e-12,
                             max_iter=10000, check_positivity=True) -> FloquetResult:
    """Principal Floquet multiplier of ``eq`` over ``period_multiple`` periods."""
    if int(period_multiple) != period_multiple or period_multiple < 1:
        raise ArgumentError("period_multiple must be a positive integer")
    P = period_multiple * eq.period
    h, n_delay, n_period = commensurate_grid(eq.tau, eq.period, n_per_delay)
    n = n_period * period_multiple
    if check_positivity:
        _check_positive_b(eq, h, n_period)
    s0 = _stabilising_shift(eq, h, n_period, P)
    sh = eq.shifted(s0)
    M, _ = monodromy(sh, P, n_per_delay)
    rho_s, v, iters = _power_iteration(M, tol, max_iter)
    residual = float(np.max(np.abs(M @ v - rho_s * v)) / np.max(np.abs(v)))
    lam_s = math.log(rho_s) / P
    exponent = s0 + lam_s

    # Extend the eigenvector over one map period; the growth-free part is periodic.
    A, B = _tables(sh, h, n)
    buf = _integrate(lambda j, t, y, yd: A[j] * y + B[j] * yd, v, n_delay, n, h, 0.0)
    times = h * np.arange(n + 1)
    eig = buf[n_delay:] * np.exp(-lam_s * times)
    eig = eig / np.max(np.abs(eig))
    if check_positivity and np.min(eig) <= 0:
        raise ConvergenceError("principal eigenfunction is not positive")
    with np.errstate(over="ignore"):
        rho = math.exp(exponent * P) if exponent * P < 700 else math.inf
    return FloquetResult(rho=rho, exponent=exponent, period=P, times=times,
                         eigenfunction=eig, iterations=iters, residual=residual)


def floquet_exponent(eq: LinearDelayEq, **kw) -> float:
    return poincare_spectral_radius(eq, 1, **kw).exponent


@dataclass(frozen=True)
class PeriodicEigenfunction:
    """Positive periodic solution of a shifted linear delay equation."""

    shift: float
    period: float
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    residual: float
    fn: PeriodicFn = field(repr=False)

    def __call__(self, t):
        return self.fn(t)

    def derivative(self, t):
        return self.fn.derivative(t)


def equation_residual(eq: LinearDelayEq, K: PeriodicFn, t):
    """Pointwise ``K' - a_eff K - b_eff K(t - tau)``."""
    return K.derivative(t) - eq.a_eff(t) * K(t) - eq.b_eff(t) * K(np.asarray(t) - eq.tau)


def periodic_eigenfunction(eq: LinearDelayEq, shift: float, period_multiple: int = 1, *,
                           n_per_delay=DEFAULT_N_PER_DELAY, tol=1e-8) -> PeriodicEigenfunction:
    """Positive ``period_multiple * T``-periodic K with

        K' = (a - shift) K + b exp(-shift tau) K(t - tau).

    Such K exists only when the shifted equation is neutrally stable, i.e. its
    Poincare map has spectral radius one.
    """
    sh = eq.shifted(shift)
    res = poincare_spectral_radius(sh, period_multiple, n_per_delay=n_per_delay)
    if abs(res.log_rho) > tol:
        raise InconsistentShiftError(
            f"shifted equation has spectral radius exp({res.log_rho:.3e}) != 1; "
            f"shift {shift!r} is not a Floquet exponent of the equation")
    values = res.eigenfunction / np.max(res.eigenfunction)
    fn = PeriodicFn.tabulated(values[:-1], period=res.period)
    r = float(np.max(np.abs(equation_residual(sh, fn, res.times))))
    if r > 1e-6:
        raise ConvergenceError(f"eigenfunction residual {r:.2e} exceeds 1e-6; refine the grid")
    return PeriodicEigenfunction(shift=shift, period=res.period, times=res.times,
                                 values=values, residual=r, fn=fn)


# ---------------------------------------------------------------------------
# the nonlinear kinetic systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KineticTrajectory:
    t: np.ndarray
    S: np.ndarray
    I: np.ndarray


def _kinetic_tables(p: ModelParams, h, n, t0):
    th = t0 + 0.5 * h * np.arange(2 * n + 1)
    return p.beta(th), p.gamma(th), survival(p, th) * p.beta(th - p.tau)


def solve_kinetic(p: ModelParams, initial: HistorySegment, duration: float) -> KineticTrajectory:
    """Integrate the spatially homogeneous system

        S' = -beta S I,
        I' = survival(t) beta(t - tau) S(t - tau) I(t - tau) - gamma I

    from a history of ``(S, I)`` pairs.
    """
    v = initial.values
    if v.ndim != 2 or v.shape[1] != 2:
        raise ArgumentError("kinetic history must hold (S, I) pairs")
    if np.min(v) < 0:
        raise ArgumentError("initial history must be nonnegative")
    if v[-1, 0] > p.S0 * (1 + 1e-12):
        raise ArgumentError("S(0) must not exceed S0")
    if abs(initial.tau - p.tau) > 1e-12 * p.tau:
        raise ArgumentError("history length must equal the latent period")
    h = initial.h
    n = _steps(duration, h)
    beta, gamma, gain = _kinetic_tables(p, h, n, initial.t_end)

    def rhs(j, t, y, yd):
        si = y[0] * y[1]
        return np.array([-beta[j] * si, gain[j] * yd[0] * yd[1] - gamma[j] * y[1]])

    rows = initial._rows()
    buf = _integrate(rhs, rows, initial.n_nodes - 1, n, h, initial.t_end, initial._kink_row())
    out = buf[rows.shape[0] - 1:]
    if np.min(out) < -1e-12:
        raise PositivityError("kinetic state went negative; reduce the step")
    t = initial.t_end + h * np.arange(n + 1)
    return KineticTrajectory(t=t, S=out[:, 0], I=out[:, 1])


@dataclass(frozen=True)
class Attractor:
    eps: float
    period: float
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    max_u: float
    bound: float | None
    below_bound: bool
    periods: int
    fn: PeriodicFn = field(repr=False)

    def __call__(self, t):
        return self.fn(t)


def attractor_gain(p: ModelParams, eps, t):
    """``survival(t) beta(t - tau) (S0 - eps)``."""
    t = np.asarray(t, dtype=float)
    return survival(p, t) * p.beta(t - p.tau) * (p.S0 - eps)


def periodic_attractor_u(p: ModelParams, eps: float, A: float | None = None, *,
                         n_per_delay=DEFAULT_N_PER_DELAY, tol=1e-9,
                         max_periods=10_000, check_threshold=True) -> Attractor:
    """Positive periodic solution of

        u' = gain(t) u(t - tau) / (1 + u(t - tau)) - gamma(t) u

    reached by forward integration from the constant history ``0.1 S0``.
    When ``A`` is given, ``below_bound`` reports whether ``max u < A - 1``.
    """
    if check_threshold:
        from .threshold import floquet_exponent_linearized
        if floquet_exponent_linearized(p, eps, n_per_delay=n_per_delay) <= 0:
            raise PreconditionError("R0 at this perturbation is not above one; u decays to zero")
    T = p.period
    h, n_delay, n_period = commensurate_grid(p.tau, T, n_per_delay)
    th = 0.5 * h * np.arange(2 * n_period + 1)
    gain = attractor_gain(p, eps, th)
    gamma = p.gamma(th)

    def rhs(j, t, y, yd):
        return gain[j] * yd / (1.0 + yd) - gamma[j] * y

    rows = np.full(n_delay + 2, 0.1 * p.S0)
    prev = None
    for k in range(1, max_periods + 1):
        buf = _integrate(rhs, rows, n_delay, n_period, h, 0.0)
        cur = buf[-(n_period + 1):]
        rows = buf[-(n_delay + 2):]
        scale = float(np.max(np.abs(cur)))
        if scale < 1e-300:
            raise ConvergenceError("solution decayed to zero")
        if prev is not None and np.max(np.abs(cur - prev)) < tol * scale:
            break
        prev = cur
    else:
        raise ConvergenceError(f"no periodic attractor within {max_periods} periods")
    if np.min(cur) <= 0:
        raise ConvergenceError("attractor is not positive")
    times = h * np.arange(n_period + 1)
    max_u = float(np.max(cur))
    bound = None if A is None else A - 1.0
    return Attractor(eps=eps, period=T, times=times, values=cur.copy(), max_u=max_u,
                     bound=bound, below_bound=bound is None or max_u < bound, periods=k,
                     fn=PeriodicFn.tabulated(cur[:-1], period=T))
