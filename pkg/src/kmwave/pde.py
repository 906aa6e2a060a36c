"""One-dimensional simulation of the nonlocal delayed reaction-diffusion system

    S_t = d1 S_xx - beta(t) S I,
    I_t = d2 I_xx + survival(t) [G * (beta S I)(t - tau)](x) - gamma(t) I,

with ``G`` the latent-stage heat kernel (variance ``2 dL tau``).

Each step is a Lie splitting: an RK4 reaction step at every node, followed by a
Crank-Nicolson diffusion step with zero-flux (Neumann) boundaries.  The delayed
source only ever enters through its convolution with ``G``, and convolution
is linear, so the history ring stores the *convolved* product field
``Q(s) = G * (beta(s) S(s) I(s))``.  Each product is then convolved only once,
when it is pushed.  Convolutions are linear (zero-padded); see
:class:`GaussianConvolver` for why direct summation is the default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .coefficients import ModelParams, gaussian_kernel, survival
from .errors import ArgumentError, DomainExhaustedError, NoFrontError, StepSizeError

CLAMP_TOLERANCE = 1e-12
BOUNDARY_MARGIN = 0.05


def _as_int_ratio(num, den, what):
    k = round(num / den)
    if k < 1 or abs(k * den - num) > 1e-9 * max(num, den):
        raise ArgumentError(f"{what}: {num} is not an integer multiple of dt = {den}")
    return int(k)


# ---------------------------------------------------------------------------
# spatial operators
# ---------------------------------------------------------------------------

KERNEL_CUTOFF = 1e-18


def kernel_support(dL, tau):
    """Half-width beyond which ``G`` falls below ``KERNEL_CUTOFF * G(0)``.

    The omitted mass is ``erfc(sqrt(ln(1/KERNEL_CUTOFF)))``, about 1e-19.
    """
    return math.sqrt(4.0 * dL * tau * math.log(1.0 / KERNEL_CUTOFF))


class GaussianConvolver:
    """Linear convolution with the (optionally truncated) latent kernel.

    The kernel is sampled at the grid offsets and weighted by ``dx``, so a
    discrete delta of mass one reproduces the kernel samples.  Values outside
    the domain count as zero (the domain is embedded in an infection-free
    line).

    ``method="direct"`` (default) sums the compactly supported kernel
    directly.  All terms are nonnegative, so the error at each node is relative
    to the local value.  ``method="fft"`` uses a zero-padded transform.  It is
    faster for wide kernels, but its round-off is an absolute floor of about
    1e-16 times the field maximum, spread over the whole grid.  Ahead of a
    front the disease-free state is linearly unstable, and that floor grows
    into a spurious front after roughly ``ln(1e16) / lambda(0)`` time units.
    """

    def __init__(self, n, dx, dL, tau, ell=None, method="direct"):
        if method not in ("direct", "fft"):
            raise ArgumentError(f"unknown convolution method {method!r}")
        self.n, self.dx, self.ell, self.method = n, dx, ell, method
        half = ell if ell is not None else kernel_support(dL, tau)
        m = min(n - 1, int(math.floor(half / dx * (1 + 1e-12))))
        offsets = dx * np.arange(-m, m + 1)
        kern = gaussian_kernel(dL, tau, offsets) * dx
        if ell is not None:
            kern[np.abs(offsets) > ell * (1 + 1e-12)] = 0.0
        self.m, self.kernel = m, kern
        if method == "fft":
            self.size = sfft.next_fast_len(n + 2 * m, real=True)
            self._kfft = sfft.rfft(kern, self.size)

    def __call__(self, f):
        m, n = self.m, self.n
        if self.method == "direct":
            return np.convolve(f, self.kernel, mode="full")[m:m + n]
        out = sfft.irfft(sfft.rfft(f, self.size) * self._kfft, self.size)
        return out[m:m + n]


def direct_convolution(f, dx, dL, tau, ell=None):
    """Quadrature oracle for :class:`GaussianConvolver` (O(n^2))."""
    n = len(f)
    diff = dx * (np.arange(n)[:, None] - np.arange(n)[None, :])
    kern = gaussian_kernel(dL, tau, diff) * dx
    if ell is not None:
        kern[np.abs(diff) > ell * (1 + 1e-12)] = 0.0
    return kern @ np.asarray(f, dtype=float)


class CrankNicolson:
    """``(1 - dt d/2 L) u_new = (1 + dt d/2 L) u`` with the Neumann Laplacian ``L``."""

    def __init__(self, n, dx, d, dt):
        self.active = d > 0
        r = d * dt / (2.0 * dx * dx)
        self.r = r
        ab = np.zeros((3, n))
        ab[0, 1:] = -r
        ab[1, :] = 1.0 + 2.0 * r
        ab[2, :-1] = -r
        # Ghost nodes mirrored across the boundary nodes.
        ab[0, 1] = -2.0 * r
        ab[2, -2] = -2.0 * r
        self.ab = ab

    def __call__(self, u):
        if not self.active:
            return u
        r = self.r
        rhs = (1.0 - 2.0 * r) * u
        rhs[1:-1] += r * (u[:-2] + u[2:])
        rhs[0] += 2.0 * r * u[1]
        rhs[-1] += 2.0 * r * u[-2]
        return solve_banded((1, 1), self.ab, rhs, overwrite_b=True, check_finite=False)


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------

@dataclass
class FieldState:
    """Spatial fields at time ``t`` plus the delayed-source ring.

    ``ring[k]`` holds ``Q(t - tau - 2 dt + k dt)`` for ``k = 0 .. depth - 1``
    with ``depth = tau / dt + 3`` (two nodes before the delay window for the
    one-sided stencil and one after it for the centred interpolation of
    half-step values).  ``history_start`` is the first time at which ``Q``
    comes from computed fields; earlier entries are the supplied past.  With
    the disease-free past (``warm`` false) ``Q`` jumps there; with a supplied
    past (``warm`` true) only its derivative does.  Interpolation stencils
    never straddle ``history_start``.
    """

    t: float
    step_index: int
    x: np.ndarray = field(repr=False)
    dx: float
    dt: float
    S: np.ndarray = field(repr=False)
    I: np.ndarray = field(repr=False)
    ring: np.ndarray = field(repr=False)
    head: int
    history_start: float
    warm: bool
    kernel_ell: float | None = None
    convolution: str = "direct"
    clamp_count: int = 0
    t0: float = 0.0
    _ops: dict = field(default=None, repr=False, compare=False)

    @property
    def n(self):
        return self.x.size

    @property
    def depth(self):
        return self.ring.shape[0]

    def delayed(self, k):
        """Ring entry ``k`` in chronological order."""
        return self.ring[(self.head + k) % self.depth]

    def history(self):
        """The ring in chronological order (oldest first)."""
        idx = (self.head + np.arange(self.depth)) % self.depth
        return self.ring[idx]

    def copy(self):
        return FieldState(t=self.t, step_index=self.step_index, x=self.x.copy(), dx=self.dx,
                          dt=self.dt, S=self.S.copy(), I=self.I.copy(), ring=self.history(),
                          head=0, history_start=self.history_start, warm=self.warm,
                          kernel_ell=self.kernel_ell, convolution=self.convolution,
                          clamp_count=self.clamp_count, t0=self.t0)


@dataclass(frozen=True)
class Seed:
    """Initial infection ``amplitude * cos^2(pi (x - center) / (2 width))`` on
    ``|x - center| < width`` (zero elsewhere); ``width = inf`` means uniform."""

    center: float = 0.0
    width: float = 2.0
    amplitude: float = 0.1
    S: float | None = None

    def profile(self, x):
        if math.isinf(self.width):
            return np.full(x.shape, float(self.amplitude))
        z = (x - self.center) / self.width
        return np.where(np.abs(z) < 1.0, self.amplitude * np.cos(0.5 * np.pi * z) ** 2, 0.0)


def make_grid(x_min, x_max, dx):
    if not dx > 0:
        raise ArgumentError("dx must be positive")
    if not x_max > x_min:
        raise ArgumentError("domain must satisfy x_min < x_max")
    n = _as_int_ratio(x_max - x_min, dx, "domain length") + 1
    return x_min + dx * np.arange(n)


def _build_ops(state: FieldState, p: ModelParams):
    key = (id(p), state.dt)
    if state._ops is not None and state._ops["key"] == key:
        return state._ops
    n, dx, dt = state.n, state.dx, state.dt
    ops = {
        "key": key,
        "conv": GaussianConvolver(n, dx, p.dL, p.tau, state.kernel_ell, state.convolution),
        "diff_S": CrankNicolson(n, dx, p.d1, dt),
        "diff_I": CrankNicolson(n, dx, p.d2, dt),
    }
    state._ops = ops
    return ops


def init_state(p: ModelParams, domain, seed: Seed | None = None, dt=1.0 / 256, *,
               t0=0.0, history=None, kernel_ell=None, convolution="direct") -> FieldState:
    """Disease-free susceptibles plus a localised infection bump.

    ``domain`` is ``(x_min, x_max, dx)``.  ``history`` optionally supplies the
    past product field ``beta(s) S(s, x) I(s, x)`` for ``s < t0`` as a
    callable ``history(s) -> array`` (warm start); by default the past is
    infection free.  ``kernel_ell`` truncates the kernel to ``[-ell, ell]``;
    ``convolution`` selects the :class:`GaussianConvolver` method.
    """
    x_min, x_max, dx = domain
    x = make_grid(x_min, x_max, dx)
    if not dt > 0:
        raise ArgumentError("dt must be positive")
    D = _as_int_ratio(p.tau, dt, "latent period")
    if D < 2:
        raise ArgumentError("dt must be at most tau / 2")
    seed = seed or Seed()
    if not math.isinf(seed.width):
        if not (x_min <= seed.center - seed.width and seed.center + seed.width <= x_max):
            raise ArgumentError("seed bump must lie inside the domain")
        if not seed.width > 0:
            raise ArgumentError("seed width must be positive")
    if seed.amplitude < 0:
        raise ArgumentError("seed amplitude must be nonnegative")
    S_init = p.S0 if seed.S is None else seed.S
    if not 0 <= S_init <= p.S0:
        raise ArgumentError("initial susceptible density must lie in [0, S0]")
    S = np.full(x.size, float(S_init))
    I = seed.profile(x).astype(float)
    state = FieldState(t=float(t0), step_index=0, x=x, dx=float(dx), dt=float(dt), S=S, I=I,
                       ring=np.zeros((D + 3, x.size)), head=0, history_start=float(t0),
                       warm=history is not None, kernel_ell=kernel_ell,
                       convolution=convolution, t0=float(t0))
    conv = _build_ops(state, p)["conv"]
    times = t0 + dt * np.arange(-D - 2, 1)
    for k, s in enumerate(times[:-1]):
        if history is not None:
            state.ring[k] = conv(np.asarray(history(s), dtype=float) * np.ones(x.size))
    state.ring[-1] = conv(p.beta(t0) * S * I)
    return state


def _half_step_source(state: FieldState):
    """``Q(t - tau + dt / 2)`` by four-point cubic interpolation.

    The stencil is centred unless it would straddle ``history_start``.
    Across the jump of a cold start the pre-jump side is exactly zero and the
    post-jump side uses a right-sided stencil; across the derivative kink of a
    warm start the stencil is made one-sided on the side of the interval.
    """
    y = state.delayed
    D = state.depth - 3             # tau / dt; y(2) is Q(t - tau)
    k = round((state.history_start - state.t) / state.dt) + D \
        if math.isfinite(state.history_start) else None
    if k == 0 or (k == 1 and not state.warm) or (k == 2 and not state.warm):
        if k != 0:                  # the interval precedes the jump
            return y(2)
        if D >= 3:
            return (5.0 * y(2) + 15.0 * y(3) - 5.0 * y(4) + y(5)) * 0.0625
        return (3.0 * y(2) + 6.0 * y(3) - y(4)) * 0.125
    if k == 1:
        return (y(0) - 5.0 * y(1) + 15.0 * y(2) + 5.0 * y(3)) * 0.0625
    return (9.0 * (y(2) + y(3)) - y(1) - y(4)) * 0.0625


def _reaction(state: FieldState, p: ModelParams):
    t, h = state.t, state.dt
    Q0, Q1 = state.delayed(2), state.delayed(3)
    Qh = _half_step_source(state)
    th = np.array([t, t + 0.5 * h, t + h])
    beta, gamma, sig = p.beta(th), p.gamma(th), survival(p, th)
    S, I = state.S, state.I

    def f(k, S_, I_, Q):
        si = beta[k] * S_ * I_
        return -si, sig[k] * Q - gamma[k] * I_

    a1, b1 = f(0, S, I, Q0)
    a2, b2 = f(1, S + 0.5 * h * a1, I + 0.5 * h * b1, Qh)
    a3, b3 = f(1, S + 0.5 * h * a2, I + 0.5 * h * b2, Qh)
    a4, b4 = f(2, S + h * a3, I + h * b3, Q1)
    S_new = S + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    I_new = I + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
    return S_new, I_new


def _clamp(state: FieldState, u, name):
    low = np.min(u)
    if low < 0:
        if low < -CLAMP_TOLERANCE:
            state.clamp_count += 1
            raise StepSizeError(f"{name} reached {low:.3e} < 0 at t = {state.t:.6g}; "
                                "reduce dt or dx")
        np.maximum(u, 0.0, out=u)
    return u


def front_position(x, I, threshold):
    """Rightmost ``x`` with ``I >= threshold`` (linear interpolation), or None."""
    above = np.flatnonzero(I >= threshold)
    if above.size == 0:
        return None
    k = above[-1]
    if k == I.size - 1:
        return float(x[-1])
    # I[k] >= threshold > I[k + 1]
    frac = (I[k] - threshold) / (I[k] - I[k + 1])
    return float(x[k] + frac * (x[k + 1] - x[k]))


def rear_position(x, I, threshold):
    """Leftmost ``x`` with ``I >= threshold``, or None."""
    pos = front_position(-x[::-1], I[::-1], threshold)
    return None if pos is None else -pos


def check_domain(state: FieldState, threshold):
    """Raise when the infection reaches the outer 5% of the domain."""
    x0, x1 = state.x[0], state.x[-1]
    margin = BOUNDARY_MARGIN * (x1 - x0)
    right, left = front_position(state.x, state.I, threshold), rear_position(state.x, state.I, threshold)
    if (right is not None and right > x1 - margin) or (left is not None and left < x0 + margin):
        raise DomainExhaustedError(f"front within {BOUNDARY_MARGIN:.0%} of the boundary "
                                   f"at t = {state.t:.6g}")


def step(state: FieldState, p: ModelParams, dt=None, *, front_threshold=None) -> FieldState:
    """Advance ``state`` by one step (in place) and return it."""
    if dt is not None and abs(dt - state.dt) > 1e-15 * state.dt:
        raise ArgumentError("dt is fixed by the history ring; build a new state to change it")
    ops = _build_ops(state, p)
    S, I = _reaction(state, p)
    S = ops["diff_S"](S)
    I = ops["diff_I"](I)
    state.step_index += 1
    state.t = state.t0 + state.step_index * state.dt
    state.S = _clamp(state, S, "S")
    state.I = _clamp(state, I, "I")
    # Drop the oldest entry, push Q at the new time.
    Q = ops["conv"](p.beta(state.t) * state.S * state.I)
    state.ring[state.head] = np.maximum(Q, 0.0)
    state.head = (state.head + 1) % state.depth
    if front_threshold is not None:
        check_domain(state, front_threshold)
    return state


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

@dataclass
class Snapshots:
    times: np.ndarray
    x: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    I: np.ndarray = field(repr=False)
    period: float
    seed_center: float = 0.0
    S_inf: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    def save(self, path):
        np.savez_compressed(path, times=self.times, x=self.x, S=self.S, I=self.I,
                            period=self.period, seed_center=self.seed_center,
                            S_inf=np.nan if self.S_inf is None else self.S_inf)

    @classmethod
    def load(cls, path):
        with np.load(path) as z:
            s_inf = float(z["S_inf"])
            return cls(times=z["times"], x=z["x"], S=z["S"], I=z["I"], period=float(z["period"]),
                       seed_center=float(z["seed_center"]),
                       S_inf=None if math.isnan(s_inf) else s_inf)


def s_infinity(x, S, I_max, I_now, threshold):
    """Average of ``S`` over the nodes the epidemic has passed (``I`` peaked
    above ``threshold`` and is now below it); None if there are none."""
    passed = (I_max >= threshold) & (I_now < threshold)
    if not np.any(passed):
        return None
    return float(np.mean(S[passed]))


def simulate(p: ModelParams, domain, seed: Seed | None = None, horizon=50.0,
             snapshot_every=0.25, *, dt=1.0 / 256, threshold=1e-3, state=None,
             kernel_ell=None, history=None, convolution="direct", guard=True,
             callback=None) -> Snapshots:
    """Run to ``horizon`` (elapsed time), recording every ``snapshot_every``.

    Resumes from ``state`` if given (``domain``/``seed`` are then ignored).
    ``threshold`` is the infection level used for the domain guard and the
    ``S_inf`` estimate.
    """
    if state is None:
        state = init_state(p, domain, seed, dt, history=history, kernel_ell=kernel_ell,
                           convolution=convolution)
    dt = state.dt
    n_steps = _as_int_ratio(horizon, dt, "horizon")
    every = _as_int_ratio(snapshot_every, dt, "snapshot cadence")
    times, Ss, Is = [state.t], [state.S.copy()], [state.I.copy()]
    I_max = state.I.copy()
    for k in range(1, n_steps + 1):
        step(state, p, front_threshold=threshold if guard else None)
        np.maximum(I_max, state.I, out=I_max)
        if k % every == 0:
            times.append(state.t)
            Ss.append(state.S.copy())
            Is.append(state.I.copy())
        if callback is not None:
            callback(state)
    center = seed.center if seed is not None else 0.0
    return Snapshots(times=np.array(times), x=state.x.copy(), S=np.array(Ss), I=np.array(Is),
                     period=p.period, seed_center=center,
                     S_inf=s_infinity(state.x, state.S, I_max, state.I, threshold),
                     meta={"dt": dt, "dx": state.dx, "steps": n_steps, "state": state,
                           "clamp_count": state.clamp_count})


# ---------------------------------------------------------------------------
# measurements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeedEstimate:
    threshold: float
    times: np.ndarray = field(repr=False)
    front_positions: np.ndarray = field(repr=False)
    speed: float
    window: float
    fit_residual: float
    reliable: bool

    @property
    def relative_residual(self):
        return self.fit_residual / abs(self.speed * self.window) if self.speed else math.inf


def spreading_speed(snaps: Snapshots, threshold=1e-3, *, transient_periods=3,
                    min_snapshots=10) -> SpeedEstimate:
    """Least-squares slope of the rightmost threshold crossing.

    The fit uses the last half of the series with the first
    ``transient_periods`` periods removed; the window is shortened to a whole
    number of periods so periodic oscillations of the front average out.
    """
    pos = [front_position(snaps.x, I, threshold) for I in snaps.I]
    formed = np.array([q is not None for q in pos])
    if not formed.any():
        raise NoFrontError(f"infection never reaches threshold {threshold}")
    t = snaps.times
    xf = np.array([np.nan if q is None else q for q in pos])
    if np.count_nonzero(formed) < min_snapshots:
        raise ArgumentError(f"need at least {min_snapshots} snapshots after the front forms")
    T = snaps.period
    t_end = t[-1]
    t_start = max(t[0] + 0.5 * (t_end - t[0]), t[0] + transient_periods * T,
                  t[np.argmax(formed)])
    n_per = math.floor((t_end - t_start) / T + 1e-9)
    if n_per >= 1:
        t_start = t_end - n_per * T
    sel = (t >= t_start - 1e-9 * T) & formed
    if n_per >= 1:
        # Half-open window [t_start, t_end): each phase of the period once.
        sel &= t < t_end - 1e-9 * T
    if np.count_nonzero(sel) < 3:
        raise ArgumentError("trailing window holds fewer than three front positions")
    tt, xx = t[sel], xf[sel]
    A = np.column_stack([tt - tt.mean(), np.ones_like(tt)])
    coef, *_ = np.linalg.lstsq(A, xx, rcond=None)
    speed = float(coef[0])
    rms = float(np.sqrt(np.mean((A @ coef - xx) ** 2)))
    window = float(t_end - t_start)
    reliable = speed != 0 and rms / abs(speed * window) < 0.05
    return SpeedEstimate(threshold=threshold, times=t, front_positions=xf, speed=speed,
                         window=window, fit_residual=rms, reliable=bool(reliable))


def periodic_wave_residual(snaps: Snapshots, c, p: ModelParams | None = None, *,
                           n_periods=5, right_of=None) -> float:
    """``max_t sup_x |I(t + T, x) - I(t, x - cT)| / sup_x |I(t, x)|`` over
    snapshot pairs one period apart within the last ``n_periods`` periods.

    Only ``x >= right_of`` (default: the seed centre) is compared, which
    selects the right-moving front.  Points whose shifted abscissa leaves the
    grid are skipped.
    """
    T = p.period if p is not None else snaps.period
    t = snaps.times
    if t[-1] - t[0] < n_periods * T - 1e-9 * T:
        raise ArgumentError(f"snapshots span less than {n_periods} periods")
    x = snaps.x
    x_lo = snaps.seed_center if right_of is None else right_of
    shift = c * T
    keep = (x >= x_lo) & (x - shift >= x[0])
    t_lo = t[-1] - n_periods * T
    worst = 0.0
    n_pairs = 0
    for i, ti in enumerate(t):
        if ti < t_lo - 1e-9 * T:
            continue
        j = np.flatnonzero(np.abs(t - (ti + T)) <= 1e-9 * max(T, abs(ti)))
        if j.size == 0:
            continue
        now = snaps.I[i]
        scale = np.max(np.abs(now[x >= x_lo]))
        if scale == 0:
            continue
        shifted = CubicSpline(x, now)(x[keep] - shift)
        worst = max(worst, float(np.max(np.abs(snaps.I[j[0]][keep] - shifted)) / scale))
        n_pairs += 1
    if n_pairs == 0:
        raise ArgumentError("no snapshot pairs one period apart")
    return worst
