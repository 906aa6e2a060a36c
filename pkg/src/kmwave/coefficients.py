"""Periodic coefficients, model parameters and the Gaussian latent-stage kernel.

The kernel redistributing infections that occurred one latent period ago is

    Gamma(t, t - tau; y) = exp(-int_{t-tau}^{t} gamma_L) * G(y),
    G(y) = exp(-y**2 / (4 d_L tau)) / sqrt(4 pi d_L tau),

a heat kernel with variance ``2 d_L tau`` thinned by the latent survival
factor.  All Gaussian integrals used downstream are evaluated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, erfinv

from .errors import ArgumentError

_KINDS = ("constant", "cosine", "tabulated")


@dataclass(frozen=True)
class PeriodicFn:
    """A T-periodic scalar function of time.

    ``kind`` is one of

    * ``"constant"``: ``c0``
    * ``"cosine"``: ``c0 * (1 + amplitude * cos(2 pi t / period))``
    * ``"tabulated"``: trigonometric interpolant of ``samples`` taken at
      ``t = k * period / N``, ``k = 0..N-1``.

    ``phase`` shifts the argument, ``f(t) = base(t + phase)``.  Arguments are
    reduced modulo the period before any trigonometric evaluation so that
    ``f(t + period) == f(t)`` holds without drift.
    """

    period: float
    kind: str = "constant"
    c0: float = 0.0
    amplitude: float = 0.0
    samples: tuple = ()
    phase: float = 0.0
    _coef: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.period > 0 or not math.isfinite(self.period):
            raise ArgumentError(f"period must be positive, got {self.period}")
        if self.kind not in _KINDS:
            raise ArgumentError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "cosine" and not 0.0 <= self.amplitude < 1.0:
            raise ArgumentError(f"cosine amplitude must lie in [0, 1), got {self.amplitude}")
        if self.kind == "tabulated":
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 1 or s.size < 2:
                raise ArgumentError("tabulated coefficient needs at least two samples")
            object.__setattr__(self, "samples", tuple(float(v) for v in s))
            object.__setattr__(self, "_coef", np.fft.rfft(s) / s.size)

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, value, period=1.0):
        return cls(period=float(period), kind="constant", c0=float(value))

    @classmethod
    def cosine(cls, mean, amplitude, period=1.0, phase=0.0):
        return cls(period=float(period), kind="cosine", c0=float(mean),
                   amplitude=float(amplitude), phase=float(phase))

    @classmethod
    def tabulated(cls, samples, period=1.0, phase=0.0):
        return cls(period=float(period), kind="tabulated",
                   samples=tuple(np.asarray(samples, dtype=float)), phase=float(phase))

    def shifted(self, dt):
        """The function ``t -> self(t + dt)``."""
        return PeriodicFn(period=self.period, kind=self.kind, c0=self.c0,
                          amplitude=self.amplitude, samples=self.samples,
                          phase=self.phase + dt)

    # -- properties -------------------------------------------------------
    @property
    def is_constant(self):
        if self.kind == "constant":
            return True
        if self.kind == "cosine":
            return self.amplitude == 0.0
        return bool(np.all(np.abs(self._coef[1:]) == 0.0))

    @property
    def mean(self):
        if self.kind == "tabulated":
            return float(self._coef[0].real)
        return self.c0

    def minimum(self):
        if self.kind == "constant":
            return self.c0
        if self.kind == "cosine":
            return self.c0 * (1.0 - self.amplitude) if self.c0 >= 0 else self.c0 * (1.0 + self.amplitude)
        t = np.linspace(0.0, self.period, 16 * len(self.samples), endpoint=False)
        return float(min(np.min(self(t)), min(self.samples)))

    # -- evaluation -------------------------------------------------------
    def _reduced(self, t):
        return np.mod(np.asarray(t, dtype=float) + self.phase, self.period)

    def _harmonics(self):
        n = len(self.samples)
        k = np.arange(self._coef.size)
        w = np.full(k.size, 2.0)
        w[0] = 1.0
        if n % 2 == 0:
            w[-1] = 1.0
        return k, w * self._coef

    def __call__(self, t):
        if self.kind == "constant":
            return np.full(np.shape(t), self.c0) if np.ndim(t) else float(self.c0)
        s = self._reduced(t)
        if self.kind == "cosine":
            out = self.c0 * (1.0 + self.amplitude * np.cos(2.0 * np.pi * s / self.period))
        else:
            k, c = self._harmonics()
            phase = np.exp(2j * np.pi * np.multiply.outer(s, k) / self.period)
            out = (phase @ c).real
        return out if np.ndim(out) else float(out)

    def derivative(self, t):
        if self.kind == "constant":
            return np.zeros(np.shape(t)) if np.ndim(t) else 0.0
        s = self._reduced(t)
        om = 2.0 * np.pi / self.period
        if self.kind == "cosine":
            out = -self.c0 * self.amplitude * om * np.sin(om * s)
        else:
            k, c = self._harmonics()
            phase = np.exp(1j * om * np.multiply.outer(s, k))
            out = (phase @ (1j * om * k * c)).real
        return out if np.ndim(out) else float(out)

    def _oscillating_antiderivative(self, t):
        """Zero-mean periodic part of an antiderivative, evaluated at reduced time."""
        s = self._reduced(t)
        om = 2.0 * np.pi / self.period
        if self.kind == "cosine":
            return self.c0 * self.amplitude / om * np.sin(om * s)
        k, c = self._harmonics()
        kk = k[1:]
        phase = np.exp(1j * om * np.multiply.outer(s, kk))
        return (phase @ (c[1:] / (1j * om * kk))).real

    def integrate(self, t0, t1):
        return integrate_periodic(self, t0, t1)


def integrate_periodic(f: PeriodicFn, t0, t1):
    """Integral of ``f`` over ``[t0, t1]`` (elementwise for array bounds)."""
    t0 = np.asarray(t0, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    if np.any(t1 < t0):
        raise ArgumentError("integration bounds must satisfy t0 <= t1")
    out = f.mean * (t1 - t0)
    if not f.is_constant:
        out = out + f._oscillating_antiderivative(t1) - f._oscillating_antiderivative(t0)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class ModelParams:
    """Diffusivities, latent period, initial susceptible density and the three
    periodic rates (transmission ``beta``, removal ``gamma``, latent-stage
    removal ``gammaL``)."""

    d1: float
    d2: float
    dL: float
    tau: float
    S0: float
    beta: PeriodicFn
    gamma: PeriodicFn
    gammaL: PeriodicFn

    def __post_init__(self):
        # d1 = 0 and d2 = 0 are admitted for reduced test problems.
        for name in ("d1", "d2"):
            if getattr(self, name) < 0:
                raise ArgumentError(f"{name} must be nonnegative")
        for name in ("dL", "tau", "S0"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"{name} must be positive")
        periods = {self.beta.period, self.gamma.period, self.gammaL.period}
        if len(periods) != 1:
            raise ArgumentError(f"coefficients must share one period, got {sorted(periods)}")
        if self.beta.minimum() < 0 or self.gamma.minimum() <= 0 or self.gammaL.minimum() < 0:
            raise ArgumentError("beta and gammaL must be nonnegative and gamma positive")

    @property
    def period(self):
        return self.beta.period

    @property
    def autonomous(self):
        return self.beta.is_constant and self.gamma.is_constant and self.gammaL.is_constant

    def replace(self, **changes):
        from dataclasses import replace
        return replace(self, **changes)


def survival(p: ModelParams, t):
    """Fraction surviving the latent stage that ends at ``t``."""
    t = np.asarray(t, dtype=float)
    return np.exp(-integrate_periodic(p.gammaL, t - p.tau, t))


def kernel_weight(p: ModelParams, t, mu):
    """Exponential moment of the latent kernel,
    ``int Gamma(t, t - tau; y) e^{mu y} dy = survival(t) * exp(d_L tau mu^2)``."""
    mu = np.asarray(mu, dtype=float)
    out = survival(p, t) * np.exp(p.dL * p.tau * mu * mu)
    return out if np.ndim(out) else float(out)


def gaussian_kernel(dL, tau, y):
    """Samples of the latent-stage heat kernel G(y)."""
    var4 = 4.0 * dL * tau
    y = np.asarray(y, dtype=float)
    return np.exp(-y * y / var4) / math.sqrt(math.pi * var4)


def truncated_gaussian_mass(dL, tau, ell):
    """Mass of G on ``[-ell, ell]``."""
    if not ell > 0:
        raise ArgumentError("ell must be positive")
    return float(erf(ell / math.sqrt(4.0 * dL * tau)))


def ell_for_mass(dL, tau, mass):
    """Half-width ``ell`` at which the truncated kernel carries ``mass``."""
    if not 0.0 < mass < 1.0:
        raise ArgumentError("mass must lie strictly between 0 and 1")
    scale = math.sqrt(4.0 * dL * tau)
    x = float(erfinv(mass))
    # Newton polish on erf(x) = mass; erfinv alone loses digits near 1.
    for _ in range(3):
        fx = float(erf(x)) - mass
        x -= fx / (2.0 / math.sqrt(math.pi) * math.exp(-x * x))
    return x * scale
