"""Numerical toolkit for the time-periodic diffusive Kermack-McKendrick model
with nonlocal delayed (latent-stage) interactions.

Modules
-------
coefficients  periodic coefficients, parameter record, Gaussian kernel identities
delay         delay-ODE integration, Floquet exponents, kinetic system, attractors
threshold     R0^eps and eps_sup
wavespeed     dispersion relation, critical speed, lower-solution gadgets
pde           1-D simulation, spreading speed, periodic-wave residual
io, config    serialisation and experiment configuration
cli           command line front end (``kmwave`` / ``python -m kmwave``)
"""

__version__ = "0.1.0"

from .coefficients import (ModelParams, PeriodicFn, ell_for_mass, gaussian_kernel,  # noqa: E402
                           integrate_periodic, kernel_weight, survival, truncated_gaussian_mass)
from .delay import (FloquetResult, HistorySegment, LinearDelayEq, floquet_exponent,  # noqa: E402
                    periodic_attractor_u, periodic_eigenfunction, poincare_spectral_radius,
                    solve_kinetic)
from .errors import *  # noqa: E402,F401,F403
from .threshold import compute_R0_eps, epsilon_sup, threshold_report  # noqa: E402
from .wavespeed import (critical_speed, dispersion_exponent, proof_gadgets,  # noqa: E402
                        speed_for_decay, subsolution_residual)
from .pde import (FieldState, Seed, Snapshots, SpeedEstimate, init_state,  # noqa: E402
                  periodic_wave_residual, simulate, spreading_speed, step)

__all__ = [
    "ModelParams", "PeriodicFn", "ell_for_mass", "gaussian_kernel", "integrate_periodic",
    "kernel_weight", "survival", "truncated_gaussian_mass",
    "FloquetResult", "HistorySegment", "LinearDelayEq", "floquet_exponent",
    "periodic_attractor_u", "periodic_eigenfunction", "poincare_spectral_radius", "solve_kinetic",
    "compute_R0_eps", "epsilon_sup", "threshold_report",
    "critical_speed", "dispersion_exponent", "proof_gadgets", "speed_for_decay",
    "subsolution_residual",
    "FieldState", "Seed", "Snapshots", "SpeedEstimate", "init_state", "periodic_wave_residual",
    "simulate", "spreading_speed", "step",
]
