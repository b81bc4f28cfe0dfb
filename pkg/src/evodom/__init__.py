"""Two-species diffusive competition on a periodically evolving 1-D domain.

Reproduction indexes and diffusion thresholds, a fixed-domain IMEX
integrator with pullback to the physical domain, and monotone upper/lower
iteration for periodic solutions.
"""

from .core import EvolutionLaw, Grid, ModelParams, PeriodicFn, principal_eigenpair
from .dynamics import InitialCondition, StepperConfig, periodic_attractor, simulate
from .errors import (
    BlowUpError,
    ConfigError,
    ConvergenceError,
    EvodomError,
    MonotonicityError,
)
from .indexes import IndexReport, Regime, classify_regime
from .monotone import lipschitz_constants, monotone_iterate_ivp, monotone_iterate_periodic
from .presets import PRESETS, preset

__all__ = [
    "BlowUpError", "ConfigError", "ConvergenceError", "EvodomError", "MonotonicityError",
    "EvolutionLaw", "Grid", "ModelParams", "PeriodicFn", "principal_eigenpair",
    "InitialCondition", "StepperConfig", "periodic_attractor", "simulate",
    "IndexReport", "Regime", "classify_regime",
    "lipschitz_constants", "monotone_iterate_ivp", "monotone_iterate_periodic",
    "PRESETS", "preset",
]

__version__ = "0.1.0"
