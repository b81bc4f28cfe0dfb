"""Parameter sets of the three numerical examples.

All three share d1=0.2, d2=0.1, a1=a2=1.2, b1=b2=0.013, c1=c2=0.012 on
Omega(0)=(0, 1) with n=1. They differ only in the evolution rate:

    example5_1   rho(t) = 1                  (fixed domain, T = 2)
    example5_2   rho(t) = 1 + 0.5 |sin t|    (T = pi)
    example5_3   rho(t) = 1 - 0.3 |sin t|    (T = pi)

pi is the true period of |sin t|; the period means of rho^-2 over it are
0.6020 and 1.5853.
"""

from __future__ import annotations

import math

from .core import EvolutionLaw, ModelParams, PeriodicFn
from .errors import ConfigError

BASE = {"d1": 0.2, "d2": 0.1, "a": 1.2, "b": 0.013, "c": 0.012}

PRESETS = ("example5_1", "example5_2", "example5_3")


def preset_law(name: str) -> EvolutionLaw:
    if name == "example5_1":
        return EvolutionLaw(PeriodicFn.constant(1.0, 2.0), 1)
    if name == "example5_2":
        return EvolutionLaw(PeriodicFn.affine_abs_sin(1.0, 0.5, 1.0, math.pi), 1)
    if name == "example5_3":
        return EvolutionLaw(PeriodicFn.affine_abs_sin(1.0, -0.3, 1.0, math.pi), 1)
    raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")


def competition_params(law: EvolutionLaw, d1: float = BASE["d1"], d2: float = BASE["d2"]) -> ModelParams:
    """The shared constant coefficients on ``(0, 1)`` under the given law."""
    T = law.period

    def const(v):
        return PeriodicFn.constant(v, T)

    return ModelParams(
        d1=d1, d2=d2,
        a1=const(BASE["a"]), a2=const(BASE["a"]),
        b1=const(BASE["b"]), b2=const(BASE["b"]),
        c1=const(BASE["c"]), c2=const(BASE["c"]),
        law=law,
        interval=(0.0, 1.0),
    )


def preset(name: str) -> ModelParams:
    return competition_params(preset_law(name))


def amplitude_law(m: float) -> EvolutionLaw:
    """``rho(t) = 1 - m |sin(pi t)|`` with period 1, used for evolving-rate sweeps."""
    return EvolutionLaw(PeriodicFn.affine_abs_sin(1.0, -m, math.pi, 1.0), 1)
