"""Reproduction indexes, principal eigenvalues, diffusion thresholds, regime labels.

Every time average here is a composite Simpson integral over one period of
the evolution law. The closed forms are

    R_i        = int a_i / (d_i * lambda0 * int rho^-2)
    R_i*       = int a_i / (T * d_i * lambda0)              (rho == 1)
    lam_i      = mean(d_i * lambda0 / rho^2) - mean(a_i)
    D_i*       = mean(a_i) / lambda0
    D_i        = D_i* / mean(rho^-2)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import Grid, ModelParams, dilution, extrema_over_period, principal_eigenpair
from .errors import InternalError
from .quadrature import DEFAULT_NODES, integrate_period

SIDE_SAMPLES = 10_000
TIE_TOL = 1e-6

REGIMES = ("BothExtinct", "Species1Persists", "Species2Persists", "PersistenceBoth")


def rho_bar_inv_sq(law, nodes: int = DEFAULT_NODES) -> float:
    """Period mean of ``rho(t)^-2``."""
    return integrate_period(lambda t: law.rho(t) ** -2, law.period, nodes) / law.period


def _check_lambda0(lambda0):
    if not lambda0 > 0:
        raise ValueError(f"lambda0 must be positive, got {lambda0!r}")


def reproduction_index(params: ModelParams, lambda0: float, species: int,
                       nodes: int = DEFAULT_NODES) -> float:
    _check_lambda0(lambda0)
    d, a, _, _ = params.species(species)
    law = params.law
    int_a = integrate_period(a, law.period, nodes)
    int_rho = integrate_period(lambda t: law.rho(t) ** -2, law.period, nodes)
    return int_a / (d * lambda0 * int_rho)


def fixed_domain_index(params: ModelParams, lambda0: float, species: int,
                       nodes: int = DEFAULT_NODES) -> float:
    _check_lambda0(lambda0)
    d, a, _, _ = params.species(species)
    T = params.period
    return integrate_period(a, T, nodes) / (T * d * lambda0)


def principal_lambda(params: ModelParams, lambda0: float, species: int,
                     nodes: int = DEFAULT_NODES) -> float:
    """Principal eigenvalue of the periodic linearization at zero (positive means decay)."""
    _check_lambda0(lambda0)
    d, a, _, _ = params.species(species)
    law = params.law
    T = law.period
    diffusion = integrate_period(lambda t: d * lambda0 / law.rho(t) ** 2, T, nodes) / T
    return diffusion - integrate_period(a, T, nodes) / T


@dataclass(frozen=True)
class Thresholds:
    D1: float
    D2: float
    D1_star: float
    D2_star: float


def diffusion_thresholds(params: ModelParams, lambda0: float,
                         nodes: int = DEFAULT_NODES) -> Thresholds:
    _check_lambda0(lambda0)
    T = params.period
    mean_rho = rho_bar_inv_sq(params.law, nodes)
    star = [integrate_period(params.species(i)[1], T, nodes) / T / lambda0 for i in (1, 2)]
    return Thresholds(star[0] / mean_rho, star[1] / mean_rho, star[0], star[1])


@dataclass(frozen=True)
class Regime:
    label: str
    coexistence_certified: bool | None = None

    def __str__(self):
        return self.label

    @classmethod
    def from_indexes(cls, R1: float, R2: float, side_ok_1: bool, side_ok_2: bool) -> "Regime":
        # R_i == 1 sits on the extinction side
        p1, p2 = R1 > 1.0, R2 > 1.0
        if not p1 and not p2:
            return cls("BothExtinct")
        if p1 and not p2:
            return cls("Species1Persists")
        if p2 and not p1:
            return cls("Species2Persists")
        return cls("PersistenceBoth", bool(side_ok_1 and side_ok_2))


@dataclass(frozen=True)
class IndexReport:
    lambda0: float
    R1: float
    R2: float
    lam1: float
    lam2: float
    R1_star: float
    R2_star: float
    D1: float
    D2: float
    D1_star: float
    D2_star: float
    rho_bar_inv_sq: float
    regime: Regime
    side_ok_1: bool
    side_ok_2: bool
    M1: float
    M2: float
    tie_1: bool = False
    tie_2: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["regime"] = self.regime.label
        return out


def bound_constants(params: ModelParams, samples: int = SIDE_SAMPLES) -> tuple[float, float]:
    """``M_i = max_t (a_i - n rho'/rho) / c_i``."""
    law = params.law
    out = []
    for i in (1, 2):
        _, a, _, c = params.species(i)
        _, hi = extrema_over_period(lambda t: (a(t) - dilution(law, t)) / c(t), law.period, samples)
        out.append(hi)
    return out[0], out[1]


def side_conditions(params: ModelParams, R1: float, R2: float, M1: float, M2: float,
                    samples: int = SIDE_SAMPLES) -> tuple[bool, bool]:
    """Coexistence side conditions ``min(a1/b1)(1-1/R1) > M2`` and ``min(a2/b2)(1-1/R2) > M1``."""
    T = params.period
    lo1, _ = extrema_over_period(lambda t: params.a1(t) / params.b1(t), T, samples)
    lo2, _ = extrema_over_period(lambda t: params.a2(t) / params.b2(t), T, samples)
    return bool(lo1 * (1.0 - 1.0 / R1) > M2), bool(lo2 * (1.0 - 1.0 / R2) > M1)


def compare_thresholds(report: IndexReport) -> str:
    """Ordering of the evolving-domain thresholds against the fixed-domain ones."""
    gap = report.rho_bar_inv_sq - 1.0
    pairs = ((report.D1, report.D1_star), (report.D2, report.D2_star))
    if abs(gap) <= 1e-12:
        if not all(math.isclose(D, Ds, rel_tol=1e-10) for D, Ds in pairs):
            raise InternalError("rho_bar_inv_sq == 1 but D_i != D_i*")
        return "equal"
    label = "evolving_smaller" if gap > 0 else "evolving_larger"
    for D, Ds in pairs:
        if (D < Ds) != (gap > 0):
            raise InternalError(f"threshold ordering inconsistent with rho_bar_inv_sq={report.rho_bar_inv_sq}")
    return label


def classify_regime(params: ModelParams, N: int = 199, nodes: int = DEFAULT_NODES,
                    lambda0: float | None = None) -> IndexReport:
    """All indexes, thresholds, side conditions and the persistence regime.

    ``lambda0`` defaults to the discrete principal eigenvalue on an ``N``-node grid.
    """
    if lambda0 is None:
        lambda0 = principal_eigenpair(Grid(params.interval, N)).lambda0
    R = [reproduction_index(params, lambda0, i, nodes) for i in (1, 2)]
    Rs = [fixed_domain_index(params, lambda0, i, nodes) for i in (1, 2)]
    lam = [principal_lambda(params, lambda0, i, nodes) for i in (1, 2)]
    th = diffusion_thresholds(params, lambda0, nodes)
    M1, M2 = bound_constants(params)
    ok1, ok2 = side_conditions(params, R[0], R[1], M1, M2)
    return IndexReport(
        lambda0=lambda0,
        R1=R[0], R2=R[1],
        lam1=lam[0], lam2=lam[1],
        R1_star=Rs[0], R2_star=Rs[1],
        D1=th.D1, D2=th.D2, D1_star=th.D1_star, D2_star=th.D2_star,
        rho_bar_inv_sq=rho_bar_inv_sq(params.law, nodes),
        regime=Regime.from_indexes(R[0], R[1], ok1, ok2),
        side_ok_1=ok1, side_ok_2=ok2,
        M1=M1, M2=M2,
        tie_1=abs(R[0] - 1.0) < TIE_TOL, tie_2=abs(R[1] - 1.0) < TIE_TOL,
    )


def sign_law_holds(R: float, lam: float, tol: float = 1e-8) -> bool:
    """``sgn(1 - R) == sgn(lam)``, vacuously true inside the tolerance band."""
    if abs(1.0 - R) <= tol or abs(lam) <= tol:
        return True
    return bool(np.sign(1.0 - R) == np.sign(lam))
