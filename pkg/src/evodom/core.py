"""Domain types, periodic coefficients, the spatial grid and the Dirichlet eigenpair.

The physical domain evolves isotropically, ``x = rho(t) * y``, so every
computation happens on the fixed reference interval ``Omega(0)``. The
evolution only enters through the diffusion scaling ``1/rho^2`` and the
dilution coefficient ``n * rho'(t) / rho(t)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy.linalg import lapack

from .errors import ConfigError, DomainCollapseError, NumericalError
from .quadrature import DEFAULT_NODES, cumulative_simpson

KINDS = ("constant", "affine_sin", "affine_abs_sin", "sampled")

# |sin| values below this are treated as a kink when differentiating
_KINK_TOL = 1e-12
# fine grid used for positivity checks on coefficients and rho
_CHECK_SAMPLES = 10_000


@dataclass(frozen=True)
class PeriodicFn:
    """A T-periodic scalar function of time.

    ``kind`` selects the form:

    * ``constant``:        ``c0``
    * ``affine_sin``:      ``c0 + c1 * sin(omega*t + phase)``
    * ``affine_abs_sin``:  ``c0 + c1 * |sin(omega*t)|``
    * ``sampled``:         piecewise-linear through ``table`` rows ``(t, value)``

    Evaluation wraps time into ``[0, period)`` first, so a closed form whose
    natural period differs from ``period`` is evaluated as its restriction to
    one period repeated; :attr:`closure_residual` measures the resulting jump.
    """

    kind: str
    period: float
    c0: float = 0.0
    c1: float = 0.0
    omega: float = 1.0
    phase: float = 0.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown function kind {self.kind!r}; expected one of {KINDS}")
        if not (math.isfinite(self.period) and self.period > 0):
            raise ConfigError(f"period must be positive and finite, got {self.period!r}")
        for name in ("c0", "c1", "omega", "phase"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.kind == "sampled":
            self._check_table()

    def _check_table(self):
        if len(self.table) < 2:
            raise ConfigError("sampled table needs at least two (t, value) rows")
        t = np.array([row[0] for row in self.table], dtype=float)
        v = np.array([row[1] for row in self.table], dtype=float)
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ConfigError("sampled table contains non-finite entries")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("sampled table times must be strictly increasing")
        if t[0] != 0.0 or not math.isclose(t[-1], self.period, rel_tol=1e-12):
            raise ConfigError(
                f"sampled table must span [0, {self.period}], got [{t[0]}, {t[-1]}]"
            )
        if not math.isclose(v[0], v[-1], rel_tol=1e-12, abs_tol=1e-12):
            raise ConfigError("sampled table is not periodically closed (first value != last)")

    # constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value: float, period: float = 1.0) -> "PeriodicFn":
        return cls("constant", period, c0=float(value))

    @classmethod
    def affine_sin(cls, c0, c1, omega, phase=0.0, period=None) -> "PeriodicFn":
        if period is None:
            period = 2.0 * math.pi / abs(omega)
        return cls("affine_sin", float(period), c0=float(c0), c1=float(c1),
                   omega=float(omega), phase=float(phase))

    @classmethod
    def affine_abs_sin(cls, c0, c1, omega=1.0, period=None) -> "PeriodicFn":
        if period is None:
            period = math.pi / abs(omega)
        return cls("affine_abs_sin", float(period), c0=float(c0), c1=float(c1), omega=float(omega))

    @classmethod
    def sampled(cls, rows: Sequence[Sequence[float]], period: float | None = None) -> "PeriodicFn":
        table = tuple((float(t), float(v)) for t, v in rows)
        if not table:
            raise ConfigError("sampled table is empty")
        if period is None:
            period = table[-1][0]
        return cls("sampled", float(period), table=table)

    def with_period(self, period: float) -> "PeriodicFn":
        """Same function declared with another period (constants only)."""
        if self.kind != "constant":
            raise ConfigError(f"cannot re-period a {self.kind} function")
        return PeriodicFn.constant(self.c0, period)

    # evaluation ---------------------------------------------------------

    def _raw(self, t: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full_like(t, self.c0)
        if self.kind == "affine_sin":
            return self.c0 + self.c1 * np.sin(self.omega * t + self.phase)
        if self.kind == "affine_abs_sin":
            return self.c0 + self.c1 * np.abs(np.sin(self.omega * t))
        tt, vv = zip(*self.table)
        return np.interp(t, tt, vv)

    def _raw_deriv(self, t: np.ndarray, left: np.ndarray | bool = False) -> np.ndarray:
        if self.kind == "constant":
            return np.zeros_like(t)
        if self.kind == "affine_sin":
            return self.c1 * self.omega * np.cos(self.omega * t + self.phase)
        if self.kind == "affine_abs_sin":
            s = np.sin(self.omega * t)
            c = np.cos(self.omega * t)
            # one-sided derivative at the kinks sin(omega t) = 0
            kink = np.sign(c * self.omega) * np.where(left, -1.0, 1.0)
            sign = np.where(np.abs(s) < _KINK_TOL, kink, np.sign(s))
            return self.c1 * self.omega * c * sign
        step = self.period * 1e-6
        return (self(t + self.period + step) - self(t + self.period - step)) / (2.0 * step)

    @staticmethod
    def _times(t) -> tuple[np.ndarray, bool]:
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0):
            raise ValueError("periodic functions are evaluated for t >= 0 only")
        return arr, arr.ndim == 0

    def _phase(self, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Phase in ``(0, period]`` for ``t > 0`` and ``0`` at ``t = 0``.

        Positive multiples of the period map to ``period`` itself, i.e. the
        limit from inside the preceding period. Integrals over ``[0, T]`` then
        see the interior limits at both ends even when the formula does not
        close up exactly.
        """
        phase = np.mod(arr, self.period)
        tol = _KINK_TOL * self.period
        left = (arr > 0) & ((phase < tol) | (self.period - phase < tol))
        return np.where(left, self.period, phase), left

    def __call__(self, t):
        """Value at ``t >= 0`` (left limit at positive multiples of the period)."""
        arr, scalar = self._times(t)
        phase, _ = self._phase(arr)
        out = self._raw(phase)
        return float(out) if scalar else out

    def derivative(self, t):
        """Exact derivative for closed forms; central difference with step
        ``period * 1e-6`` for sampled tables.

        At |sin| kinks the right derivative is used, except at positive
        multiples of the period where the left derivative is returned.
        """
        arr, scalar = self._times(t)
        phase, left = self._phase(arr)
        out = self._raw_deriv(phase, left)
        return float(out) if scalar else out

    def range_over_period(self, samples: int = 1000) -> tuple[float, float]:
        """``(min, max)`` over one period: exact for closed forms whose argument
        sweeps a full cycle, sampled otherwise."""
        sweep = abs(self.omega) * self.period
        if self.kind == "constant":
            return self.c0, self.c0
        if self.kind == "affine_sin" and sweep >= 2 * math.pi:
            return self.c0 - abs(self.c1), self.c0 + abs(self.c1)
        if self.kind == "affine_abs_sin" and sweep >= math.pi:
            return self.c0 + min(0.0, self.c1), self.c0 + max(0.0, self.c1)
        return extrema_over_period(self, self.period, samples)

    @property
    def closure_residual(self) -> float:
        """``|f(T-) - f(0)|`` for the underlying formula; zero when truly T-periodic."""
        ends = self._raw(np.array([0.0, self.period]))
        return float(abs(ends[1] - ends[0]))

    # serialization ------------------------------------------------------

    def to_spec(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.c0}
        if self.kind == "affine_sin":
            return {"kind": "affine_sin", "c0": self.c0, "c1": self.c1,
                    "omega": self.omega, "phase": self.phase}
        if self.kind == "affine_abs_sin":
            return {"kind": "affine_abs_sin", "c0": self.c0, "c1": self.c1, "omega": self.omega}
        return {"kind": "sampled", "table": [list(row) for row in self.table]}

    @classmethod
    def from_spec(cls, spec, period: float) -> "PeriodicFn":
        """Build from a config value: a bare number or a ``{"kind": ...}`` mapping."""
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            return cls.constant(spec, period)
        if not isinstance(spec, dict) or "kind" not in spec:
            raise ConfigError(f"invalid function spec {spec!r}")
        kind = spec["kind"]
        if kind == "constant":
            return cls.constant(spec["value"], period)
        if kind == "affine_sin":
            return cls.affine_sin(spec["c0"], spec["c1"], spec["omega"], spec.get("phase", 0.0), period)
        if kind == "affine_abs_sin":
            return cls.affine_abs_sin(spec["c0"], spec["c1"], spec.get("omega", 1.0), period)
        if kind == "sampled":
            return cls.sampled(spec["table"], period)
        raise ConfigError(f"unknown function kind {kind!r}")


def extrema_over_period(g: Callable, period: float, samples: int = 1000) -> tuple[float, float]:
    """``(min, max)`` of ``g`` over ``samples`` uniform points on ``[0, period]``."""
    if samples < 1000:
        raise ValueError(f"samples must be >= 1000, got {samples}")
    t = np.linspace(0.0, period, samples)
    values = np.asarray(g(t), dtype=float)
    values = np.broadcast_to(values, t.shape)
    if not np.all(np.isfinite(values)):
        raise NumericalError("non-finite value while scanning for extrema")
    return float(values.min()), float(values.max())


@dataclass(frozen=True)
class EvolutionLaw:
    """Isotropic scale factor ``rho(t)`` with ``rho(0) = 1``; ``n`` is the space dimension."""

    rho: PeriodicFn
    n: int = 1

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigError(f"dimension n must be a positive integer, got {self.n!r}")
        if not math.isclose(self.rho(0.0), 1.0, abs_tol=1e-12):
            raise ConfigError(f"rho(0) must equal 1, got {self.rho(0.0)!r}")
        lo = min(extrema_over_period(self.rho, self.period, _CHECK_SAMPLES)[0],
                 self.rho.range_over_period(_CHECK_SAMPLES)[0])
        if lo <= 0:
            raise DomainCollapseError(f"rho(t) must stay positive; min over a period is {lo!r}")

    @property
    def period(self) -> float:
        return self.rho.period

    @property
    def periodicity_residual(self) -> float:
        return self.rho.closure_residual

    def dilution(self, t):
        return dilution(self, t)

    @classmethod
    def fixed(cls, period: float = 1.0, n: int = 1) -> "EvolutionLaw":
        return cls(PeriodicFn.constant(1.0, period), n)


def dilution(law: EvolutionLaw, t):
    """Dilution coefficient ``n * rho'(t) / rho(t)``."""
    r = law.rho(t)
    if np.any(np.asarray(r) <= 0):
        raise DomainCollapseError(f"rho(t) <= 0 at t={t!r}")
    return law.n * law.rho.derivative(t) / r


@dataclass(frozen=True)
class ModelParams:
    d1: float
    d2: float
    a1: PeriodicFn
    a2: PeriodicFn
    b1: PeriodicFn
    b2: PeriodicFn
    c1: PeriodicFn
    c2: PeriodicFn
    law: EvolutionLaw
    interval: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        for name in ("d1", "d2"):
            d = getattr(self, name)
            if not (math.isfinite(d) and d > 0):
                raise ConfigError(f"{name} must be positive, got {d!r}")
        left, right = self.interval
        if not (math.isfinite(left) and math.isfinite(right) and left < right):
            raise ConfigError(f"interval must satisfy left < right, got {self.interval!r}")
        T = self.law.period
        for name in ("a1", "a2", "b1", "b2", "c1", "c2"):
            fn = getattr(self, name)
            if not math.isclose(fn.period, T, rel_tol=1e-12):
                raise ConfigError(f"{name} has period {fn.period}, evolution law has {T}")
            lo, _ = extrema_over_period(fn, T, _CHECK_SAMPLES)
            # b = 0 decouples the species and is allowed
            if lo < 0 or (lo == 0 and not name.startswith("b")):
                kind = "nonnegative" if name.startswith("b") else "positive"
                raise ConfigError(f"{name} must be {kind} over the period; min is {lo!r}")

    @property
    def period(self) -> float:
        return self.law.period

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    def species(self, i: int) -> tuple[float, PeriodicFn, PeriodicFn, PeriodicFn]:
        """``(d_i, a_i, b_i, c_i)`` for species ``i`` in {1, 2}."""
        if i == 1:
            return self.d1, self.a1, self.b1, self.c1
        if i == 2:
            return self.d2, self.a2, self.b2, self.c2
        raise ValueError(f"species must be 1 or 2, got {i!r}")


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``N`` interior nodes; the two boundary nodes carry 0."""

    interval: tuple[float, float]
    N: int

    def __post_init__(self):
        if self.N < 3:
            raise ConfigError(f"grid needs N >= 3 interior nodes, got {self.N}")
        if not self.interval[0] < self.interval[1]:
            raise ConfigError(f"invalid interval {self.interval!r}")

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    @property
    def h(self) -> float:
        return self.length / (self.N + 1)

    @property
    def y(self) -> np.ndarray:
        """Interior nodes."""
        return self.interval[0] + self.h * np.arange(1, self.N + 1)

    @property
    def y_full(self) -> np.ndarray:
        """All nodes, boundary included."""
        return self.interval[0] + self.h * np.arange(self.N + 2)

    def neg_laplacian(self, v: np.ndarray, boundary: float = 0.0) -> np.ndarray:
        """Three-point ``-Delta_h v`` on interior values ``v`` (last axis)."""
        padded = np.concatenate(
            [np.full(v.shape[:-1] + (1,), boundary), v, np.full(v.shape[:-1] + (1,), boundary)],
            axis=-1,
        )
        return (2.0 * padded[..., 1:-1] - padded[..., :-2] - padded[..., 2:]) / self.h**2

    def pad(self, v: np.ndarray, boundary: float = 0.0) -> np.ndarray:
        """Append boundary values to interior data (last axis)."""
        edge = np.full(v.shape[:-1] + (1,), boundary)
        return np.concatenate([edge, v, edge], axis=-1)

    def discrete_lambda0(self) -> float:
        """Closed-form smallest eigenvalue of the three-point Dirichlet stencil."""
        return 2.0 / self.h**2 * (1.0 - math.cos(math.pi * self.h / self.length))


@dataclass(frozen=True)
class Eigenpair:
    lambda0: float
    psi0: np.ndarray = field(repr=False)
    residual: float = 0.0
    iterations: int = 0


def principal_eigenpair(grid: Grid, tol: float = 1e-12, max_iter: int = 10_000) -> Eigenpair:
    """Smallest eigenpair of ``-Delta_h`` by inverse power iteration (shift 0).

    The tridiagonal matrix is LU-factored once; each sweep is one solve.
    Stops when successive Rayleigh quotients agree to ``tol`` (relative) and
    the eigen-residual has reached round-off level.
    """
    N, h2 = grid.N, grid.h**2
    diag = np.full(N, 2.0 / h2)
    off = np.full(N - 1, -1.0 / h2)
    dl, d, du, du2, ipiv, info = lapack.dgttrf(off, diag, off)
    if info != 0:
        raise NumericalError(f"tridiagonal factorization failed (info={info})")
    # round-off floor for the residual: ||A|| * eps
    resid_tol = max(1e-10, 64 * np.finfo(float).eps * 4.0 / h2)

    x = np.ones(N)
    lam_prev = math.inf
    residual = math.inf
    for it in range(1, max_iter + 1):
        y, info = lapack.dgttrs(dl, d, du, du2, ipiv, x)
        if info != 0:
            raise NumericalError(f"tridiagonal solve failed (info={info})")
        x = y / np.max(np.abs(y))
        ax = grid.neg_laplacian(x)
        lam = float(x @ ax / (x @ x))
        residual = float(np.max(np.abs(ax - lam * x)))
        if abs(lam - lam_prev) < tol * max(1.0, abs(lam)) and residual <= resid_tol:
            break
        lam_prev = lam
    else:
        raise NumericalError(
            f"inverse iteration did not converge in {max_iter} iterations (residual {residual:.3e})"
        )
    psi = x * np.sign(x[N // 2])
    if np.any(psi <= 0):
        raise NumericalError("principal eigenvector is not strictly positive")
    return Eigenpair(lam, psi / psi.max(), residual, it)


@dataclass(frozen=True)
class PeriodicEigenfunction:
    """Separable eigenfunction ``phi(y, t) = psi0(y) * g(t)`` sampled on ``times``."""

    times: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    psi0: np.ndarray = field(repr=False)
    lam: float
    residual: float

    def values(self) -> np.ndarray:
        """``(len(times), N)`` array of ``phi``."""
        return np.outer(self.g, self.psi0)


def periodic_eigenfunction(
    params: ModelParams,
    species: int,
    pair: Eigenpair,
    times: np.ndarray | None = None,
    nodes: int = DEFAULT_NODES,
    form: Literal["eigenvalue", "reproduction"] = "eigenvalue",
) -> PeriodicEigenfunction:
    """Principal periodic-parabolic eigenfunction of the linearization at zero.

    ``form="eigenvalue"`` gives the profile with a constant eigenvalue shift,
    ``g' = (a - n rho'/rho - d lambda0 / rho^2 + lam) g``.
    ``form="reproduction"`` replaces ``a + lam`` by ``a / R`` (the eigenproblem
    whose eigenvalue is the reproduction index); the two coincide for
    constant ``a``. ``g`` is scaled so its maximum over ``times`` is 1.
    """
    from .indexes import principal_lambda, reproduction_index

    d, a, _, _ = params.species(species)
    law = params.law
    T = params.period
    if times is None:
        times = np.linspace(0.0, T, nodes + 1)
    times = np.asarray(times, dtype=float)
    lam0 = pair.lambda0

    if form == "eigenvalue":
        lam = principal_lambda(params, lam0, species, nodes)

        def rate(t):
            return a(t) - dilution(law, t) - d * lam0 / law.rho(t) ** 2 + lam
    elif form == "reproduction":
        lam = reproduction_index(params, lam0, species, nodes)

        def rate(t):
            return a(t) / lam - dilution(law, t) - d * lam0 / law.rho(t) ** 2
    else:
        raise ValueError(f"unknown form {form!r}")

    exponent = cumulative_simpson(rate, times)
    # periodicity of the profile: integrate over exactly one period
    over_period = cumulative_simpson(rate, np.linspace(0.0, T, nodes + 1))[-1]
    residual = abs(math.expm1(over_period))
    if residual > 1e-6:
        warnings.warn(
            f"periodic eigenfunction for species {species} is not T-periodic "
            f"(|g(T)-g(0)|/g(0) = {residual:.3e}); the evolution law is likely not {T}-periodic",
            RuntimeWarning,
            stacklevel=2,
        )
    g = np.exp(exponent - exponent.max())
    return PeriodicEigenfunction(times, g, pair.psi0, lam, residual)
