"""Time integration of the competition system on the fixed reference interval.

    v_i,t = d_i / rho(t)^2 * v_i,yy + f_i(t, v1, v2)
    f_1   = v1 (a1 - c1 v1 - b1 v2) - n rho'/rho * v1
    f_2   = v2 (a2 - b2 v1 - c2 v2) - n rho'/rho * v2

with homogeneous Dirichlet data. Diffusion is implicit (tridiagonal solve),
reaction and dilution explicit. Solutions on the physical domain follow by
``u_i(rho(t) y, t) = v_i(y, t)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.linalg import lapack

from .core import EvolutionLaw, Grid, ModelParams, dilution
from .errors import BlowUpError, ConfigError, InternalError

SCHEMES = ("imex_be", "imex_cn")
IC_KINDS = ("sine_bump", "sampled", "constant_clipped")
BLOWUP_LEVEL = 1e6


@dataclass(frozen=True)
class StepperConfig:
    dt: float = 1e-3
    t_end: float = 60.0
    scheme: str = "imex_be"
    record_every: int = 100

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= self.dt):
            raise ConfigError(f"t_end must be >= dt, got {self.t_end!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ConfigError(f"record_every must be a positive integer, got {self.record_every!r}")

    def steps_for(self, span: float) -> tuple[int, float]:
        """Number of steps covering ``span`` and the adjusted step that divides it evenly."""
        n = max(1, math.ceil(span / self.dt - 1e-9))
        return n, span / n


@dataclass(frozen=True)
class InitialCondition:
    """Initial densities; ``sine_bump`` and ``constant_clipped`` use the same data for both species."""

    kind: str = "sine_bump"
    amplitude: float = 5.0
    value: float = 0.0
    v1: tuple[float, ...] | None = None
    v2: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in IC_KINDS:
            raise ConfigError(f"initial condition kind must be one of {IC_KINDS}, got {self.kind!r}")
        if self.kind == "sine_bump" and not self.amplitude >= 0:
            raise ConfigError("sine_bump amplitude must be nonnegative")
        if self.kind == "constant_clipped" and not self.value >= 0:
            raise ConfigError("constant_clipped value must be nonnegative")
        if self.kind == "sampled":
            if self.v1 is None or self.v2 is None:
                raise ConfigError("sampled initial condition needs both v1 and v2")
            for name in ("v1", "v2"):
                arr = np.asarray(getattr(self, name), dtype=float)
                if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                    raise ConfigError(f"sampled initial {name} must be finite and nonnegative")

    def fields(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "sine_bump":
            bump = self.amplitude * np.sin(math.pi * (grid.y - grid.interval[0]) / grid.length)
            return bump.copy(), bump.copy()
        if self.kind == "constant_clipped":
            # boundary nodes are not unknowns, so clipping there is implicit
            return np.full(grid.N, self.value), np.full(grid.N, self.value)
        v1 = np.asarray(self.v1, dtype=float)
        v2 = np.asarray(self.v2, dtype=float)
        if v1.shape != (grid.N,) or v2.shape != (grid.N,):
            raise ConfigError(f"sampled initial fields must have {grid.N} interior values")
        return v1.copy(), v2.copy()


@dataclass(frozen=True)
class StatePair:
    v1: np.ndarray = field(repr=False)
    v2: np.ndarray = field(repr=False)
    t: float = 0.0


@dataclass
class Trajectory:
    grid: Grid
    states: list[StatePair] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def v1(self) -> np.ndarray:
        return np.array([s.v1 for s in self.states])

    @property
    def v2(self) -> np.ndarray:
        return np.array([s.v2 for s in self.states])

    def __len__(self):
        return len(self.states)

    def __iter__(self) -> Iterator[StatePair]:
        return iter(self.states)


def reaction(params: ModelParams, t, v1, v2):
    """Reaction plus dilution terms ``(f1, f2)`` at time ``t``."""
    dil = dilution(params.law, t)
    f1 = v1 * (params.a1(t) - params.c1(t) * v1 - params.b1(t) * v2) - dil * v1
    f2 = v2 * (params.a2(t) - params.b2(t) * v1 - params.c2(t) * v2) - dil * v2
    return f1, f2


class CoefficientTable:
    """All time-dependent coefficients sampled once on a time grid."""

    def __init__(self, params: ModelParams, times: np.ndarray):
        times = np.asarray(times, dtype=float)
        law = params.law
        self.times = times
        self.params = params
        self.inv_rho2 = law.rho(times) ** -2
        self.dil = dilution(law, times)
        self.a1, self.a2 = params.a1(times), params.a2(times)
        self.b1, self.b2 = params.b1(times), params.b2(times)
        self.c1, self.c2 = params.c1(times), params.c2(times)
        self.D1 = params.d1 * self.inv_rho2
        self.D2 = params.d2 * self.inv_rho2

    def reaction(self, k: int, v1, v2):
        dil = self.dil[k]
        f1 = v1 * (self.a1[k] - self.c1[k] * v1 - self.b1[k] * v2) - dil * v1
        f2 = v2 * (self.a2[k] - self.b2[k] * v1 - self.c2[k] * v2) - dil * v2
        return f1, f2


def implicit_diffusion_solve(grid: Grid, coef: float, rhs: np.ndarray, boundary: float = 0.0) -> np.ndarray:
    """Solve ``(I - coef * Delta_h) x = rhs`` with Dirichlet value ``boundary``.

    ``rhs`` may be ``(N,)`` or ``(N, k)`` for several right-hand sides.
    """
    r = coef / grid.h**2
    N = grid.N
    off = np.full(N - 1, -r)
    diag = np.full(N, 1.0 + 2.0 * r)
    b = np.array(rhs, dtype=float, copy=True)
    if boundary:
        b[0] += r * boundary
        b[-1] += r * boundary
    *_, x, info = lapack.dgtsv(off, diag, off, b)
    if info != 0:
        raise InternalError(f"singular tridiagonal system (info={info})")
    return x


def _explicit_diffusion(grid: Grid, coef: float, v: np.ndarray) -> np.ndarray:
    """``(I + coef * Delta_h) v`` with zero Dirichlet data."""
    return v - coef * grid.neg_laplacian(v)


def _check_state(v1, v2, t):
    peak = max(np.max(np.abs(v1)), np.max(np.abs(v2)))
    if not math.isfinite(peak) or peak > BLOWUP_LEVEL:
        raise BlowUpError(f"solution blew up at t={t!r} (sup={peak!r}); reduce dt", t)


def _advance(grid, table: CoefficientTable, k: int, dt: float, scheme: str, v1, v2):
    """One step from table row ``k`` to row ``k + 1``."""
    f1, f2 = table.reaction(k, v1, v2)
    if scheme == "imex_be":
        n1 = implicit_diffusion_solve(grid, dt * table.D1[k + 1], v1 + dt * f1)
        n2 = implicit_diffusion_solve(grid, dt * table.D2[k + 1], v2 + dt * f2)
        return n1, n2
    # Crank-Nicolson diffusion with averaged coefficient; Heun (explicit trapezoid) reaction
    h1 = 0.25 * dt * (table.D1[k] + table.D1[k + 1])
    h2 = 0.25 * dt * (table.D2[k] + table.D2[k + 1])
    e1 = _explicit_diffusion(grid, h1, v1)
    e2 = _explicit_diffusion(grid, h2, v2)
    p1 = implicit_diffusion_solve(grid, h1, e1 + dt * f1)
    p2 = implicit_diffusion_solve(grid, h2, e2 + dt * f2)
    g1, g2 = table.reaction(k + 1, p1, p2)
    n1 = implicit_diffusion_solve(grid, h1, e1 + 0.5 * dt * (f1 + g1))
    n2 = implicit_diffusion_solve(grid, h2, e2 + 0.5 * dt * (f2 + g2))
    return n1, n2


def step(state: StatePair, params: ModelParams, cfg: StepperConfig, grid: Grid) -> StatePair:
    """Advance ``state`` by one step of size ``cfg.dt``."""
    if state.v1.shape != (grid.N,) or state.v2.shape != (grid.N,):
        raise ConfigError("state does not live on this grid")
    table = CoefficientTable(params, np.array([state.t, state.t + cfg.dt]))
    n1, n2 = _advance(grid, table, 0, cfg.dt, cfg.scheme, state.v1, state.v2)
    _check_state(n1, n2, state.t + cfg.dt)
    return StatePair(n1, n2, state.t + cfg.dt)


def stability_guard(params: ModelParams, dt: float) -> float:
    """``dt * max(k1, k2)``; warns when above 0.5."""
    from .monotone import lipschitz_constants

    k = lipschitz_constants(params)
    value = dt * max(k.k1, k.k2)
    if value > 0.5:
        warnings.warn(
            f"explicit reaction may be unstable: dt*max(k1,k2) = {value:.3g} > 0.5",
            RuntimeWarning,
            stacklevel=2,
        )
    return value


def simulate(params: ModelParams, ic: InitialCondition, cfg: StepperConfig, grid: Grid) -> Trajectory:
    """Integrate from t=0 to ``cfg.t_end`` recording every ``cfg.record_every`` steps.

    The step is shrunk slightly, if needed, so that ``t_end`` is hit exactly.
    On blow-up the raised :class:`BlowUpError` carries the partial trajectory.
    """
    stability_guard(params, cfg.dt)
    n_steps, dt = cfg.steps_for(cfg.t_end)
    table = CoefficientTable(params, dt * np.arange(n_steps + 1))
    v1, v2 = ic.fields(grid)
    traj = Trajectory(grid, [StatePair(v1, v2, 0.0)])
    for k in range(n_steps):
        v1, v2 = _advance(grid, table, k, dt, cfg.scheme, v1, v2)
        t = float(table.times[k + 1])
        try:
            _check_state(v1, v2, t)
        except BlowUpError as err:
            err.partial = traj
            raise
        if (k + 1) % cfg.record_every == 0 or k + 1 == n_steps:
            traj.states.append(StatePair(v1, v2, t))
    return traj


@dataclass(frozen=True)
class EvolvingSamples:
    """Snapshots on the physical domain, boundary nodes included.

    Arrays are ``(snapshots, N + 2)``; ``u`` at ``x = rho(t) * y`` equals ``v`` at ``y``.
    """

    t: np.ndarray
    y: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    x: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    def rows(self) -> Iterator[tuple[float, float, float, float, float, float, float]]:
        """Long-format rows ``(t, y, v1, v2, x, u1, u2)`` grouped by time, nodes ascending."""
        for s, t in enumerate(self.t):
            for j, y in enumerate(self.y):
                yield (float(t), float(y), float(self.v1[s, j]), float(self.v2[s, j]),
                       float(self.x[s, j]), float(self.u1[s, j]), float(self.u2[s, j]))


def pullback(traj: Trajectory, law: EvolutionLaw) -> EvolvingSamples:
    grid = traj.grid
    t = traj.times
    y = grid.y_full
    v1 = grid.pad(traj.v1) if len(traj) else np.zeros((0, y.size))
    v2 = grid.pad(traj.v2) if len(traj) else np.zeros((0, y.size))
    x = np.outer(law.rho(t), y) if len(traj) else np.zeros((0, y.size))
    return EvolvingSamples(t, y, v1, v2, x, v1.copy(), v2.copy())


@dataclass
class PeriodicAttractor:
    """Last integrated period of the direct Poincare iteration.

    ``v1``/``v2`` hold every time step of that period (``steps + 1`` rows,
    phase times in ``times``); ``trajectory`` keeps every ``record_every``-th.
    """

    times: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    residual: float
    converged: bool
    periods: int
    history: list[float]
    trajectory: Trajectory


def integrate_one_period(grid, table, dt, scheme, v1, v2, out1=None, out2=None):
    """Run ``len(table.times) - 1`` steps; optionally store every state into ``out1``/``out2``."""
    n_steps = len(table.times) - 1
    if out1 is not None:
        out1[0], out2[0] = v1, v2
    for k in range(n_steps):
        v1, v2 = _advance(grid, table, k, dt, scheme, v1, v2)
        _check_state(v1, v2, float(table.times[k + 1]))
        if out1 is not None:
            out1[k + 1], out2[k + 1] = v1, v2
    return v1, v2


def periodic_attractor(
    params: ModelParams,
    ic: InitialCondition,
    cfg: StepperConfig,
    grid: Grid,
    tol: float = 1e-6,
    max_periods: int = 500,
    initial: tuple[np.ndarray, np.ndarray] | None = None,
) -> PeriodicAttractor:
    """Iterate the period map until ``||v((m+1)T) - v(mT)||_inf < tol``.

    ``initial`` overrides ``ic`` with explicit interior fields. Returns the
    final period's states; ``converged`` is False when ``max_periods`` ran out.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    T = params.period
    n_steps, dt = cfg.steps_for(T)
    table = CoefficientTable(params, dt * np.arange(n_steps + 1))
    v1, v2 = (np.array(initial[0], float), np.array(initial[1], float)) if initial else ic.fields(grid)
    buf1 = np.empty((n_steps + 1, grid.N))
    buf2 = np.empty((n_steps + 1, grid.N))
    history: list[float] = []
    converged = False
    residual = math.inf
    for m in range(1, max_periods + 1):
        n1, n2 = integrate_one_period(grid, table, dt, cfg.scheme, v1, v2, buf1, buf2)
        residual = float(max(np.max(np.abs(n1 - v1)), np.max(np.abs(n2 - v2))))
        history.append(residual)
        v1, v2 = n1, n2
        if residual < tol:
            converged = True
            break
    idx = list(range(0, n_steps + 1, cfg.record_every))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    traj = Trajectory(grid, [StatePair(buf1[k].copy(), buf2[k].copy(), float(table.times[k])) for k in idx])
    return PeriodicAttractor(table.times.copy(), buf1, buf2, residual, converged, m, history, traj)
