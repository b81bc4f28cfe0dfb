"""Coupled upper/lower solutions and monotone iteration for periodic solutions.

Substituting ``v3 = M - v2`` turns the competition system into a cooperative
(quasimonotone nondecreasing) one in ``(v1, v3)``. With Lipschitz constants
``k1, k2`` the iteration solves, for each iterate m,

    V1_t - D1 V1_yy + k1 V1 = k1 V1' + f1(V1', M - V3')
    V3_t - D2 V3_yy + k2 V3 = k2 V3' - f2(V1', M - V3')

where primes denote iterate m-1. Starting from an upper pair the iterates
decrease, from a lower pair they increase, and each stays ordered.

Order convention: "upper" and "lower" always refer to the ``(V1, V3)``
order. Converted back, the upper sequence carries the largest v1 and the
smallest v2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .core import Eigenpair, Grid, ModelParams, dilution, extrema_over_period, periodic_eigenfunction, principal_eigenpair
from .dynamics import CoefficientTable, InitialCondition, StatePair, StepperConfig
from .errors import ConfigError, InternalError, MonotonicityError
from .indexes import SIDE_SAMPLES, bound_constants, reproduction_index
from .quadrature import DEFAULT_NODES


@dataclass(frozen=True)
class LipschitzConstants:
    k1: float
    k2: float


def lipschitz_constants(params: ModelParams, samples: int = SIDE_SAMPLES) -> LipschitzConstants:
    """``k1 = a1^M + (b1^M + 2 c1^M) a1^M/c1^m + b1^M a2^M/c2^m + n |rho'|^M / rho^m`` and symmetric ``k2``."""
    law = params.law
    T = law.period

    def ext(fn):
        return extrema_over_period(fn, T, samples)

    a1m, a1M = ext(params.a1)
    a2m, a2M = ext(params.a2)
    _, b1M = ext(params.b1)
    _, b2M = ext(params.b2)
    c1m, c1M = ext(params.c1)
    c2m, c2M = ext(params.c2)
    if c1m <= 0 or c2m <= 0:
        raise ConfigError("intraspecific competition c_i must be positive")
    rho_min, _ = ext(law.rho)
    _, rate_max = ext(lambda t: np.abs(law.rho.derivative(t)))
    dil = law.n * rate_max / rho_min
    k1 = a1M + (b1M + 2 * c1M) * a1M / c1m + b1M * a2M / c2m + dil
    k2 = a2M + (b2M + 2 * c2M) * a2M / c2m + b2M * a1M / c1m + dil
    return LipschitzConstants(k1, k2)


@dataclass(frozen=True)
class TransformContext:
    M: float
    M1: float
    M2: float
    epsilon: float = 0.0
    epsilon0: float = 0.0


def transform_v3(state: StatePair, ctx: TransformContext) -> tuple[np.ndarray, np.ndarray]:
    """``(v1, v3 = M - v2)``; rejects states with ``v2`` above ``M``."""
    if np.max(state.v2, initial=-math.inf) > ctx.M * (1 + 1e-12):
        raise MonotonicityError(f"sup v2 = {np.max(state.v2)!r} exceeds the bound M = {ctx.M!r}")
    return state.v1, ctx.M - state.v2


def inverse_v3(v1: np.ndarray, v3: np.ndarray, ctx: TransformContext, t: float = 0.0) -> StatePair:
    return StatePair(v1, ctx.M - v3, t)


@dataclass(frozen=True)
class SolutionPairCandidate:
    """Candidate coupled upper/lower solutions on a uniform time grid over one period.

    All four fields are ``(len(times), N + 2)`` arrays on the full spatial
    grid, boundary nodes included.
    """

    times: np.ndarray = field(repr=False)
    upper1: np.ndarray = field(repr=False)
    upper2: np.ndarray = field(repr=False)
    lower1: np.ndarray = field(repr=False)
    lower2: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class PairCheck:
    ok: bool
    worst: float
    condition: str
    t: float
    y: float
    tol: float
    residuals: dict = field(repr=False, default_factory=dict)


def check_coupled_pair(cand: SolutionPairCandidate, params: ModelParams, grid: Grid,
                       tol: float | None = None) -> PairCheck:
    """Check the coupled upper/lower inequalities on the grid.

    Time derivatives are forward differences, the Laplacian is the
    three-point stencil using the supplied boundary values. Every condition
    is turned into a residual that must be ``>= -tol``; ``worst`` is the most
    negative one (positive when all hold with margin).
    """
    times = np.asarray(cand.times, dtype=float)
    S = times.size
    shape = (S, grid.N + 2)
    for name in ("upper1", "upper2", "lower1", "lower2"):
        if np.shape(getattr(cand, name)) != shape:
            raise ConfigError(f"{name} has shape {np.shape(getattr(cand, name))}, expected {shape}")
    T = params.period
    if S < 2 or abs(times[0]) > 1e-9 * T or abs(times[-1] - T) > 1e-9 * T:
        raise ConfigError(f"candidate times must span [0, {T}]")
    dt = np.diff(times)
    if np.any(np.abs(dt - dt[0]) > 1e-9 * T):
        raise ConfigError("candidate times must be uniform")
    U1, U2, L1, L2 = (np.asarray(getattr(cand, n), dtype=float) for n in ("upper1", "upper2", "lower1", "lower2"))
    scale = max(1.0, float(np.max(np.abs(U1))), float(np.max(np.abs(U2))))
    if tol is None:
        tol = 1e-6 * scale

    table = CoefficientTable(params, times[:-1])
    col = (slice(None), None)
    D1, D2, dil = table.D1[col], table.D2[col], table.dil[col]
    a1, a2, b1, b2, c1, c2 = (getattr(table, n)[col] for n in ("a1", "a2", "b1", "b2", "c1", "c2"))

    def parabolic(V, D):
        inner = V[:-1, 1:-1]
        lap = (V[:-1, 2:] - 2 * inner + V[:-1, :-2]) / grid.h**2
        return (V[1:, 1:-1] - inner) / dt[:, None] - D * lap

    def interior(V):
        return V[:-1, 1:-1]

    l1, l2, u1, u2 = interior(L1), interior(L2), interior(U1), interior(U2)
    res = {
        "lower1": -dil * l1 + l1 * (a1 - c1 * l1 - b1 * u2) - parabolic(L1, D1),
        "upper1": parabolic(U1, D1) - (-dil * u1 + u1 * (a1 - c1 * u1 - b1 * l2)),
        "lower2": -dil * l2 + l2 * (a2 - b2 * u1 - c2 * l2) - parabolic(L2, D2),
        "upper2": parabolic(U2, D2) - (-dil * u2 + u2 * (a2 - b2 * l1 - c2 * u2)),
        "boundary_upper1": U1[:, [0, -1]],
        "boundary_upper2": U2[:, [0, -1]],
        "boundary_lower1": -np.abs(L1[:, [0, -1]]),
        "boundary_lower2": -np.abs(L2[:, [0, -1]]),
        "periodic_lower1": (L1[-1] - L1[0])[None, :],
        "periodic_lower2": (L2[-1] - L2[0])[None, :],
        "periodic_upper1": (U1[0] - U1[-1])[None, :],
        "periodic_upper2": (U2[0] - U2[-1])[None, :],
        "order1": U1 - L1,
        "order2": U2 - L2,
        "nonneg_lower1": L1,
        "nonneg_lower2": L2,
    }
    y = grid.y_full
    worst, where = math.inf, ("", 0.0, 0.0)
    for name, r in res.items():
        k, j = np.unravel_index(np.argmin(r), r.shape)
        if r[k, j] < worst:
            worst = float(r[k, j])
            if name.startswith(("lower", "upper")):
                t, yy = times[k], y[j + 1]
            elif name.startswith("boundary"):
                t, yy = times[k], y[0] if j == 0 else y[-1]
            elif name.startswith("periodic"):
                t, yy = T, y[j]
            else:
                t, yy = times[k], y[j]
            where = (name, float(t), float(yy))
    return PairCheck(worst >= -tol, worst, where[0], where[1], where[2], tol, res)


@dataclass(frozen=True)
class InitialIterates:
    candidate: SolutionPairCandidate
    context: TransformContext
    R: tuple[float, float]
    degenerate_lower: bool
    upper_kind: tuple[str, str]


def initial_iterates(params: ModelParams, pair: Eigenpair, grid: Grid, times: np.ndarray,
                     nodes: int = DEFAULT_NODES) -> InitialIterates:
    """Coupled upper/lower pair that starts the periodic monotone iteration.

    Upper solutions are the constants ``M_i``. Lower solutions are
    ``eps * phi_i`` for species with ``R_i > 1`` (``phi_i`` the periodic
    eigenfunction whose eigenvalue is ``R_i``), ``0`` otherwise, with
    ``eps = eps0 / 2``::

        eps0 = min_t (a_j (1 - 1/R_j) - b_j * sup(upper_i)) / c_j^M

    taken over the persisting species ``j``. When exactly one species has
    ``R_i <= 1`` its constant upper is replaced by ``C_i * phi_i``, which is
    an upper solution for any ``C_i`` and lets the other species keep a
    nontrivial lower solution.
    """
    T = params.period
    times = np.asarray(times, dtype=float)
    R = tuple(reproduction_index(params, pair.lambda0, i, nodes) for i in (1, 2))
    M1, M2 = bound_constants(params)
    M = (M1, M2)
    S = times.size

    phi = {i: periodic_eigenfunction(params, i, pair, times, nodes, form="reproduction").values()
           for i in (1, 2)}

    def margin(j):
        _, a, _, _ = params.species(j)
        return lambda t: a(t) * (1.0 - 1.0 / R[j - 1])

    upper = {}
    upper_sup = {}
    kinds = []
    for i, j in ((1, 2), (2, 1)):
        if R[i - 1] <= 1.0 < R[j - 1]:
            _, _, b, _ = params.species(j)
            lo, _ = extrema_over_period(lambda t: margin(j)(t) / b(t), T, SIDE_SAMPLES)
            C = min(M[i - 1], 0.5 * lo)
            upper[i] = grid.pad(C * phi[i])
            upper_sup[i] = C
            kinds.append("eigenfunction")
        else:
            upper[i] = np.full((S, grid.N + 2), M[i - 1])
            upper_sup[i] = M[i - 1]
            kinds.append("constant")

    eps0 = math.inf
    for i, j in ((1, 2), (2, 1)):
        if R[j - 1] > 1.0:
            _, _, b, _ = params.species(j)
            _, c_max = extrema_over_period(params.species(j)[3], T, SIDE_SAMPLES)
            lo, _ = extrema_over_period(lambda t: (margin(j)(t) - b(t) * upper_sup[i]) / c_max, T, SIDE_SAMPLES)
            eps0 = min(eps0, lo)
    if not math.isfinite(eps0):
        eps0 = 0.0
    eps0 = max(eps0, 0.0)
    eps = 0.5 * eps0
    lower = {}
    for j in (1, 2):
        if R[j - 1] > 1.0 and eps > 0:
            lower[j] = grid.pad(eps * phi[j])
        else:
            lower[j] = np.zeros((S, grid.N + 2))

    cand = SolutionPairCandidate(times, upper[1], upper[2], lower[1], lower[2])
    ctx = TransformContext(M=M2, M1=M1, M2=M2, epsilon=eps, epsilon0=eps0)
    return InitialIterates(cand, ctx, R, eps <= 0, tuple(kinds))


@dataclass(frozen=True)
class IterationRecord:
    m: int
    gap_upper: float
    gap_lower: float
    gap: float
    periodicity_residual: float
    violation: float


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


@dataclass
class MonotoneResult:
    """Limits of the two monotone sequences, converted back to ``(v1, v2)``.

    ``upper_v1``/``upper_v2`` come from the sequence that decreases in
    ``(V1, V3)`` order; arrays are ``(len(times), N)`` interior values.
    """

    times: np.ndarray
    upper_v1: np.ndarray
    upper_v2: np.ndarray
    lower_v1: np.ndarray
    lower_v2: np.ndarray
    trace: IterationTrace
    converged: bool
    context: TransformContext
    max_violation: float

    @property
    def gap(self) -> float:
        return float(max(np.max(np.abs(self.upper_v1 - self.lower_v1)),
                         np.max(np.abs(self.upper_v2 - self.lower_v2))))

    @property
    def solution(self) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint of the two limits (they coincide when the solution is unique)."""
        return 0.5 * (self.upper_v1 + self.lower_v1), 0.5 * (self.upper_v2 + self.lower_v2)


class _Sweep:
    """One linear sweep of the iteration for both sequences at once.

    Columns 0 and 1 of every work array are the upper and lower sequences.
    The ``k * V`` term is advanced at the same explicit level as the frozen
    source, which keeps the fixed point identical to the direct backward-Euler
    integrator; the step is monotone as long as ``k * dt <= 1``.
    """

    def __init__(self, params, grid, table, dt, k, M):
        self.grid, self.table, self.dt, self.M = grid, table, dt, M
        self.k1, self.k2 = k.k1, k.k2
        if max(self.k1, self.k2) * dt > 1.0:
            raise ConfigError(
                f"monotone iteration needs k*dt <= 1 (k={max(self.k1, self.k2):.4g}, dt={dt:.4g}); reduce dt"
            )
        self._gtsv = lapack.dgtsv

    def run(self, old1, old3, start1, start3):
        """``old*`` are ``(S, N, 2)`` previous iterates; ``start*`` the ``(N, 2)`` initial data."""
        tb, dt, M, N = self.table, self.dt, self.M, self.grid.N
        S = old1.shape[0]
        col = (slice(None), None, None)
        # frozen sources for every time level at once
        v2 = M - old3
        src1 = old1 * (self.k1 + tb.a1[col] - tb.dil[col] - tb.c1[col] * old1 - tb.b1[col] * v2)
        src3 = self.k2 * old3 - v2 * (tb.a2[col] - tb.dil[col] - tb.b2[col] * old1 - tb.c2[col] * v2)
        src = dt * np.concatenate([src1, src3], axis=1)
        # both species share one block-diagonal tridiagonal system of size 2N
        keep = np.empty(2 * N)
        keep[:N], keep[N:] = 1.0 - dt * self.k1, 1.0 - dt * self.k2
        keep = keep[:, None]
        r1 = dt * tb.D1 / self.grid.h**2
        r2 = dt * tb.D2 / self.grid.h**2
        diag = np.empty(2 * N)
        off = np.empty(2 * N - 1)
        out = np.empty((S, 2 * N, 2))
        out[0, :N], out[0, N:] = start1, start3
        gtsv = self._gtsv
        for n in range(S - 1):
            a, b = r1[n + 1], r2[n + 1]
            diag[:N], diag[N:] = 1.0 + 2.0 * a, 1.0 + 2.0 * b
            off[:N - 1], off[N - 1], off[N:] = -a, 0.0, -b
            rhs = keep * out[n] + src[n]
            rhs[N] += b * M
            rhs[-1] += b * M
            *_, x, info = gtsv(off, diag, off, rhs)
            if info != 0:
                raise InternalError(f"singular tridiagonal system (info={info})")
            out[n + 1] = x
        return out[:, :N], out[:, N:]


def _ordering_violation(old1, old3, new1, new3) -> float:
    """Largest breach of ``lower_old <= lower_new <= upper_new <= upper_old`` in (V1, V3)."""
    worst = 0.0
    for old, new in ((old1, new1), (old3, new3)):
        worst = max(
            worst,
            float(np.max(old[..., 1] - new[..., 1])),
            float(np.max(new[..., 1] - new[..., 0])),
            float(np.max(new[..., 0] - old[..., 0])),
        )
    return worst


def _iterate(sweep, old1, old3, start, tol, max_iter, ctx, times):
    trace = IterationTrace()
    converged = False
    max_violation = 0.0
    for m in range(1, max_iter + 1):
        s1, s3 = start(old1, old3)
        new1, new3 = sweep.run(old1, old3, s1, s3)
        violation = _ordering_violation(old1, old3, new1, new3)
        max_violation = max(max_violation, violation)
        gap_upper = float(max(np.max(np.abs(new1[..., 0] - old1[..., 0])), np.max(np.abs(new3[..., 0] - old3[..., 0]))))
        gap_lower = float(max(np.max(np.abs(new1[..., 1] - old1[..., 1])), np.max(np.abs(new3[..., 1] - old3[..., 1]))))
        gap = float(max(np.max(new1[..., 0] - new1[..., 1]), np.max(new3[..., 0] - new3[..., 1])))
        periodicity = float(max(np.max(np.abs(new1[-1] - new1[0])), np.max(np.abs(new3[-1] - new3[0]))))
        trace.records.append(IterationRecord(m, gap_upper, gap_lower, gap, periodicity, violation))
        # rounding in the solves breaches the order by a few ulps of M
        if violation > max(10 * tol, 1e-12 * max(ctx.M, 1.0)):
            raise MonotonicityError(
                f"monotone ordering violated by {violation:.3e} at iteration {m}; "
                "the discretization is too coarse: halve dt and double N"
            )
        old1, old3 = new1, new3
        if max(gap_upper, gap_lower) < tol:
            converged = True
            break
    M = ctx.M
    return MonotoneResult(
        times=times,
        upper_v1=old1[..., 0].copy(), upper_v2=M - old3[..., 0],
        lower_v1=old1[..., 1].copy(), lower_v2=M - old3[..., 1],
        trace=trace, converged=converged, context=ctx, max_violation=max_violation,
    )


def monotone_iterate_periodic(
    params: ModelParams,
    grid: Grid,
    cfg: StepperConfig | None = None,
    tol: float = 1e-6,
    max_iter: int = 500,
    pair: Eigenpair | None = None,
    nodes: int = DEFAULT_NODES,
) -> MonotoneResult:
    """Monotone iteration for the periodic problem.

    Each iterate is integrated over one period starting from the previous
    iterate's value at ``T``. Stops when both sequences move less than
    ``tol`` in sup norm between iterations.
    """
    cfg = cfg or StepperConfig()
    pair = pair or principal_eigenpair(grid)
    n_steps, dt = cfg.steps_for(params.period)
    times = dt * np.arange(n_steps + 1)
    init = initial_iterates(params, pair, grid, times, nodes)
    ctx = init.context
    M = ctx.M
    cand = init.candidate
    old1 = np.stack([cand.upper1[:, 1:-1], cand.lower1[:, 1:-1]], axis=-1)
    old3 = np.stack([M - cand.lower2[:, 1:-1], M - cand.upper2[:, 1:-1]], axis=-1)
    table = CoefficientTable(params, times)
    sweep = _Sweep(params, grid, table, dt, lipschitz_constants(params), M)
    return _iterate(sweep, old1, old3, lambda o1, o3: (o1[-1], o3[-1]), tol, max_iter, ctx, times)


def monotone_iterate_ivp(
    params: ModelParams,
    ic: InitialCondition,
    grid: Grid,
    cfg: StepperConfig | None = None,
    tol: float = 1e-6,
    max_iter: int = 500,
    t_end: float | None = None,
) -> MonotoneResult:
    """Monotone iteration for the initial-boundary value problem on ``[0, t_end]``.

    Both sequences start from constants, ``(max(M1, sup v1_0), M)`` above and
    ``(0, 0)`` below in ``(V1, V3)``, and are pinned to the initial data at
    ``t = 0`` in every sweep. ``t_end`` defaults to ``cfg.t_end``.
    """
    cfg = cfg or StepperConfig()
    t_end = cfg.t_end if t_end is None else t_end
    n_steps, dt = cfg.steps_for(t_end)
    times = dt * np.arange(n_steps + 1)
    v10, v20 = ic.fields(grid)
    M1, M2 = bound_constants(params)
    M = max(M2, float(np.max(v20)))
    top1 = max(M1, float(np.max(v10)))
    ctx = TransformContext(M=M, M1=M1, M2=M2)
    _, v30 = transform_v3(StatePair(v10, v20), ctx)
    S = times.size
    old1 = np.zeros((S, grid.N, 2))
    old1[..., 0] = top1
    old3 = np.zeros((S, grid.N, 2))
    old3[..., 0] = M
    table = CoefficientTable(params, times)
    sweep = _Sweep(params, grid, table, dt, lipschitz_constants(params), M)
    start1 = np.stack([v10, v10], axis=-1)
    start3 = np.stack([v30, v30], axis=-1)
    return _iterate(sweep, old1, old3, lambda o1, o3: (start1, start3), tol, max_iter, ctx, times)
