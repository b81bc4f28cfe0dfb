import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evodom.core import EvolutionLaw, Grid, ModelParams, PeriodicFn
from evodom.dynamics import CoefficientTable, InitialCondition, StatePair, StepperConfig, periodic_attractor, simulate
from evodom.errors import ConfigError, MonotonicityError
from evodom.indexes import bound_constants
from evodom.monotone import (
    SolutionPairCandidate,
    TransformContext,
    check_coupled_pair,
    initial_iterates,
    inverse_v3,
    lipschitz_constants,
    monotone_iterate_ivp,
    monotone_iterate_periodic,
    transform_v3,
)
from evodom.presets import preset

SMALL = Grid((0.0, 1.0), 29)


def make_params(d=(0.05, 0.05), a=(2.0, 1.5), b=(0.0, 0.0), c=(1.0, 1.0), law=None):
    law = law or EvolutionLaw.fixed(1.0)
    k = lambda v: PeriodicFn.constant(v, law.period)
    return ModelParams(d[0], d[1], k(a[0]), k(a[1]), k(b[0]), k(b[1]), k(c[0]), k(c[1]), law)


# Lipschitz constants ---------------------------------------------------------


def test_lipschitz_constants_examples():
    k = lipschitz_constants(make_params(a=(1.0, 1.0)))
    assert k.k1 == pytest.approx(3.0) and k.k2 == pytest.approx(3.0)
    k = lipschitz_constants(preset("example5_1"))
    assert k.k1 == pytest.approx(6.2) and k.k2 == pytest.approx(6.2)
    assert lipschitz_constants(preset("example5_1")) == k


def test_lipschitz_grows_with_a1_and_dilution():
    base = lipschitz_constants(make_params(a=(1.0, 1.0))).k1
    assert lipschitz_constants(make_params(a=(2.0, 1.0))).k1 > base
    moving = lipschitz_constants(preset("example5_2")).k1
    # max|rho'| / min rho = 0.5 for rho = 1 + 0.5|sin t|
    assert moving == pytest.approx(6.2 + 0.5)


# transform -----------------------------------------------------------------------


def test_transform_round_trip_and_bounds():
    ctx = TransformContext(M=10.0, M1=9.0, M2=10.0)
    rng = np.random.default_rng(0)
    v2 = rng.uniform(0, 10, 17)
    state = StatePair(rng.uniform(0, 9, 17), v2)
    v1, v3 = transform_v3(state, ctx)
    back = inverse_v3(v1, v3, ctx)
    np.testing.assert_allclose(back.v2, v2, rtol=0, atol=4 * np.finfo(float).eps * 10)
    _, v3 = transform_v3(StatePair(v1, np.zeros(17)), ctx)
    assert np.all(v3 == 10.0)
    with pytest.raises(MonotonicityError):
        transform_v3(StatePair(v1, np.full(17, 10.5)), ctx)


def test_bound_for_moving_preset_matches_dense_oracle():
    M1, M2 = bound_constants(preset("example5_2"))
    t = np.linspace(0, math.pi, 1_000_001)[1:-1]
    rho = 1 + 0.5 * np.abs(np.sin(t))
    assert M2 == pytest.approx(np.max((1.2 - 0.5 * np.cos(t) / rho) / 0.012), rel=1e-6)


@given(st.floats(0, 100), st.floats(0, 100), st.floats(0.01, 5), st.floats(0.01, 5),
       st.floats(0, 3.2), st.sampled_from(["example5_1", "example5_2", "example5_3"]))
def test_transformed_system_is_quasimonotone(v1, v3, dv1, dv3, t, name):
    """Raising V3 never lowers F1; raising V1 never lowers F2 (inside the box)."""
    params = preset(name)
    M1, M2 = bound_constants(params)
    M = M2
    v1, v3 = min(v1, M1), min(v3, M)
    tb = CoefficientTable(params, np.array([t]))

    def F(x1, x3):
        f1, f2 = tb.reaction(0, np.array([x1]), np.array([M - x3]))
        return f1[0], -f2[0]

    base1, base3 = F(v1, v3)
    assert F(v1, min(v3 + dv3, M))[0] >= base1 - 1e-12
    assert F(min(v1 + dv1, M1), v3)[1] >= base3 - 1e-12


# coupled upper/lower check -------------------------------------------------------


def _constant_pair(params, grid, u1, u2, samples=200):
    times = np.linspace(0.0, params.period, samples + 1)
    shape = (times.size, grid.N + 2)
    return SolutionPairCandidate(times, np.full(shape, u1), np.full(shape, u2), np.zeros(shape), np.zeros(shape))


def test_zero_lower_and_bound_upper_are_coupled_pair(grid199):
    params = preset("example5_1")
    M1, M2 = bound_constants(params)
    rep = check_coupled_pair(_constant_pair(params, grid199, M1, M2), params, grid199)
    assert rep.ok
    assert np.all(rep.residuals["lower1"] == 0) and np.all(rep.residuals["lower2"] == 0)


def test_half_bounds_fail_and_locate_violation(grid199):
    params = preset("example5_2")
    M1, M2 = bound_constants(params)
    rep = check_coupled_pair(_constant_pair(params, grid199, M1 / 2, M2 / 2), params, grid199)
    assert not rep.ok and rep.condition.startswith("upper")
    # constant upper M/2 fails where a - rho'/rho - c M/2 > 0, i.e. wherever c M/2 < a - rho'/rho
    t = rep.t
    assert 0.0 <= t <= math.pi
    assert 1.2 - params.law.dilution(t) - 0.012 * M1 / 2 > 0


def test_pair_check_rejects_mismatched_shapes(grid199):
    params = preset("example5_1")
    cand = _constant_pair(params, Grid((0, 1), 49), 1.0, 1.0)
    with pytest.raises(ConfigError):
        check_coupled_pair(cand, params, grid199)
    times = np.linspace(0, 1.0, 11)  # period is 2
    z = np.zeros((11, 201))
    with pytest.raises(ConfigError):
        check_coupled_pair(SolutionPairCandidate(times, z, z, z, z), params, grid199)


def test_pair_check_detects_nonzero_lower_boundary():
    params = preset("example5_1")
    cand = _constant_pair(params, SMALL, 100.0, 100.0)
    lower = cand.lower1.copy()
    lower[:, 0] = 0.5
    bad = SolutionPairCandidate(cand.times, cand.upper1, cand.upper2, lower, cand.lower2)
    rep = check_coupled_pair(bad, params, SMALL)
    assert not rep.ok


@pytest.mark.parametrize("name", ["example5_1", "example5_2", "example5_3"])
def test_initial_iterates_are_coupled_pair(name, grid199, pair199):
    params = preset(name)
    times = np.linspace(0.0, params.period, 1001)
    init = initial_iterates(params, pair199, grid199, times)
    assert check_coupled_pair(init.candidate, params, grid199).ok
    if name == "example5_1":
        assert init.context.epsilon > 0 and not init.degenerate_lower
        assert init.upper_kind == ("eigenfunction", "constant")
    else:
        # both-extinct case and the side-condition failure both leave a zero lower pair
        assert init.degenerate_lower
        assert np.all(init.candidate.lower1 == 0) and np.all(init.candidate.lower2 == 0)


def test_uncoupled_epsilon_formula(pair199, grid199):
    params = make_params(a=(2.0, 0.5), d=(0.05, 0.05))
    times = np.linspace(0, 1, 101)
    init = initial_iterates(params, pair199, grid199, times)
    R1 = init.R[0]
    assert R1 > 1
    # species 2 persists too here; with b = 0 the eps0 is the smaller species margin
    eps0 = min(2.0 * (1 - 1 / init.R[0]), 0.5 * (1 - 1 / init.R[1]))
    assert init.context.epsilon0 == pytest.approx(eps0, rel=1e-9)
    assert init.context.epsilon == pytest.approx(eps0 / 2)


# periodic iteration -------------------------------------------------------------


def test_extinction_example_limits_vanish():
    res = monotone_iterate_periodic(preset("example5_3"), SMALL, StepperConfig(1e-2), tol=1e-6, max_iter=2000)
    assert res.converged
    for arr in (res.upper_v1, res.upper_v2, res.lower_v1, res.lower_v2):
        assert np.max(np.abs(arr)) < 1e-4
    assert res.max_violation <= 1e-8


def test_fixed_domain_example_matches_attractor():
    params = preset("example5_1")
    cfg = StepperConfig(1e-2, 1.0, "imex_be", 10)
    res = monotone_iterate_periodic(params, SMALL, cfg, tol=1e-7, max_iter=3000)
    att = periodic_attractor(params, InitialCondition(), cfg, SMALL, tol=1e-10, max_periods=5000)
    assert res.converged and att.converged
    assert res.max_violation <= 1e-8
    for v1, v2 in ((res.upper_v1, res.upper_v2), (res.lower_v1, res.lower_v2)):
        assert np.max(np.abs(v1 - att.v1)) < 1e-5 and np.max(np.abs(v1)) < 1e-5
        assert np.max(np.abs(v2 - att.v2)) < 1e-5
    assert att.v2.min() > 0
    assert np.max(np.abs(res.lower_v2[-1] - res.lower_v2[0])) < 1e-5


def test_uncoupled_limits_coincide_and_solve_logistic_problem():
    params = make_params()
    res = monotone_iterate_periodic(params, SMALL, StepperConfig(1e-2), tol=1e-9, max_iter=3000)
    assert res.converged and res.gap < 1e-6
    for v, a in ((res.lower_v1[-1], 2.0), (res.lower_v2[-1], 1.5)):
        residual = -0.05 * SMALL.neg_laplacian(v) + v * (a - v)
        assert np.max(np.abs(residual)) < 1e-5


def test_trace_is_ordered_and_gaps_shrink():
    res = monotone_iterate_periodic(make_params(), SMALL, StepperConfig(1e-2), tol=1e-6, max_iter=3000)
    ms = res.trace.column("m")
    assert list(ms) == list(range(1, len(ms) + 1))
    gap = res.trace.column("gap")
    assert np.all(np.diff(gap) <= 1e-10)
    assert np.all(res.trace.column("violation") <= 1e-8)


def test_iteration_requires_small_k_dt():
    with pytest.raises(ConfigError):
        monotone_iterate_periodic(preset("example5_1"), SMALL, StepperConfig(0.5), max_iter=1)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_sandwich_between_iterates(m):
    """A solution started between the m-th iterates stays between them in every later period."""
    params = preset("example5_1")
    cfg = StepperConfig(1e-2, 3 * params.period, "imex_be", 1)
    res = monotone_iterate_periodic(params, SMALL, cfg, tol=0.0, max_iter=m)
    assert len(res.trace) == m
    v1 = 0.5 * (res.upper_v1[0] + res.lower_v1[0])
    v2 = 0.5 * (res.upper_v2[0] + res.lower_v2[0])
    traj = simulate(params, InitialCondition("sampled", v1=tuple(v1), v2=tuple(v2)), cfg, SMALL)
    period_steps = res.times.size - 1
    phase = np.arange(len(traj)) % period_steps
    slack = 1e-6
    # upper sequence carries the larger v1 and the smaller v2
    assert np.all(traj.v1 <= res.upper_v1[phase] + slack)
    assert np.all(traj.v1 >= res.lower_v1[phase] - slack)
    assert np.all(traj.v2 >= res.upper_v2[phase] - slack)
    assert np.all(traj.v2 <= res.lower_v2[phase] + slack)


# initial-value iteration ----------------------------------------------------------


def test_ivp_zero_data_is_fixed_point():
    res = monotone_iterate_ivp(preset("example5_2"), InitialCondition(amplitude=0.0), SMALL,
                               StepperConfig(1e-2), tol=1e-9, max_iter=400, t_end=1.0)
    assert res.converged
    for arr in (res.upper_v1, res.upper_v2, res.lower_v1, res.lower_v2):
        assert np.max(np.abs(arr)) < 1e-8


def test_ivp_matches_direct_simulation_and_gap_shrinks():
    params = preset("example5_2")
    cfg = StepperConfig(1e-2, math.pi, "imex_be", 1)
    res = monotone_iterate_ivp(params, InitialCondition(), SMALL, cfg, tol=1e-8, max_iter=400)
    traj = simulate(params, InitialCondition(), cfg, SMALL)
    assert res.converged
    v1, v2 = res.solution
    assert np.max(np.abs(v1 - traj.v1)) < 1e-6 and np.max(np.abs(v2 - traj.v2)) < 1e-6
    gap = res.trace.column("gap")
    assert np.all(np.diff(gap) <= 1e-10)
    assert res.max_violation <= 1e-8


def test_monotonicity_error_on_inconsistent_k(monkeypatch):
    # a too-small Lipschitz constant breaks the order-preserving property
    import evodom.monotone as mono

    monkeypatch.setattr(mono, "lipschitz_constants", lambda p: mono.LipschitzConstants(0.0, 0.0))
    with pytest.raises(MonotonicityError, match="halve dt"):
        monotone_iterate_ivp(preset("example5_1"), InitialCondition(amplitude=50.0), SMALL,
                             StepperConfig(5e-2), tol=1e-9, max_iter=50, t_end=2.0)
