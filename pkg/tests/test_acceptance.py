"""Acceptance gate: one test per criterion, each recording a pass/fail line.

Every test records its measured values before asserting, so the summary at
the end of the run lists all criteria even when one of them fails.
"""

import json
import math
import time

import numpy as np
import pytest

from evodom.cli import main
from evodom.core import EvolutionLaw, Grid, ModelParams, PeriodicFn, principal_eigenpair
from evodom.dynamics import InitialCondition, StepperConfig, periodic_attractor, simulate
from evodom.indexes import (
    classify_regime,
    diffusion_thresholds,
    principal_lambda,
    reproduction_index,
    rho_bar_inv_sq,
)
from evodom.monotone import monotone_iterate_ivp, monotone_iterate_periodic
from evodom.presets import preset

GRID = Grid((0.0, 1.0), 199)
FULL = StepperConfig(1e-3, 60.0, "imex_be", 10)


def test_criterion_01_index_reproduction(tmp_path, record_acceptance):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "example5_1", "grid": {"N": 199}}))
    start = time.perf_counter()
    code = main(["indexes", "--config", str(cfg), "--out", str(tmp_path)])
    elapsed = time.perf_counter() - start
    doc = json.loads((tmp_path / "indexes.json").read_text())
    R1, R2 = doc["R1"], doc["R2"]
    ok = code == 0 and abs(R1 - 0.6079) <= 5e-4 and abs(R2 - 1.2159) <= 5e-4 and elapsed < 1.0
    record_acceptance(1, ok, f"R1={R1:.5f} R2={R2:.5f} runtime={elapsed:.3f}s")
    assert ok


def test_criterion_02_quadrature_reproduction(record_acceptance):
    start = time.perf_counter()
    growing = rho_bar_inv_sq(preset("example5_2").law)
    shrinking = rho_bar_inv_sq(preset("example5_3").law)
    elapsed = time.perf_counter() - start
    # the literal window [0, 2] is reported alongside; it does not give the target values
    window = [rho_bar_inv_sq(EvolutionLaw(PeriodicFn.affine_abs_sin(1.0, c, 1.0, 2.0))) for c in (0.5, -0.3)]
    ok = abs(growing - 0.6020) <= 5e-4 and abs(shrinking - 1.5853) <= 5e-4 and elapsed < 0.1
    record_acceptance(
        2, ok,
        f"mean rho^-2 over a period: {growing:.5f}, {shrinking:.5f} runtime={elapsed:.4f}s "
        f"(window [0,2]: {window[0]:.5f}, {window[1]:.5f})",
    )
    assert ok


def test_criterion_03_eigenvalue_accuracy(record_acceptance):
    Ns = (9, 49, 199)
    rel, err, h = [], [], []
    for N in Ns:
        grid = Grid((0.0, 1.0), N)
        lam = principal_eigenpair(grid).lambda0
        exact = grid.discrete_lambda0()
        rel.append(abs(lam - exact) / exact)
        err.append(abs(lam - math.pi**2))
        h.append(1.0 / (N + 1))
    order = np.polyfit(np.log(h), np.log(err), 1)[0]
    ok = max(rel) <= 1e-10 and abs(order - 2.0) <= 0.3
    record_acceptance(3, ok, f"max rel error={max(rel):.2e} order={order:.3f}")
    assert ok


def _random_params(rng):
    T = float(rng.uniform(0.5, 4.0))
    amp = float(rng.uniform(-0.8, 0.8))
    if rng.random() < 0.5:
        rho = PeriodicFn.affine_sin(1.0, amp, 2 * math.pi * int(rng.integers(1, 4)) / T, 0.0, T)
    else:
        rho = PeriodicFn.affine_abs_sin(1.0, amp, math.pi * int(rng.integers(1, 4)) / T, T)
    a = [PeriodicFn.affine_sin(float(m), float(rng.uniform(0, 0.5)) * float(m), 2 * math.pi / T,
                               float(rng.uniform(0, 2 * math.pi)), T) for m in rng.uniform(0.1, 5.0, 2)]
    const = lambda v: PeriodicFn.constant(float(v), T)
    d1, d2 = rng.uniform(0.01, 1.0, 2)
    b1, b2, c1, c2 = rng.uniform(0.01, 1.0, 4)
    return ModelParams(float(d1), float(d2), a[0], a[1], const(b1), const(b2), const(c1), const(c2),
                       EvolutionLaw(rho))


def test_criterion_04_sign_law(record_acceptance):
    rng = np.random.default_rng(20240517)
    lam0 = math.pi**2
    checked = failures = 0
    for _ in range(200):
        params = _random_params(rng)
        for i in (1, 2):
            R = reproduction_index(params, lam0, i)
            lam = principal_lambda(params, lam0, i)
            if abs(1 - R) <= 1e-8:
                continue
            checked += 1
            failures += int(np.sign(1 - R) != np.sign(lam))
    ok = failures == 0 and checked > 0
    record_acceptance(4, ok, f"{checked} index/eigenvalue pairs from 200 draws, {failures} sign mismatches")
    assert ok


def test_criterion_05_threshold_consistency(record_acceptance):
    lam0 = principal_eigenpair(GRID).lambda0
    worst, ordering_ok = 0.0, True
    for name in ("example5_1", "example5_2", "example5_3"):
        params = preset(name)
        th = diffusion_thresholds(params, lam0)
        fields = {f: getattr(params, f) for f in ("a1", "a2", "b1", "b2", "c1", "c2")}
        for i, D, D_star in ((1, th.D1, th.D1_star), (2, th.D2, th.D2_star)):
            d1, d2 = (D, params.d2) if i == 1 else (params.d1, D)
            at = ModelParams(d1, d2, law=params.law, **fields)
            worst = max(worst, abs(reproduction_index(at, lam0, i) - 1.0))
            mean = rho_bar_inv_sq(params.law)
            ordering_ok &= np.sign(D_star - D) == np.sign(mean - 1.0)
    ok = worst <= 1e-8 and bool(ordering_ok)
    record_acceptance(5, ok, f"max |R(D)-1|={worst:.2e} ordering consistent={bool(ordering_ok)}")
    assert ok


def test_criterion_06_heat_oracle(record_acceptance):
    tiny = PeriodicFn.constant(1e-300, 1.0)
    law = EvolutionLaw.fixed(1.0)
    params = ModelParams(0.1, 0.1, tiny, tiny, PeriodicFn.constant(0.0, 1.0), PeriodicFn.constant(0.0, 1.0),
                         tiny, tiny, law)
    start = time.perf_counter()
    traj = simulate(params, InitialCondition(amplitude=1.0), StepperConfig(1e-3, 1.0, "imex_be", 1000), GRID)
    elapsed = time.perf_counter() - start
    exact = math.exp(-0.1 * math.pi**2) * np.sin(math.pi * GRID.y)
    err = float(np.max(np.abs(traj.v1[-1] - exact)))
    ok = err <= 1e-3 and elapsed < 5.0
    record_acceptance(6, ok, f"sup error at t=1: {err:.2e} runtime={elapsed:.2f}s")
    assert ok


@pytest.mark.parametrize("name", ["example5_1", "example5_2", "example5_3"])
def test_criterion_07_qualitative_dynamics(name, record_acceptance):
    params = preset(name)
    start = time.perf_counter()
    traj = simulate(params, InitialCondition(), FULL, GRID)
    elapsed = time.perf_counter() - start
    last = traj.times >= traj.times[-1] - params.period - 1e-12
    sup1 = np.max(traj.v1[last], axis=1)
    sup2 = np.max(traj.v2[last], axis=1)
    end1, end2 = float(sup1[-1]), float(sup2[-1])
    if name == "example5_1":
        ok = end1 < 1e-3 and sup2.min() > 0.1
    elif name == "example5_2":
        ok = sup1.min() > 0.1 and sup2.min() > 0.1
    else:
        ok = end1 < 1e-3 and end2 < 1e-3
    ok = bool(ok) and elapsed < 60.0
    record_acceptance(
        7, ok,
        f"{name}: last-period sup v1 in [{sup1.min():.3g}, {sup1.max():.3g}], "
        f"sup v2 in [{sup2.min():.3g}, {sup2.max():.3g}] runtime={elapsed:.1f}s",
    )
    assert ok


def test_criterion_08_monotone_iteration(record_acceptance):
    params = preset("example5_1")
    cfg = StepperConfig(1e-3, params.period, "imex_be", 100)
    res = monotone_iterate_periodic(params, GRID, cfg, tol=1e-6, max_iter=2000)
    att = periodic_attractor(params, InitialCondition(), cfg, GRID, tol=1e-9, max_periods=5000)
    _, dt = cfg.steps_for(params.period)
    allowed = max(1e-5, 5 * dt)
    disc = max(
        float(np.max(np.abs(v - att.v1))) for v in (res.upper_v1, res.lower_v1)
    )
    disc = max(disc, *(float(np.max(np.abs(v - att.v2))) for v in (res.upper_v2, res.lower_v2)))
    ok = res.converged and att.converged and res.max_violation <= 1e-8 and disc <= allowed
    record_acceptance(
        8, ok,
        f"{len(res.trace)} iterations, max ordering violation={res.max_violation:.1e}, "
        f"distance to attractor={disc:.2e} (allowed {allowed:.0e})",
    )
    assert ok


def test_criterion_09_cross_method_equivalence(record_acceptance):
    params = preset("example5_2")
    cfg = StepperConfig(1e-3, params.period, "imex_be", 1)
    res = monotone_iterate_ivp(params, InitialCondition(), GRID, cfg, tol=1e-8, max_iter=1000)
    traj = simulate(params, InitialCondition(), cfg, GRID)
    v1, v2 = res.solution
    disc = float(max(np.max(np.abs(v1 - traj.v1)), np.max(np.abs(v2 - traj.v2))))
    _, dt = cfg.steps_for(params.period)
    allowed = max(1e-5, 5 * dt)
    ok = res.converged and disc <= allowed
    record_acceptance(9, ok, f"{len(res.trace)} iterations, sup discrepancy={disc:.2e} (allowed {allowed:.0e})")
    assert ok


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_criterion_10_determinism(tmp_path, record_acceptance):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "preset": "example5_1",
        "grid": {"N": 29},
        "stepper": {"dt": 0.01, "t_end": 2.0, "record_every": 10},
        "monotone": {"tol": 1e-6, "max_iter": 3000},
        "periodic": {"tol": 1e-8, "max_periods": 3000},
    }))
    commands = {
        "indexes": [],
        "simulate": [],
        "periodic": [],
        "sweep": ["--axis", "m_amplitude", "--from", "-0.5", "--to", "0.5", "--steps", "5"],
        "candidates": ["--kind", "initial"],
    }
    differing = []
    for name, extra in commands.items():
        out = tmp_path / name
        runs = []
        for _ in range(2):
            code = main([name, "--config", str(cfg), "--out", str(out), *extra])
            runs.append((code, _snapshot(out)))
        if runs[0] != runs[1] or not runs[0][1]:
            differing.append(name)
    cand = tmp_path / "candidates"
    verify = [main(["verify", "--config", str(cfg), "--out", str(cand),
                    "--upper", str(cand / "upper.csv"), "--lower", str(cand / "lower.csv")]) for _ in range(2)]
    if verify[0] != verify[1]:
        differing.append("verify")
    ok = not differing
    record_acceptance(10, ok, f"byte-identical outputs for {', '.join(commands)}, verify; differing: {differing or 'none'}")
    assert ok
