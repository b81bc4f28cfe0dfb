"""Command-line entry point ``evodom``.

Exit codes: 0 success, 1 other numerical failure, 2 configuration error,
3 blow-up, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import META_FORMAT, RunConfig, parse_config
from .core import Grid, ModelParams, principal_eigenpair
from .dynamics import StatePair, Trajectory, periodic_attractor, pullback, simulate
from .errors import BlowUpError, ConfigError, DomainCollapseError, EvodomError
from .indexes import bound_constants, classify_regime
from .monotone import SolutionPairCandidate, check_coupled_pair, initial_iterates, monotone_iterate_periodic
from .output import TRAJECTORY_HEADER, read_trajectory_csv, write_csv, write_json
from .presets import amplitude_law

SWEEP_AXES = ("m_amplitude", "d1", "d2")
INDEX_KEYS = ("lambda0", "R1", "R2", "lam1", "lam2", "R1_star", "R2_star", "D1", "D2",
              "D1_star", "D2_star", "rho_bar_inv_sq", "regime", "side_ok_1", "side_ok_2", "M1", "M2")


def _meta(cfg: RunConfig, grid: Grid, lambda0: float, **extra) -> dict:
    _, dt = cfg.stepper.steps_for(cfg.stepper.t_end)
    doc = {
        "format": META_FORMAT,
        "version": __version__,
        "config": cfg.resolved,
        "grid": {"N": grid.N, "h": grid.h, "interval": list(grid.interval)},
        "lambda0": lambda0,
        "effective_dt": dt,
    }
    doc.update(extra)
    return doc


def _setup(cfg: RunConfig):
    grid = Grid(cfg.params.interval, cfg.N)
    return grid, principal_eigenpair(grid)


# subcommands -----------------------------------------------------------


def cmd_indexes(cfg: RunConfig) -> int:
    grid, pair = _setup(cfg)
    report = classify_regime(cfg.params, cfg.N, cfg.nodes, lambda0=pair.lambda0)
    doc = report.to_dict()
    write_json(cfg.out_dir / "indexes.json", doc)
    write_json(cfg.out_dir / "meta.json", _meta(cfg, grid, pair.lambda0))
    width = max(map(len, doc))
    for key in INDEX_KEYS:
        value = doc[key]
        shown = f"{value:.6g}" if isinstance(value, float) else str(value).lower() if isinstance(value, bool) else value
        print(f"{key:<{width}}  {shown}")
    if report.regime.coexistence_certified is False:
        print("note: both indexes exceed 1 but the coexistence side conditions fail")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    grid, pair = _setup(cfg)
    code, truncated_at = 0, None
    try:
        traj = simulate(cfg.params, cfg.ic, cfg.stepper, grid)
    except BlowUpError as exc:
        traj = exc.partial if exc.partial is not None else Trajectory(grid, [])
        code, truncated_at = exc.exit_code, exc.t
        print(f"evodom: {exc}", file=sys.stderr)
    rows = list(pullback(traj, cfg.params.law).rows())
    if truncated_at is not None:
        rows.append(("truncated", truncated_at, None, None, None, None, None))
    write_csv(cfg.out_dir / "trajectory.csv", TRAJECTORY_HEADER, rows)
    write_json(cfg.out_dir / "meta.json",
               _meta(cfg, grid, pair.lambda0, snapshots=len(traj), truncated_at=truncated_at))
    return code


def cmd_periodic(cfg: RunConfig) -> int:
    grid, pair = _setup(cfg)
    params = cfg.params
    attr = periodic_attractor(params, cfg.ic, cfg.stepper, grid, cfg.periodic_tol, cfg.periodic_max_periods)
    mono = monotone_iterate_periodic(params, grid, cfg.stepper, cfg.mono_tol, cfg.mono_max_iter, pair, cfg.nodes)

    stride = cfg.stepper.record_every
    keep = np.unique(np.r_[np.arange(0, attr.times.size, stride), attr.times.size - 1])
    snap = Trajectory(grid, [StatePair(attr.v1[k], attr.v2[k], float(attr.times[k])) for k in keep])
    write_csv(cfg.out_dir / "attractor.csv", TRAJECTORY_HEADER, pullback(snap, params.law).rows())
    write_csv(
        cfg.out_dir / "convergence.csv",
        ("iter", "gap_upper", "gap_lower", "periodicity_residual", "violation"),
        ((r.m, r.gap_upper, r.gap_lower, r.periodicity_residual, r.violation) for r in mono.trace),
    )

    def sup(a, b):
        return float(max(np.max(np.abs(a)), np.max(np.abs(b))))

    d_lower = sup(attr.v1 - mono.lower_v1, attr.v2 - mono.lower_v2)
    d_upper = sup(attr.v1 - mono.upper_v1, attr.v2 - mono.upper_v2)
    _, dt = cfg.stepper.steps_for(params.period)
    allowed = max(10 * cfg.mono_tol, 5 * dt)
    agreement = {
        "discrepancy": max(d_lower, d_upper),
        "discrepancy_lower": d_lower,
        "discrepancy_upper": d_upper,
        "monotone_gap": mono.gap,
        "allowed": allowed,
        "agree": max(d_lower, d_upper) <= allowed,
        "attractor_sup_v1": float(np.max(attr.v1)),
        "attractor_sup_v2": float(np.max(attr.v2)),
    }
    write_json(cfg.out_dir / "agreement.json", agreement)
    converged = bool(attr.converged and mono.converged)
    write_json(cfg.out_dir / "meta.json", _meta(
        cfg, grid, pair.lambda0,
        converged=converged,
        attractor={"converged": attr.converged, "periods": attr.periods, "residual": attr.residual},
        monotone={"converged": mono.converged, "iterations": len(mono.trace),
                  "max_violation": mono.max_violation, "M": mono.context.M,
                  "epsilon": mono.context.epsilon},
    ))
    print(f"attractor: converged={str(attr.converged).lower()} periods={attr.periods} residual={attr.residual:.3e}")
    print(f"monotone:  converged={str(mono.converged).lower()} iterations={len(mono.trace)} gap={mono.gap:.3e}")
    print(f"agreement: discrepancy={agreement['discrepancy']:.3e} allowed={allowed:.3e}")
    if not converged:
        print("evodom: periodic computation did not converge", file=sys.stderr)
        return 4
    return 0


def _sweep_params(base: ModelParams, axis: str, value: float) -> ModelParams:
    if axis == "d1":
        return ModelParams(value, base.d2, base.a1, base.a2, base.b1, base.b2, base.c1, base.c2, base.law, base.interval)
    if axis == "d2":
        return ModelParams(base.d1, value, base.a1, base.a2, base.b1, base.b2, base.c1, base.c2, base.law, base.interval)
    law = amplitude_law(value)
    fns = [getattr(base, n).with_period(law.period) for n in ("a1", "a2", "b1", "b2", "c1", "c2")]
    return ModelParams(base.d1, base.d2, *fns, law, base.interval)


def cmd_sweep(cfg: RunConfig, axis: str, start: float, stop: float, steps: int) -> int:
    if axis not in SWEEP_AXES:
        raise ConfigError(f"--axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise ConfigError("--from and --to must be finite")
    if steps < 2:
        raise ConfigError("--steps must be at least 2")
    grid, pair = _setup(cfg)
    rows = []
    for value in sorted(np.linspace(start, stop, steps).tolist()):
        try:
            params = _sweep_params(cfg.params, axis, value)
        except (DomainCollapseError, ConfigError):
            rows.append((value, None, None, None, "invalid"))
            continue
        rep = classify_regime(params, cfg.N, cfg.nodes, lambda0=pair.lambda0)
        rows.append((value, rep.R1, rep.R2, rep.rho_bar_inv_sq, rep.regime.label))
    write_csv(cfg.out_dir / "sweep.csv", ("param", "R1", "R2", "rho_bar_inv_sq", "regime"), rows)
    write_json(cfg.out_dir / "meta.json", _meta(
        cfg, grid, pair.lambda0, sweep={"axis": axis, "from": start, "to": stop, "steps": steps}))
    print(f"wrote {len(rows)} rows to {cfg.out_dir / 'sweep.csv'}")
    return 0


def _candidate_rows(times, grid: Grid, law, v1, v2):
    traj = Trajectory(grid, [StatePair(v1[k, 1:-1], v2[k, 1:-1], float(t)) for k, t in enumerate(times)])
    samples = pullback(traj, law)
    # keep the supplied boundary values, which need not be zero for upper candidates
    samples.v1[:], samples.v2[:] = v1, v2
    samples.u1[:], samples.u2[:] = v1, v2
    return samples.rows()


def cmd_candidates(cfg: RunConfig, kind: str, scale: float, samples: int) -> int:
    """Write upper.csv / lower.csv candidate files for ``verify``."""
    grid, pair = _setup(cfg)
    params = cfg.params
    times = np.linspace(0.0, params.period, samples + 1)
    shape = (times.size, grid.N + 2)
    if kind == "constant":
        M1, M2 = bound_constants(params)
        cand = SolutionPairCandidate(times, np.full(shape, scale * M1), np.full(shape, scale * M2),
                                     np.zeros(shape), np.zeros(shape))
    elif kind == "initial":
        cand = initial_iterates(params, pair, grid, times, cfg.nodes).candidate
    else:
        raise ConfigError(f"--kind must be 'constant' or 'initial', got {kind!r}")
    write_csv(cfg.out_dir / "upper.csv", TRAJECTORY_HEADER,
              _candidate_rows(times, grid, params.law, cand.upper1, cand.upper2))
    write_csv(cfg.out_dir / "lower.csv", TRAJECTORY_HEADER,
              _candidate_rows(times, grid, params.law, cand.lower1, cand.lower2))
    print(f"wrote {cfg.out_dir / 'upper.csv'} and {cfg.out_dir / 'lower.csv'}")
    return 0


def cmd_verify(cfg: RunConfig, upper: Path, lower: Path) -> int:
    grid, _ = _setup(cfg)
    tu, yu, u1, u2 = read_trajectory_csv(upper)
    tl, yl, l1, l2 = read_trajectory_csv(lower)
    y = grid.y_full
    for name, tt, yy in (("upper", tu, yu), ("lower", tl, yl)):
        if yy.shape != y.shape or np.max(np.abs(yy - y)) > 1e-9 * max(1.0, grid.length):
            raise ConfigError(f"{name} candidate nodes do not match the configured grid (N={grid.N})")
        if tt.shape != tu.shape or np.max(np.abs(tt - tu)) > 1e-12 * max(1.0, cfg.params.period):
            raise ConfigError("upper and lower candidates must share the same times")
    cand = SolutionPairCandidate(tu, u1, u2, l1, l2)
    rep = check_coupled_pair(cand, cfg.params, grid)
    if rep.ok:
        print(f"ok: worst residual {rep.worst:.6g} (tol {rep.tol:.3g})")
        return 0
    print(f"violation: {rep.condition} residual {rep.worst:.6g} at t={rep.t:.6g}, y={rep.y:.6g} (tol {rep.tol:.3g})")
    return 1


# argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evodom",
        description="Two-species competition on a periodically evolving domain.",
    )
    parser.add_argument("--version", action="version", version=f"evodom {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON config file (or a meta.json from an earlier run)")
        p.add_argument("--preset", help="example5_1, example5_2 or example5_3; replaces the model block")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        return p

    common(sub.add_parser("indexes", help="reproduction indexes, thresholds and regime"))
    common(sub.add_parser("simulate", help="integrate and write trajectory.csv"))
    common(sub.add_parser("periodic", help="periodic solution by direct iteration and monotone iteration"))
    sweep = common(sub.add_parser("sweep", help="indexes along a parameter axis"))
    sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sweep.add_argument("--from", dest="start", type=float, required=True)
    sweep.add_argument("--to", dest="stop", type=float, required=True)
    sweep.add_argument("--steps", type=int, required=True)
    verify = common(sub.add_parser("verify", help="check candidate coupled upper/lower solutions"))
    verify.add_argument("--upper", type=Path, required=True, help="CSV in trajectory schema")
    verify.add_argument("--lower", type=Path, required=True, help="CSV in trajectory schema")
    cands = common(sub.add_parser("candidates", help="write candidate upper/lower files for verify"))
    cands.add_argument("--kind", choices=("constant", "initial"), default="constant")
    cands.add_argument("--scale", type=float, default=1.0, help="multiplier for constant upper candidates")
    cands.add_argument("--samples", type=int, default=200, help="time intervals over one period")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.preset, args.out)
        if args.command == "indexes":
            return cmd_indexes(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "periodic":
            return cmd_periodic(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.axis, args.start, args.stop, args.steps)
        if args.command == "verify":
            return cmd_verify(cfg, args.upper, args.lower)
        if args.command == "candidates":
            if args.samples < 1:
                raise ConfigError("--samples must be positive")
            return cmd_candidates(cfg, args.kind, args.scale, args.samples)
    except EvodomError as exc:
        print(f"evodom: error: {exc}", file=sys.stderr)
        return exc.exit_code
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
