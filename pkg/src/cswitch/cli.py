"""Command line interface: solve, diagnose, simulate, sweep.

Exit status is 0 on success and 1 on any handled error, with a single
"error: ..." line on stderr.  All emitted CSV files use a fixed header,
one record per line, and repr() float formatting, so byte-identical
reruns indicate full determinism.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

import numpy as np

from .bundle import BundleError, load_bundle, save_bundle
from .config import (
    PRESETS,
    ConfigError,
    Problem,
    RunConfig,
    build_problem,
    load_config,
)
from .diagnostics import (
    SweepError,
    primal_dual,
    simulate_policy,
    sweep,
)
from .pwc import Grid
from .solver import SolveResult, solve, value_at
from .stochastic import simulate_paths

__all__ = ["main"]


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _resolve_config(args) -> RunConfig:
    if args.config is None and args.preset is None:
        raise ConfigError("provide --config FILE or --preset NAME")
    base = PRESETS[args.preset] if args.preset else RunConfig()
    cfg = load_config(args.config, base=base) if args.config else base
    if getattr(args, "scrap", None):
        cfg = dataclasses.replace(cfg, scrap_mode=args.scrap)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _apply_threads(args) -> None:
    if getattr(args, "threads", None):
        import numba

        numba.set_num_threads(max(1, min(args.threads, numba.config.NUMBA_NUM_THREADS)))


def _solve_problem(prob: Problem) -> SolveResult:
    t0 = time.perf_counter()
    result = solve(prob.model, prob.sp, prob.sampling, prob.grid)
    dt = time.perf_counter() - t0
    print(f"solve: T={prob.T} levels={prob.model.n_levels} grid={prob.grid.m} "
          f"samples={prob.sampling.n} ({dt:.1f}s)", file=sys.stderr)
    return result


def _result_from_bundle(path: str):
    config_dict, arrays = load_bundle(path)
    cfg = RunConfig.from_dict(config_dict)
    prob = build_problem(cfg)
    for name in ("values", "expected", "grid_points"):
        if name not in arrays:
            raise BundleError(f"bundle is missing array {name!r}")
    result = SolveResult(
        values=arrays["values"],
        expected=arrays["expected"],
        model=prob.model,
        sp=prob.sp,
        grid=Grid(arrays["grid_points"]),
    )
    return cfg, prob, result


def cmd_solve(args) -> int:
    cfg = _resolve_config(args)
    _apply_threads(args)
    prob = build_problem(cfg)
    result = _solve_problem(prob)
    save_bundle(
        args.out,
        cfg.to_dict(),
        {
            "values": result.values,
            "expected": result.expected,
            "grid_points": result.grid.points,
        },
    )
    for idx, level in enumerate(prob.model.lattice.levels):
        print(f"v0(p={level:g}) = {_fmt(value_at(result, 0, idx, prob.z0))}")
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _diag_rows(report):
    for i, level in enumerate(report.levels):
        yield [
            f"{level:g}",
            _fmt(report.lower_mean[i]),
            _fmt(report.lower_se[i]),
            _fmt(report.upper_mean[i]),
            _fmt(report.upper_se[i]),
        ]


_DIAG_HEADER = ["level", "lower", "lower_se", "upper", "upper_se"]


def cmd_diagnose(args) -> int:
    if args.bundle:
        cfg, prob, result = _result_from_bundle(args.bundle)
        if args.config or args.preset:
            requested = _resolve_config(args)
            if requested.to_dict() != cfg.to_dict():
                diffs = [
                    k for k in cfg.to_dict()
                    if cfg.to_dict()[k] != requested.to_dict()[k]
                ]
                raise ConfigError(
                    f"bundle {args.bundle} was produced with a different "
                    f"configuration (differs in: {', '.join(diffs)})"
                )
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        _apply_threads(args)
    else:
        cfg = _resolve_config(args)
        _apply_threads(args)
        prob = build_problem(cfg)
        result = _solve_problem(prob)
    t0 = time.perf_counter()
    paths = simulate_paths(
        prob.params, prob.z0, prob.T, cfg.n_paths, cfg.n_subsims, cfg.seed
    )
    report = primal_dual(result, paths, nn=args.nn_accel)
    dt = time.perf_counter() - t0
    print(f"diagnose: paths={cfg.n_paths} subsims={cfg.n_subsims} "
          f"seed={cfg.seed} ({dt:.1f}s)", file=sys.stderr)
    _write_csv(args.out, _DIAG_HEADER, _diag_rows(report))
    for i, level in enumerate(report.levels):
        gap = report.upper_mean[i] - report.lower_mean[i]
        print(f"p={level:g}: lower={report.lower_mean[i]:.3f} "
              f"upper={report.upper_mean[i]:.3f} gap={gap:.4f}")
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _sd(a: np.ndarray, axis=0) -> np.ndarray:
    if a.shape[axis] < 2:
        return np.zeros(a.shape[:axis] + a.shape[axis + 1:])
    return np.std(a, axis=axis, ddof=1)


def cmd_simulate(args) -> int:
    cfg, prob, result = _result_from_bundle(args.bundle)
    _apply_threads(args)
    seed = cfg.seed if args.seed is None else args.seed
    levels = prob.model.lattice.levels
    match = np.flatnonzero(np.isclose(levels, args.p0))
    if match.size == 0:
        raise ConfigError(
            f"start level {args.p0:g} is not on the lattice {levels[0]:g}..{levels[-1]:g}"
        )
    sim = simulate_policy(
        result, prob.params, prob.z0, args.scenarios, seed,
        start_level_index=int(match[0]), nn=args.nn_accel,
    )
    os.makedirs(args.out, exist_ok=True)

    rewards_path = os.path.join(args.out, "rewards.csv")
    _write_csv(
        rewards_path,
        ["scenario", "cum_reward"],
        ([str(k), _fmt(sim.cum_rewards[k])] for k in range(args.scenarios)),
    )

    margins = np.asarray(prob.model.actions.margins)
    lvl_phys = levels[sim.level_idx]                       # (n, T+1)
    mar_phys = margins[sim.action_idx]                     # (n, T)
    T = prob.T
    profile_rows = []
    for t in range(T + 1):
        row = [str(t), _fmt(lvl_phys[:, t].mean()), _fmt(_sd(lvl_phys[:, t]))]
        if t < T:
            row += [_fmt(mar_phys[:, t].mean()), _fmt(_sd(mar_phys[:, t]))]
        else:
            row += ["", ""]
        profile_rows.append(row)
    profile_path = os.path.join(args.out, "profile.csv")
    _write_csv(
        profile_path,
        ["t", "level_mean", "level_sd", "margin_mean", "margin_sd"],
        profile_rows,
    )

    written = [rewards_path, profile_path]
    if args.traces:
        traces_path = os.path.join(args.out, "traces.csv")

        def trace_rows():
            for k in range(args.scenarios):
                for t in range(T + 1):
                    margin = _fmt(mar_phys[k, t]) if t < T else ""
                    yield [
                        str(k), str(t), _fmt(sim.states[k, t]),
                        _fmt(lvl_phys[k, t]), margin,
                    ]

        _write_csv(traces_path, ["scenario", "t", "x", "level", "margin"], trace_rows())
        written.append(traces_path)

    mean = sim.cum_rewards.mean()
    se = _sd(sim.cum_rewards) / np.sqrt(max(args.scenarios, 1))
    print(f"policy value estimate (p0={args.p0:g}, n={args.scenarios}): "
          f"{mean:.3f} (se {float(se):.3f})")
    for p in written:
        print(f"wrote {p}", file=sys.stderr)
    return 0


_SWEEP_PHIS = (0.9, 0.6, 0.3, 0.1)
_SWEEP_SIZES = (5.0, 100.0)
_SWEEP_CAPACITIES = tuple(float(c) for c in range(10, 101, 10))


def cmd_sweep(args) -> int:
    base = _resolve_config(args)
    _apply_threads(args)
    os.makedirs(args.out, exist_ok=True)
    if args.kind == "mean-reversion":
        configs = [
            dataclasses.replace(base, phi=phi, p_max=size)
            for phi in _SWEEP_PHIS
            for size in _SWEEP_SIZES
        ]
        reports = sweep(configs)
        rows = []
        for cfg, rep in reports:
            rows.append([
                _fmt(cfg.phi), f"{cfg.p_max:g}",
                _fmt(rep.lower_mean[0]), _fmt(rep.lower_se[0]),
                _fmt(rep.upper_mean[0]), _fmt(rep.upper_se[0]),
            ])
        out_path = os.path.join(args.out, "mean_reversion.csv")
        _write_csv(
            out_path,
            ["phi", "capacity", "lower", "lower_se", "upper", "upper_se"],
            rows,
        )
        print(f"wrote {out_path}", file=sys.stderr)
    else:
        configs = [
            dataclasses.replace(base, p_max=cap, scrap_mode=scrap)
            for cap in _SWEEP_CAPACITIES
            for scrap in ("sell", "zero")
        ]
        reports = sweep(configs)
        rows = []
        curve = []
        for cfg, rep in reports:
            rows.append([
                f"{cfg.p_max:g}", cfg.scrap_mode,
                _fmt(rep.lower_mean[0]), _fmt(rep.lower_se[0]),
                _fmt(rep.upper_mean[0]), _fmt(rep.upper_se[0]),
            ])
            if cfg.scrap_mode == "sell":
                val = float(rep.lower_mean[0])
                se = float(rep.lower_se[0])
                curve.append([
                    f"{cfg.p_max:g}", _fmt(val), _fmt(se),
                    _fmt(val - 1.96 * se), _fmt(val + 1.96 * se),
                ])
        out_path = os.path.join(args.out, "capacity.csv")
        _write_csv(
            out_path,
            ["capacity", "scrap", "lower", "lower_se", "upper", "upper_se"],
            rows,
        )
        curve_path = os.path.join(args.out, "capacity_curve.csv")
        _write_csv(curve_path, ["capacity", "value", "se", "ci_lo", "ci_hi"], curve)
        print(f"wrote {out_path}", file=sys.stderr)
        print(f"wrote {curve_path}", file=sys.stderr)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named configuration preset")
    p.add_argument("--seed", type=int, default=None, help="simulation seed override")
    p.add_argument("--threads", type=int, default=None, help="solver thread count")
    p.add_argument("--scrap", choices=("sell", "zero"), default=None,
                   help="terminal treatment override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cswitch",
        description="Convex switching solver for the battery trading problem",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="backward induction; writes a solution bundle")
    _add_common(p)
    p.add_argument("--out", default="solution.bundle", help="bundle output path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("diagnose", help="primal-dual bound estimation; writes CSV")
    _add_common(p)
    p.add_argument("--bundle", help="reuse a solution bundle instead of solving")
    p.add_argument("--out", default="diagnostics.csv", help="CSV output path")
    p.add_argument("--nn-accel", action="store_true",
                   help="evaluate the policy through nearest grid rows")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", help="forward policy simulation from a bundle")
    p.add_argument("--seed", type=int, default=None, help="simulation seed override")
    p.add_argument("--threads", type=int, default=None, help="solver thread count")
    p.add_argument("--bundle", required=True, help="solution bundle to simulate from")
    p.add_argument("--scenarios", type=int, default=10000, help="number of scenarios")
    p.add_argument("--p0", type=float, default=0.0, help="starting battery level")
    p.add_argument("--traces", action="store_true", help="emit full per-step traces")
    p.add_argument("--out", default="simulate_out", help="output directory")
    p.add_argument("--nn-accel", action="store_true",
                   help="evaluate the policy through nearest grid rows")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="batch solve+diagnose over a parameter family")
    _add_common(p)
    p.add_argument("--kind", required=True, choices=("mean-reversion", "capacity"),
                   help="which parameter family to sweep")
    p.add_argument("--out", default="sweep_out", help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BundleError, SweepError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
