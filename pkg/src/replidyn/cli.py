"""Command-line surface: run, sweep, verify, initdata, blowup, replicator.

All subcommands read the flat key=value config format; the REPLIDYN_OUT
environment variable overrides the output root.  Exit codes: 0 success,
1 module error, 2 a verification check failed its tolerance.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import blowup as blowup_mod
from . import diagnostics as diag
from .config import ConfigError, SweepSpec, parse_config
from .elliptic import measure_poincare_constant, solve_torsion
from .experiment import (EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK,
                         atomic_write_text, build_initial_data,
                         diagnostics_rows, output_root, run_experiment,
                         run_sweep)
from .mesh import build_grid, read_snapshots, write_snapshots
from .replicator import (PayoffMatrix, SimplexState, integrate_replicator,
                         payoff_matrix_from_kernel)


def _load_config(path: str):
    with open(path) as fh:
        return parse_config(fh.read())


def _out_dir(cfg, override: str | None) -> str:
    if override:
        return override
    return os.path.join(output_root(), cfg["output.dir"])


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    code, summary = run_experiment(cfg, args.out)
    print(f"outcome={summary.get('outcome')} exit={code}")
    return code


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    values = [float(tok) for tok in args.values.split(",") if tok.strip()]
    spec = SweepSpec(base=cfg, axis=args.axis, values=values,
                     parallelism=args.parallel)
    code, rows = run_sweep(spec, args.out)
    for row in rows:
        print(",".join(str(x) for x in row))
    return code


def _cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    grid = build_grid(cfg["grid.dimension"], cfg["grid.extents"], cfg["grid.n"])
    torsion = solve_torsion(grid)
    eps = cfg["solver.epsilon"]
    trace = diag.Trace.from_csv(args.trace, epsilon=eps, omega_measure=grid.volume)
    snapshots = read_snapshots(args.snapshots, grid)
    u0eps = snapshots[0][1]

    checks = args.checks.split(",") if args.checks else None

    class _Shim:
        pass

    shim = _Shim()
    shim.trace = trace
    shim.snapshots = snapshots
    shim.sup_cap = cfg["solver.sup_cap"] or float(np.max(trace.sup_norm)) * 2.0 + 1.0
    rows, ok = diagnostics_rows(cfg, shim, grid, torsion, u0eps, checks=checks)
    lines = ["check,t,value,bound,pass"]
    for r in rows:
        lines.append(f"{r[0]},{float(r[1])!r},{float(r[2])!r},{float(r[3])!r},{r[4]}")
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_initdata(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(cfg, args.out)
    grid = build_grid(cfg["grid.dimension"], cfg["grid.extents"], cfg["grid.n"])
    torsion = solve_torsion(grid)
    u0eps, result = build_initial_data(cfg, grid, torsion)
    report = result.report if result is not None else []
    os.makedirs(out, exist_ok=True)
    write_snapshots(os.path.join(out, "u0eps.ndjson"), [(0.0, u0eps)])
    lines = ["property,measured,threshold,pass"]
    for chk in report:
        lines.append(f"{chk.name},{chk.measured!r},{chk.threshold!r},{chk.passed}")
    atomic_write_text(os.path.join(out, "initdata_report.csv"),
                      "\n".join(lines) + "\n")
    print("\n".join(lines))
    if report and not all(c.passed for c in report):
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _cmd_blowup(args) -> int:
    cfg = _load_config(args.config)
    grid = build_grid(cfg["grid.dimension"], cfg["grid.extents"], cfg["grid.n"])
    eps = cfg["solver.epsilon"]
    trace = diag.Trace.from_csv(args.trace, epsilon=eps, omega_measure=grid.volume)
    snapshots = read_snapshots(args.snapshots, grid)

    metrics = []
    try:
        t_est, residual = blowup_mod.estimate_tmax(trace)
        metrics.append(["t_max_estimate", t_est])
        metrics.append(["fit_residual", residual])
    except ValueError as exc:
        print(f"singular-time fit unavailable: {exc}", file=sys.stderr)
    c_p = measure_poincare_constant(grid)
    metrics.append(["poincare_constant", c_p])
    y0 = float(trace.corrected_mass[0])
    if y0 > 1.0:
        metrics.append(["poincare_upper_bound",
                        blowup_mod.poincare_blowup_bound(y0, c_p, grid.volume)])
    if len(snapshots) >= 3:
        report = blowup_mod.blowup_set_estimate(snapshots)
        metrics.append(["blowup_set_fraction", report.blowup_set_fraction])
        for margin, g in report.core_min_growth.items():
            metrics.append([f"core_min_growth_{margin:g}", g])

    lines = ["metric,value"] + [f"{name},{float(val)!r}" for name, val in metrics]
    text = "\n".join(lines) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    print(text, end="")
    return EXIT_OK


def _cmd_replicator(args) -> int:
    cfg = _load_config(args.config)
    out = _out_dir(cfg, args.out)
    payoff_kind = cfg["replicator.payoff"]
    if payoff_kind == "kernel":
        grid = build_grid(1, [1.0], [cfg["replicator.grid_n"]])
        payoff = payoff_matrix_from_kernel(grid, cfg["replicator.sigma"])
        m = grid.n[0]
    else:
        m = cfg["replicator.strategies"]
        payoff = PayoffMatrix(np.eye(m))
    p0_values = cfg["replicator.p0"]
    if p0_values:
        if len(p0_values) != m:
            raise ConfigError(
                f"replicator.p0 has {len(p0_values)} entries, expected {m}")
        p0 = SimplexState(np.asarray(p0_values))
    elif payoff_kind == "kernel":
        x = np.linspace(0.0, 1.0, m)
        raw = np.exp(-((x - 0.5) ** 2) / 0.02)
        p0 = SimplexState(raw / raw.sum())
    else:
        raw = np.linspace(1.0, 2.0, m)
        p0 = SimplexState(raw / raw.sum())

    times, states, clip_total = integrate_replicator(
        p0, payoff, cfg["replicator.t_end"], cfg["replicator.dt"])

    os.makedirs(out, exist_ok=True)
    if m <= 64:
        header = "t," + ",".join(f"p_{i+1}" for i in range(m))
        lines = [header]
        for t, p in zip(times, states):
            lines.append(",".join([repr(float(t))] + [repr(float(v)) for v in p]))
        atomic_write_text(os.path.join(out, "replicator_trace.csv"),
                          "\n".join(lines) + "\n")
    else:
        import json
        lines = [json.dumps({"t": float(t), "p": [float(v) for v in p]})
                 for t, p in zip(times, states)]
        atomic_write_text(os.path.join(out, "replicator_trace.ndjson"),
                          "\n".join(lines) + "\n")
    print(f"steps={len(times)-1} clip_total={clip_total!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replidyn",
        description="Degenerate nonlocal diffusion simulator and verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment pipeline")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a one-axis parameter sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated axis values")
    p_sweep.add_argument("--parallel", type=int, default=1)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_verify = sub.add_parser("verify", help="re-check estimates on stored artifacts")
    p_verify.add_argument("--config", required=True)
    p_verify.add_argument("--trace", required=True)
    p_verify.add_argument("--snapshots", required=True)
    p_verify.add_argument("--checks", default=None)
    p_verify.add_argument("--out", default=None)
    p_verify.set_defaults(func=_cmd_verify)

    p_init = sub.add_parser("initdata", help="build initial data and its report")
    p_init.add_argument("--config", required=True)
    p_init.add_argument("--out", default=None)
    p_init.set_defaults(func=_cmd_initdata)

    p_blow = sub.add_parser("blowup", help="blow-up metrics from stored artifacts")
    p_blow.add_argument("--config", required=True)
    p_blow.add_argument("--trace", required=True)
    p_blow.add_argument("--snapshots", required=True)
    p_blow.add_argument("--out", default=None)
    p_blow.set_defaults(func=_cmd_blowup)

    p_rep = sub.add_parser("replicator", help="integrate a replicator game")
    p_rep.add_argument("--config", required=True)
    p_rep.add_argument("--out", default=None)
    p_rep.set_defaults(func=_cmd_replicator)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
