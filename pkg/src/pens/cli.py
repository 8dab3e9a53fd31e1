"""Command-line surface: run, diagnose, fit-decay, compare-mild, envelope.

Every subcommand exits 0 on success; any failure prints one machine-parsable
line `pens: error: <message>` to stderr and exits 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import decay, mild, storage
from .config import parse_config, render_config
from .diagnostics import compute_channels, default_channels, dissipation, energy
from .errors import PensError
from .fields import inverse_raw
from .solver import run


def _read_config(path: str):
    return parse_config(Path(path).read_text())


def _cmd_run(args) -> int:
    settings = _read_config(args.config)
    if args.dry_run:
        sys.stdout.write(render_config(settings))
        return 0
    result = run(settings.solver, m=settings.m, s=settings.s,
                 channels=settings.channels)
    out_dir = Path(args.out_dir or settings.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "timeseries.csv"
    snap_path = out_dir / "final.pens"
    storage.emit_timeseries(result.series, csv_path)
    storage.write_snapshot(result.final_state, snap_path)
    print(csv_path)
    print(snap_path)
    return 0


def _cmd_diagnose(args) -> int:
    state = storage.read_snapshot(args.snapshot)
    d = state.grid.d
    m = args.m if args.m is not None else d / 2.0 + 1.5
    s = args.s if args.s is not None else m - 1.25
    values = compute_channels(state, m, s, default_channels(d))
    print("name,value")
    print(f"t,{state.t!r}")
    print(f"mass,{state.mass!r}")
    print(f"min_rho,{state.min_density()!r}")
    for name in sorted(values):
        print(f"{name},{values[name]!r}")
    return 0


def _cmd_fit_decay(args) -> int:
    settings = _read_config(args.config)
    meta = {"d": settings.solver.d, "L": settings.solver.L, "m": settings.m,
            "s": settings.s, "dt_max": settings.solver.dt_max}
    series = storage.read_timeseries(args.csv, meta=meta)
    window = None
    if args.t0 is not None or args.t1 is not None:
        if args.t0 is None or args.t1 is None:
            raise PensError("provide both --t0 and --t1, or neither")
        window = (args.t0, args.t1)
    channels = [c for c in args.channels.split(",") if c] if args.channels else None
    report = decay.build_decay_report(series, channels=channels, window=window)
    text = report.to_json()
    if args.output:
        Path(args.output).write_text(text)
        print(args.output)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_compare_mild(args) -> int:
    settings = _read_config(args.config)
    config = settings.solver
    result = run(config, m=settings.m, s=settings.s, channels=["E", "D", "l2_v"])
    oracle = mild.picard_solve(config, tol=args.tol, max_iter=args.max_iter)
    grid = config.grid
    final = result.final_state
    v_oracle = inverse_raw(grid, oracle.v_hat[-1])
    dv = np.sqrt(np.sum((final.v.values - v_oracle) ** 2) * grid.cell_volume)
    ref = np.sqrt(np.sum(final.v.values**2) * grid.cell_volume)
    ratios = [oracle.distances[i + 1] / oracle.distances[i]
              for i in range(len(oracle.distances) - 1) if oracle.distances[i] > 0]
    payload = {
        "rel_dev_v_at_t_end": float(dv / ref) if ref > 0 else 0.0,
        "picard_iterations": oracle.iterations,
        "picard_converged": oracle.converged,
        "contraction_ratios": [float(r) for r in ratios],
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_envelope(args) -> int:
    ts = np.logspace(np.log10(args.t0), np.log10(args.t1), args.points)
    values = np.array([mild.heat_envelope(args.profile, args.d, args.k, t) for t in ts])
    slope, residual = decay.fit_power_law(ts, values, (ts[0], ts[-1]))
    expected = -(args.d / 4.0 + args.k / 2.0)
    payload = {"profile": args.profile, "d": args.d, "k": args.k,
               "t_grid": [float(ts[0]), float(ts[-1]), int(args.points)],
               "slope": slope, "expected": expected, "residual": residual}
    print(json.dumps(payload, sort_keys=True))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pens",
        description="Drag-coupled two-phase flow: runs, diagnostics, decay fits.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a config; write CSV and snapshot")
    p_run.add_argument("config")
    p_run.add_argument("--dry-run", action="store_true",
                       help="print the effective configuration and exit")
    p_run.add_argument("--out-dir", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_diag = sub.add_parser("diagnose", help="print a norm table for a snapshot")
    p_diag.add_argument("snapshot")
    p_diag.add_argument("--m", type=float, default=None)
    p_diag.add_argument("--s", type=float, default=None)
    p_diag.set_defaults(func=_cmd_diagnose)

    p_fit = sub.add_parser("fit-decay", help="fit decay exponents from a CSV series")
    p_fit.add_argument("csv")
    p_fit.add_argument("--config", required=True,
                       help="config supplying d, L, m, s for the fits")
    p_fit.add_argument("--t0", type=float, default=None)
    p_fit.add_argument("--t1", type=float, default=None)
    p_fit.add_argument("--channels", default=None, help="comma list to fit")
    p_fit.add_argument("-o", "--output", default=None)
    p_fit.set_defaults(func=_cmd_fit_decay)

    p_cmp = sub.add_parser("compare-mild",
                           help="deviation between the stepper and the integral-form oracle")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--tol", type=float, default=1e-9)
    p_cmp.add_argument("--max-iter", type=int, default=25)
    p_cmp.set_defaults(func=_cmd_compare_mild)

    p_env = sub.add_parser("envelope",
                           help="slope of the continuous heat envelope on a log time grid")
    p_env.add_argument("--profile", default="gaussian")
    p_env.add_argument("--d", type=int, required=True)
    p_env.add_argument("--k", type=float, required=True)
    p_env.add_argument("--t0", type=float, default=1e2)
    p_env.add_argument("--t1", type=float, default=1e4)
    p_env.add_argument("--points", type=int, default=25)
    p_env.set_defaults(func=_cmd_envelope)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (PensError, OSError, ValueError, KeyError) as exc:
        message = " ".join(str(exc).split()) or exc.__class__.__name__
        print(f"pens: error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
