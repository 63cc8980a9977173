"""Command-line front end.

    opinion-kinetics simulate     --config run.toml --out results/
    opinion-kinetics run          --manifest results/manifest.json --out replay/

Every command writes its CSV files plus ``manifest.json`` (the resolved
configuration) into ``--out``.  Exit status: 0 success, 1 invalid input or
I/O failure, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import os
import sys

import numpy as np

from . import __version__, output
from .config import COMMANDS, DEFAULTS_HELP, load_config, resolve
from .errors import ConfigError, NumericalError
from .fokker_planck import fp_solve, initial_grid
from .kinetic import moment_law_check, simulate
from .limit_lab import run_sweep
from .stationary import (
    cell_averages,
    endpoint_behavior,
    interior_peaks,
    normalization_constant,
    stationary_moments,
)

U64 = 1 << 64


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < U64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _threads(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="opinion-kinetics",
        description="Kinetic opinion-exchange simulations and their Fokker-Planck limits.",
        epilog=DEFAULTS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "Monte Carlo run: pooled moments and final histogram",
        "fp-solve": "finite-volume Fokker-Planck solve from the initial law",
        "steady-state": "closed-form stationary density as cell averages on K cells",
        "limit-sweep": "kinetic runs along a decreasing gamma list against the limit",
        "moment-check": "Monte Carlo run plus exponential fit of the spread",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], epilog=DEFAULTS_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="TOML configuration file")
        _common(p)
    p = sub.add_parser("run", help="replay a manifest written by an earlier run")
    p.add_argument("--manifest", required=True, help="manifest.json to replay")
    p.add_argument("--out", default="replay", help="output directory (default: replay)")
    p.add_argument("--seed", type=_seed, default=None, help="override the recorded seed")
    p.add_argument("--threads", type=_threads, default=1, help="worker threads for replicas")
    p.add_argument("--gnuplot", action="store_true", help="also write plot.gp")
    return parser


def _common(p):
    p.add_argument("--seed", type=_seed, default=None, help="64-bit master seed (overrides config)")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--threads", type=_threads, default=1, help="worker threads for replicas")
    p.add_argument("--manifest", default=None,
                   help="where to write the manifest (default: <out>/manifest.json)")
    p.add_argument("--gnuplot", action="store_true", help="also write plot.gp")


def execute(run, out_dir, threads=1):
    """Run a validated configuration; return (output paths, summary dict)."""
    os.makedirs(out_dir, exist_ok=True)
    path = lambda name: os.path.join(out_dir, name)  # noqa: E731
    cmd = run.command
    if cmd in ("simulate", "moment-check"):
        cfg = run.sim_config()
        res = simulate(cfg, threads=threads)
        files = [output.write_series(res.pooled_series, path("moments.csv"))]
        summary = {"rejected_fraction": res.rejected_fraction}
        if cmd == "simulate":
            files.append(output.write_grid(res.pooled_histogram, path("histogram.csv")))
        else:
            fit = moment_law_check(res.pooled_series, cfg)
            cols = ("fitted_rate", "predicted_rate", "continuum_rate", "relative_deviation",
                    "points_used")
            files.append(output.write_rows(path("moment_check.csv"), cols,
                                           [[getattr(fit, c) for c in cols]]))
            summary.update({c: getattr(fit, c) for c in cols})
        return files, summary
    if cmd == "fp-solve":
        num = run.section("numerics")
        sol = fp_solve(run.fp_equation(), initial_grid(run.initial, num["K"]), num["tau_end"],
                       record_every=num["tau_record_every"], residual_tol=num["residual_tol"])
        files = [output.write_grid(sol.grid, path("grid.csv")),
                 output.write_series(sol.series, path("moments.csv"))]
        return files, {"converged": sol.converged, "tau": sol.tau, "steps": sol.steps}
    if cmd == "steady-state":
        spec = run.stationary_spec()
        grid = cell_averages(spec, run.section("numerics")["K"])
        mean, m2 = stationary_moments(spec)
        ends = endpoint_behavior(spec)
        summary = {"normalization_constant": normalization_constant(spec), "mean": mean,
                   "second_moment": m2, "peaks": [float(x) for x in interior_peaks(spec)],
                   "endpoint_minus_1": ends[-1], "endpoint_plus_1": ends[1]}
        return [output.write_grid(grid, path("stationary.csv"))], summary
    result = run_sweep(run.sweep_config(), threads=threads)
    files = [output.write_sweep(result, path("sweep.csv"))]
    output.write_sweep_runtime(result, path("sweep_runtime.csv"))
    summary = {"monotone": result.monotone, "target": result.target,
               "stationary": [r.stationary for r in result.rows],
               "skipped": [r.gamma for r in result.rows if r.skipped]}
    return files, summary


def _report(summary):
    for k, v in summary.items():
        if isinstance(v, float):
            v = f"{v:.10g}"
        print(f"{k}: {v}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            manifest = output.read_manifest(args.manifest)
            resolved = copy.deepcopy(manifest["config"])
            if args.seed is not None:
                resolved["numerics"]["seed"] = args.seed
            run = resolve(resolved, manifest["command"])
            manifest_path = os.path.join(args.out, "manifest.json")
        else:
            run = load_config(args.config, args.command)
            if args.seed is not None:
                resolved = copy.deepcopy(run.resolved)
                resolved["numerics"]["seed"] = args.seed
                run = resolve(resolved, args.command)
            manifest_path = args.manifest or os.path.join(args.out, "manifest.json")
        files, summary = execute(run, args.out, threads=args.threads)
        if args.gnuplot:
            output.write_gnuplot(args.out, files)
        output.write_manifest(manifest_path, run.command, run.resolved, files,
                              extra=_jsonable(summary))
        _report(summary)
    except (ConfigError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 2
    return 0


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        out[k] = v
    return out


if __name__ == "__main__":
    sys.exit(main())
