"""Command-line entry point.

Verbs:
  run <config>    run an experiment (registry name or path to a JSON config)
  list            show the shipped registry
  sweep-fdm       run the 2D grid-refinement comparison
  report <dir>    summarize a finished run directory

Failures print a machine-readable JSON error to stderr and exit nonzero
(2 for configuration problems, 1 for runtime failures).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from ..errors import ConfigError, EigenpowerError
from . import config as cf
from . import runner
from .registry import SWEEP_GRID_SIZES, registry, sweep_base_config


def _fail(code, kind, message, **extra):
    payload = {"error": kind, "message": message}
    payload.update(extra)
    print(json.dumps(payload), file=sys.stderr)
    return code


def _resolve_config(spec):
    entries = registry()
    if spec in entries:
        return entries[spec]
    return cf.load_config(spec)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="eigenpower",
        description="Neural power/inverse-power eigensolver experiments")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("config", help="registry name or JSON config path")
    p_run.add_argument("--out", default="runs", help="artifact root directory")
    p_run.add_argument("--profile", default="full", choices=("full", "desk"))
    p_run.add_argument("--seed", type=int, default=None)

    sub.add_parser("list", help="list shipped experiment configs")

    p_sweep = sub.add_parser("sweep-fdm", help="2D FDM vs network sweep")
    p_sweep.add_argument("--out", default="runs", help="artifact root directory")
    p_sweep.add_argument("--profile", default="full", choices=("full", "desk"))
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--grids", default=",".join(map(str, SWEEP_GRID_SIZES)),
                         help="comma-separated n_h values")
    p_sweep.add_argument("--epochs", type=int, default=None,
                         help="override training epochs per grid size")

    p_rep = sub.add_parser("report", help="print a run summary")
    p_rep.add_argument("directory")

    args = parser.parse_args(argv)
    try:
        if args.verb == "list":
            for name, entry in sorted(registry().items()):
                t = entry.training
                print(f"{name}: {entry.problem.operator} d={entry.problem.dimension} "
                      f"{t.method} N={t.n_samples} epochs={t.n_epochs}")
            print("fdm-ipmnn-sweep-2d: via the sweep-fdm verb, grids "
                  + ",".join(map(str, SWEEP_GRID_SIZES)))
            return 0
        if args.verb == "run":
            config = _resolve_config(args.config)
            report = runner.run(config, args.out, profile=args.profile,
                                seed=args.seed)
            print(json.dumps({
                "name": config.name,
                "final_lambda": report.final_lambda,
                "relative_error": report.relative_error,
                "wall_time_s": report.wall_time_s,
                "directory": report.artifacts["directory"],
            }))
            return 0
        if args.verb == "sweep-fdm":
            config = cf.with_profile(sweep_base_config(), args.profile)
            if args.seed is not None:
                config = replace(config, training=replace(config.training,
                                                          seed=args.seed))
            if args.epochs is not None:
                config = replace(config, training=replace(config.training,
                                                          n_epochs=args.epochs))
            grids = tuple(int(g) for g in args.grids.split(","))
            out_dir = runner._fresh_dir(args.out, "fdm-ipmnn-sweep-2d")
            out_csv = out_dir / "sweep.csv"
            rows = runner.fdm_vs_nn_sweep(grids, config, out_csv)
            print(json.dumps({"csv": str(out_csv), "rows": rows}))
            return 0
        if args.verb == "report":
            payload = runner.load_report(args.directory)
            print(json.dumps(payload, indent=2))
            return 0
        return _fail(2, "usage", f"unknown verb {args.verb!r}")
    except ConfigError as err:
        return _fail(2, "config", str(err), violations=err.violations)
    except FileNotFoundError as err:
        return _fail(2, "not-found", str(err))
    except ValueError as err:
        # malformed JSON, bad --grids values, and similar parse failures
        return _fail(2, "parse", str(err))
    except EigenpowerError as err:
        return _fail(1, "runtime", str(err))


if __name__ == "__main__":
    sys.exit(main())
