"""Command-line entry point: ``scnls <experiment> [options]``.

Exit status is 0 when every assertion passes and no run is tainted, 1 when
an assertion fails or a run leaks boundary mass, and 2 on configuration or
assumption errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import ScnlsError
from .config import EXPERIMENTS, ExperimentConfig, validate_config
from .defaults import default_config
from .report import emit_reports, format_assertions, format_table


def _subcommand(name):
    return name.replace("_", "-")


def build_parser():
    parser = argparse.ArgumentParser(prog="scnls", description="Semiclassical NLS convergence studies.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; defaults are used when omitted")
    common.add_argument("--out", default=None, help="output root (default: the config's output_dir)")
    common.add_argument("--workers", type=int, default=None, help="process pool size for eps cells")
    common.add_argument("--dt-override", type=float, default=None, help="force this time step")
    common.add_argument("--quick", action="store_true", help="smoke test: half N, doubled eps")
    common.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sub.add_parser(_subcommand(name), parents=[common], help=f"run the {name} experiment")
    sub.add_parser("validate-config", parents=[common], help="load and validate a config, then exit")
    sub.add_parser("all", parents=[common], help="run every experiment with its defaults")
    return parser


def _resolve(args, experiment):
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        if experiment is not None and cfg.experiment != experiment:
            raise ScnlsError(f"config is for {cfg.experiment!r}, not {experiment!r}")
    else:
        cfg = default_config(experiment)
    if args.quick:
        cfg = cfg.quick()
    changes = {}
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.dt_override is not None:
        changes["dt"] = args.dt_override
    return cfg.replace(**changes) if changes else cfg


def _run_one(cfg, plots=True, stream=None):
    from .experiments import run_experiment

    stream = stream or sys.stdout
    rec = run_experiment(cfg)
    run_dir = emit_reports(rec, cfg.output_dir, cfg.to_dict(), plots=plots)
    print(f"== {cfg.experiment} [{cfg.config_hash}] {rec.wall_clock:.1f}s -> {run_dir}", file=stream)
    print(format_assertions(rec), file=stream)
    for note in rec.notes:
        print(f"note: {note}", file=stream)
    ok = rec.passed and not rec.tainted
    if not ok:
        if rec.tainted:
            print("run is tainted by boundary mass: results lie outside the verified window", file=stream)
        print(format_table(rec), file=stream)
    return ok


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate-config":
            if not args.config:
                raise ScnlsError("validate-config needs --config")
            cfg = _resolve(args, None)
            notes = validate_config(cfg)
            print(json.dumps({"experiment": cfg.experiment, "config_hash": cfg.config_hash,
                              "notes": notes}, indent=2))
            return 0
        if args.command == "all":
            if args.config:
                raise ScnlsError("'all' runs the built-in defaults; pass configs to single experiments")
            results = [_run_one(_resolve(args, name), plots=not args.no_plots) for name in EXPERIMENTS]
            return 0 if all(results) else 1
        experiment = args.command.replace("-", "_")
        return 0 if _run_one(_resolve(args, experiment), plots=not args.no_plots) else 1
    except ScnlsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
