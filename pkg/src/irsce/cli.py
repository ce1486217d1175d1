"""Command-line interface: `run` sweeps, `estimate` single trials, `selftest`.

Exit codes: 0 on success, 2 on configuration errors, 3 when --strict is set
and any estimator failed during a sweep.
"""

import argparse
import dataclasses
import sys

from .config import (ConfigError, ExperimentConfig, apply_overrides,
                     load_config, validate_config)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irsce",
        description="Channel-estimation sweeps for an IRS-aided uplink with "
                    "semi-passive sensing elements")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a Monte-Carlo sweep")
    est_p = sub.add_parser("estimate", help="run a single trial and print its metrics")
    sub.add_parser("selftest", help="run the built-in oracle/property checks")

    for p in (run_p, est_p):
        p.add_argument("--config", help="YAML config file (defaults apply if omitted)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted config override, repeatable")
    run_p.add_argument("--out", help="output directory override")
    run_p.add_argument("--trials", type=int, help="trials per sweep point override")
    run_p.add_argument("--workers", type=int, help="parallel worker count override")
    run_p.add_argument("--strict", action="store_true",
                       help="exit 3 if any estimator failed")
    run_p.add_argument("--plot-script", action="store_true",
                       help="also emit a matplotlib plot script")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.override:
        cfg = apply_overrides(cfg, args.override)
    replacements = {}
    if args.seed is not None:
        replacements["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        replacements["trials"] = args.trials
    if getattr(args, "workers", None) is not None:
        replacements["workers"] = args.workers
    if getattr(args, "out", None):
        replacements["output_dir"] = args.out
    if replacements:
        cfg = dataclasses.replace(cfg, **replacements)
    validate_config(cfg)
    return cfg


def _cmd_run(args) -> int:
    from .sweep import emit_results, run_sweep

    cfg = _load(args)
    result = run_sweep(cfg)
    paths = emit_results(result, cfg, cfg.output_dir, plot_script=args.plot_script)
    print(f"wrote {paths['csv']} ({len(result.records)} rows)")
    if result.errors:
        for rec in result.errors:
            print(f"estimator failure: {rec.estimator} at {rec.sweep_name}="
                  f"{rec.sweep_value} trial {rec.trial}: {rec.error}", file=sys.stderr)
        if args.strict:
            return 3
    return 0


def _cmd_estimate(args) -> int:
    from .sweep import run_trial

    cfg = _load(args)
    value = cfg.sweep.values[0]
    records = run_trial(cfg, value, trial=0)
    for rec in records:
        print(f"{rec.estimator}: nmse_f={rec.nmse_f_db:.4f} dB "
              f"nmse_g={rec.nmse_g_db:.4f} dB nmse_h={rec.nmse_h_db:.4f} dB "
              f"nmse_cascaded={rec.nmse_casc_db:.4f} dB se={rec.se:.4f} "
              f"power={rec.power_w:.4f} W ee={rec.ee:.4e}"
              + (f" [error: {rec.error}]" if rec.error else ""))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "estimate":
            return _cmd_estimate(args)
        if args.command == "selftest":
            from .selftest import run_selftest
            return 0 if run_selftest() else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
