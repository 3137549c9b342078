"""Command line: ``asmh run | compare | gen-data | build-subspace``.

Exit status is 0 on success, 1 for invalid input (configuration, arguments)
and 2 for failures while running.
"""

import argparse
import json
import logging
import os
import sys

from .config import load_config, parse_config
from .errors import ASMHError, ConfigError
from .experiments import (
    build_experiment,
    build_subspace,
    compare_runs,
    lorenz96_data,
    lorenz96_truth,
    run_experiment,
    subspace_summary,
)
from .targets import THREADS_ENV

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _config(args):
    """Config file plus ``--set key=value`` overrides."""
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {args.config}: {exc.strerror}"]) from None
    overrides = list(args.set or [])
    if getattr(args, "output_dir", None):
        overrides.append(f"output_dir={args.output_dir}")
    if overrides:
        keys = {o.partition("=")[0].strip() for o in overrides}
        kept = [line for line in text.splitlines()
                if line.split("#", 1)[0].partition("=")[0].strip() not in keys]
        text = "\n".join(kept + overrides) + "\n"
    return parse_config(text)


def cmd_run(args):
    config = _config(args)
    result = run_experiment(config)
    s = result.summary
    print(f"{s['experiment']} {s['mode']} seed={s['seed']}: acceptance {s['acceptance_rate']:.3f}, "
          f"{s['evaluation_count']} evaluations, lag 1-10 autocorrelation "
          f"{s['autocorrelation_lag1_10_max']:.3f}")
    if s["subspace"]:
        sub = s["subspace"]
        print(f"subspace: {sub['method']}, active dimension {sub['active_dim']}"
              + (f", gap ratio {sub['gap_ratio']:.3g} at {sub['gap_cut']}" if sub["gap_cut"] else ""))
    print(f"artifacts in {result.output_dir}")


def cmd_compare(args):
    out = compare_runs(args.runs, args.max_lag, args.out)
    for run, mode, rate, evals in out["acceptance"]:
        print(f"{run}: {mode}, acceptance {rate:.3f}, {evals} evaluations")
    for run, curve in zip(args.runs, out["autocorrelation"]):
        print(f"{run}: lag 1-10 autocorrelation {curve.values[1:11].max():.3f}")
    if args.out:
        print(f"tables in {args.out}")


def cmd_gen_data(args):
    config = _config(args)
    if config.experiment != "lorenz96":
        raise ConfigError(["gen-data only applies to experiment = lorenz96"])
    truth = lorenz96_truth(config)
    data = lorenz96_data(config, truth)
    out = args.out or os.path.join(config.output_dir, "data.csv")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    data.to_csv(out)
    print(f"{data.values.shape[0]} times x {data.values.shape[1]} components written to {out}")


def cmd_build_subspace(args):
    config = _config(args)
    experiment = build_experiment(config)
    subspace, evals = build_subspace(config, experiment)
    out = args.out or os.path.join(config.output_dir, "subspace.txt")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    subspace.save(out)
    info = subspace_summary(subspace)
    info["construction_evaluations"] = evals
    print(json.dumps({k: (v.tolist() if hasattr(v, "tolist") else v) for k, v in info.items()}))
    print(f"subspace written to {out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="asmh", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    parser.add_argument("--threads", type=int,
                        help=f"threads for nested density evaluations (sets {THREADS_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")
        p.add_argument("--output-dir", help="override output_dir")

    p = sub.add_parser("run", help="run one experiment")
    with_config(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="compare finished runs")
    p.add_argument("runs", nargs="+", help="run directories")
    p.add_argument("--max-lag", type=int)
    p.add_argument("--out", help="directory for compare_*.csv")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gen-data", help="simulate Lorenz-96 observations")
    with_config(p)
    p.add_argument("--out", help="CSV path (default: <output_dir>/data.csv)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build-subspace", help="construct and save an active subspace")
    with_config(p)
    p.add_argument("--out", help="path (default: <output_dir>/subspace.txt)")
    p.set_defaults(func=cmd_build_subspace)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_INVALID
        os.environ[THREADS_ENV] = str(args.threads)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ASMHError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
