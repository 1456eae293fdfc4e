"""Command-line entry point: ``msqframe <experiment> [options]``.

Exit codes: 0 on success, 2 on a configuration error, 3 when the BPDN
failure rate exceeds ``--failure-budget``.
"""
import argparse
import logging
import os
import sys

from . import harness
from .ensembles import ConfigError
from .harness import Experiment

THREADS_ENV = "MSQFRAME_THREADS"

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _add_common(p):
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (unsigned 64-bit)")
    p.add_argument("--trials", type=int, help="realizations per cell (default 200)")
    p.add_argument("--full-scale", action="store_true", help="use 1000 trials per cell")
    p.add_argument("--out", help="CSV output path; a .json sidecar is written next to it")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--ensemble", help="gaussian, bernoulli, sphere or dft (comma list for mu)")
    p.add_argument("--k", type=int, help="signal dimension (sparsity for cs)")
    p.add_argument("--lambdas", help="comma-separated redundancies")
    p.add_argument("--lambda-range", nargs=3, metavar=("LO", "HI", "N"),
                   help="geometric grid of N redundancies in [LO, HI]")
    p.add_argument("--deltas", help="comma-separated step sizes")
    p.add_argument("--signal", choices=[s.value for s in harness.SignalKind])
    p.add_argument("--signal-values", help="comma-separated entries for --signal explicit")
    p.add_argument("--spike-value", type=float, help="first entry for --signal spike")
    p.add_argument("--ambient-n", type=int, help="DFT size or CS signal length N")
    p.add_argument("--c1", type=float, help="fluctuation multiplier used in bands")
    p.add_argument("--alpha", type=float, dest="alpha_doc", help="recorded in the sidecar only")
    p.add_argument("--failure-budget", type=float, help="tolerated BPDN failure fraction")
    p.add_argument("--allow-bernoulli-coarse", action="store_true", default=None,
                   help="keep delta >= 0.1 for Bernoulli CS runs")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="msqframe", description="MSQ frame and compressed-sensing experiments.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    helps = {
        Experiment.FRAME: "error vs redundancy for random frames",
        Experiment.CONSTANT_TERM: "large-step run exposing the error floor",
        Experiment.FOURIER: "random rows of a partial DFT",
        Experiment.CS: "two-stage compressed-sensing reconstruction",
        Experiment.MU: "analytic vs Monte Carlo bias term",
    }
    for exp, text in helps.items():
        _add_common(sub.add_parser(exp.value, help=text))
    return parser


def _overrides(args):
    out = {}
    if args.config:
        try:
            with open(args.config) as fh:
                out.update(harness.parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc.strerror}") from None
    co = harness._coerce
    flag_map = {
        "seed": "master_seed", "trials": "trials", "out": "output_path", "threads": "threads",
        "k": "k", "spike_value": "spike_value", "ambient_n": "ambient_n", "c1": "c1",
        "alpha_doc": "alpha_doc", "failure_budget": "failure_budget",
        "allow_bernoulli_coarse": "allow_bernoulli_coarse",
    }
    for attr, key in flag_map.items():
        v = getattr(args, attr)
        if v is not None:
            out[key] = v
    for attr, key in (("ensemble", "ensembles"), ("lambdas", "lambdas"), ("deltas", "deltas"),
                      ("signal_values", "signal_values"), ("signal", "signal")):
        v = getattr(args, attr)
        if v is not None:
            out[key] = co(key, v)
    if args.lambda_range:
        try:
            lo, hi, n = float(args.lambda_range[0]), float(args.lambda_range[1]), int(args.lambda_range[2])
        except ValueError:
            raise ConfigError("lambda_range: expected LO HI N") from None
        out["lambdas"] = harness.lambda_range(lo, hi, n)
    if args.full_scale and args.trials is None:
        out["trials"] = harness.FULL_SCALE_TRIALS
    if "threads" not in out:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                out["threads"] = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV}: expected an integer, got {env!r}") from None
    return out


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = harness.build_config(args.experiment, _overrides(args)).validate()
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = EXIT_OK
    try:
        rows = harness.run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except harness.SolverBudgetExceeded as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        rows = exc.points
        status = EXIT_SOLVER
    out = cfg.output_path
    if out:
        harness.write_csv(cfg, rows, out)
        harness.write_sidecar(cfg, rows, harness.sidecar_path(out))
    else:
        harness.write_csv(cfg, rows, sys.stdout)
    return status


if __name__ == "__main__":
    sys.exit(main())
