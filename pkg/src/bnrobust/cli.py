"""Command-line entry point: ``bnrobust {train,sweep,compare,gradnoise}``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiment
from .config import ExperimentConfig
from .exceptions import BNRobustError, DivergenceError
from .noise import fmt

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(prog="bnrobust", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=False, config_required=True):
        p.add_argument("--config", required=config_required, help="experiment JSON file")
        p.add_argument("--out", help="output directory (default: config 'out')")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker cap; results do not depend on it")
        if model:
            p.add_argument("--model", help="model file written by 'train'")

    common(sub.add_parser("train", help="train a model"))
    sweep = sub.add_parser("sweep", help="weight-noise sweep of a trained model")
    common(sweep, model=True, config_required=False)
    sweep.add_argument("--trials-csv", help="summarize an existing trials CSV instead of sweeping")

    cmp_ = sub.add_parser("compare", help="train and sweep one config per BN variant")
    cmp_.add_argument("--config", action="append", required=True, help="repeat once per variant")
    cmp_.add_argument("--out", required=True)
    cmp_.add_argument("--seed", type=int, action="append", help="repeatable; default: config seed")
    cmp_.add_argument("--threads", type=int, default=1)

    common(sub.add_parser("gradnoise", help="estimate SGD gradient noise"), model=True)
    return parser


def _load(args):
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config = config.with_overrides(seed=args.seed)
    return config


def run(args):
    if args.command == "train":
        config = _load(args)
        _, log = experiment.cmd_train(config, args.out)
        if log.accuracy:
            print(f"final train accuracy {fmt(log.accuracy[-1])}")
    elif args.command == "sweep":
        if args.trials_csv:
            if not args.out:
                raise BNRobustError("--out is required with --trials-csv")
            result = experiment.sweep_from_trials(args.trials_csv, args.out)
        else:
            if not args.config or not args.model:
                raise BNRobustError("sweep needs --config and --model")
            result = experiment.cmd_sweep(_load(args), args.model, args.out, args.threads)
        print(f"baseline {fmt(result.baseline)}")
        for r in result.per_eta:
            print(f"eta {fmt(r.eta)}  mean {fmt(r.mean_accuracy)}  normalized {fmt(r.normalized_accuracy)}")
        print("A_avr " + ("n/a" if result.a_avr is None else fmt(result.a_avr)))
    elif args.command == "compare":
        configs = [ExperimentConfig.load(path) for path in args.config]
        _, text = experiment.cmd_compare(configs, args.out, args.seed, args.threads)
        sys.stdout.write(text)
    elif args.command == "gradnoise":
        report = experiment.cmd_gradnoise(_load(args), args.model, args.out)
        status = "holds" if report["holds"] else "VIOLATED"
        print(f"C_hat {fmt(report['C_hat'])}  lhs {fmt(report['empirical_lhs'])}  "
              f"rhs {fmt(report['bound_rhs'])}  bound {status}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (BNRobustError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
