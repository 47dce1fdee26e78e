"""Command-line entry point: ``fairlens {generate,debias,train,audit,full-run}``.

Exit codes: 0 success, 2 config error, 3 missing prerequisite / bad state,
4 I/O error, 5 numeric error.
"""
from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import load_config
from .errors import FairlensError
from .model import ScenarioSpec

EXIT_OK, EXIT_CONFIG, EXIT_STATE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4, 5


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="flat 'key = value' config file")
    p.add_argument("--seed", type=int, help="master seed (default 42)")
    p.add_argument("--n-profiles", type=int, dest="n_profiles", help="number of profiles (multiple of 24)")
    p.add_argument("--penalty", type=float, help="penalty T_delta for both biased targets (default 0.2)")
    p.add_argument("--k", type=int, help="top-k size for the screening audit (default 1000)")
    p.add_argument("--out", metavar="DIR", help="artifact directory (default ./fairlens-out)")


def _scenario_args(p: argparse.ArgumentParser):
    p.add_argument("--scenario", choices=("neutral", "biased", "agnostic"), required=True)
    p.add_argument("--bias-attr", choices=("gender", "ethnicity"), default="gender", dest="bias_attr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairlens", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate and score the synthetic profile dataset")
    _common(p)
    p.add_argument("--force", action="store_true", help="overwrite an existing dataset")

    p = sub.add_parser("debias", help="learn the agnostic face transform and fill agnostic_face")
    _common(p)

    for name, text in (("train", "train the scoring network for one scenario"),
                       ("audit", "audit a trained scenario: top-k, p%%, KL, leakage probes")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _scenario_args(p)

    p = sub.add_parser("full-run", help="generate, debias, train and audit all five scenarios")
    _common(p)
    p.add_argument("--force", action="store_true", help="reuse a non-empty output directory")
    return parser


def _overrides(args) -> dict:
    keys = ("seed", "n_profiles", "k", "out")
    out = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    if args.penalty is not None:
        out["gender_penalty"] = out["ethnicity_penalty"] = args.penalty
    return out


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, _overrides(args))
        if args.command == "generate":
            pipeline.cmd_generate(config, force=args.force)
        elif args.command == "debias":
            pipeline.cmd_debias(config)
        elif args.command == "train":
            pipeline.cmd_train(config, ScenarioSpec(args.scenario, args.bias_attr))
        elif args.command == "audit":
            pipeline.cmd_audit(config, ScenarioSpec(args.scenario, args.bias_attr))
        else:
            pipeline.cmd_full_run(config, force=args.force)
    except FairlensError as exc:
        print(f"fairlens: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fairlens: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, OverflowError) as exc:
        print(f"fairlens: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
