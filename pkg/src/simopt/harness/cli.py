"""Command-line entry point.

Subcommands:
    run     full experiment from a preset name or config path
    train   policy training only, no distribution adaptation
    eval    success rate of a saved policy on the config's target
    oracle  run a reference check (or all of them) and print the report
    replay  rebuild curves.csv from a records.jsonl file
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..oracles import oracle_names, run_oracle
from .config import ConfigError, override_value
from .experiment import evaluate_policy, replay_records, run_experiment, train_only
from .presets import preset_names, resolve

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simopt",
        description="Adaptive simulation-parameter search with policy training in the loop.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_arg(p):
        p.add_argument(
            "config",
            help=f"preset name ({', '.join(preset_names())}) or path to a .cfg file",
        )
        p.add_argument("--seed", type=int, default=None, help="override simopt.seed")
        p.add_argument("--workers", type=int, default=None, help="override simopt.workers")
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="set any config key, repeatable",
        )
        p.add_argument("--out", default=None, help="output directory (default: runs/<config name>)")

    p_run = sub.add_parser("run", help="run the experiment a config describes")
    add_config_arg(p_run)

    p_train = sub.add_parser("train", help="train one policy on the initial distribution")
    add_config_arg(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved policy on the config's target")
    p_eval.add_argument("policy", help="path to a policy .json file")
    add_config_arg(p_eval)

    p_oracle = sub.add_parser("oracle", help="run reference checks")
    p_oracle.add_argument(
        "name",
        help=f"one of {', '.join(oracle_names())}, or 'all'",
    )
    p_oracle.add_argument("--seed", type=int, default=0)

    p_replay = sub.add_parser("replay", help="rebuild curves.csv from records.jsonl")
    p_replay.add_argument("records", help="path to a records.jsonl file")
    p_replay.add_argument("--out", default=None, help="output directory (default: next to the input)")

    return parser


def _load_values(args) -> dict:
    values = resolve(args.config)
    if args.seed is not None:
        values = override_value(values, f"simopt.seed={args.seed}")
    if args.workers is not None:
        values = override_value(values, f"simopt.workers={args.workers}")
    for assignment in args.override:
        values = override_value(values, assignment)
    return values


def _out_dir(args) -> Path:
    if args.out is not None:
        return Path(args.out)
    stem = Path(args.config).stem
    return Path("runs") / stem


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            summary = run_experiment(_load_values(args), _out_dir(args))
            print(f"wrote {_out_dir(args)}")
            for key in ("stop_reason", "iterations", "final_success", "closed_positive_fraction"):
                if key in summary:
                    print(f"{key}: {summary[key]}")
            return 0
        if args.command == "train":
            summary = train_only(_load_values(args), _out_dir(args))
            print(f"wrote {_out_dir(args)}")
            print(f"best_reward: {summary['best_reward']:.4f}")
            print(f"target_success: {summary['target_success']}")
            return 0
        if args.command == "eval":
            report = evaluate_policy(args.policy, _load_values(args))
            print(f"{report['successes']}/{report['trials']} episodes succeeded")
            return 0
        if args.command == "oracle":
            reports = run_oracle(args.name, seed=args.seed)
            for report in reports:
                print(report.line())
            return 0 if all(r.passed for r in reports) else 1
        if args.command == "replay":
            src = Path(args.records)
            text = replay_records(src.read_text(encoding="utf-8"))
            out = Path(args.out) if args.out is not None else src.parent
            out.mkdir(parents=True, exist_ok=True)
            (out / "curves.csv").write_text(text, encoding="utf-8")
            print(f"wrote {out / 'curves.csv'}")
            return 0
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, KeyError, ValueError, OSError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
