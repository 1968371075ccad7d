"""Command-line entry points: train, verify-theorems, dilemma, plot."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ExperimentConfig
from .oracles import run_all, write_sweep_csv
from .runner import DILEMMA_VARIANTS, dilemma_study, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mamt",
        description="Mirror-descent multi-agent RL with trust region decomposition",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run a training experiment")
    train.add_argument("--config", type=Path, default=None,
                       help="YAML config; defaults to the desk profile")
    train.add_argument("--seed", type=int, default=None,
                       help="run a single seed instead of the configured list")
    train.add_argument("--out", type=Path, default=None, help="output directory")
    train.add_argument("--full-scale", action="store_true",
                       help="with no --config: use the full-scale defaults "
                            "instead of the desk profile")

    verify = sub.add_parser("verify-theorems",
                            help="run the enumeration oracle suite")
    verify.add_argument("--trials", type=int, default=1000)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--csv", type=Path, default=Path("theorem_sweep.csv"),
                        help="where to write the divergence sweep")

    dilemma = sub.add_parser("dilemma",
                             help="decomposition-scheme comparison study")
    dilemma.add_argument("--variant", choices=sorted(DILEMMA_VARIANTS), required=True)
    dilemma.add_argument("--config", type=Path, default=None)
    dilemma.add_argument("--seeds", type=int, nargs="+", default=None)
    dilemma.add_argument("--out", type=Path, default=None)

    plot = sub.add_parser("plot", help="render figures from a run directory")
    plot.add_argument("--run", type=Path, required=True)
    plot.add_argument("--out", type=Path, default=None)
    return parser


def _load_config(path, full_scale: bool = False) -> ExperimentConfig:
    if path is not None:
        return ExperimentConfig.from_file(path)
    return ExperimentConfig() if full_scale else ExperimentConfig.desk()


def cmd_train(args) -> int:
    config = _load_config(args.config, args.full_scale)
    if args.seed is not None:
        config = config.with_overrides(seeds=[args.seed])
    if args.out is not None:
        config = config.with_overrides(out_dir=str(args.out))
    results = run_experiment(config)
    for result in results:
        summary = result.summary
        final = summary.get("final_eval_return")
        print(f"seed {summary['seed']}: updates={summary['n_updates']}"
              + (f" final_eval_return={final:.3f}" if final is not None else ""))
    print(f"runs written under {config.out_dir}")
    return 0


def cmd_verify(args) -> int:
    report = run_all(seed=args.seed, n_trials=args.trials)
    print(report.table())
    if report.sweep_rows:
        write_sweep_csv(report.sweep_rows, args.csv)
        print(f"divergence sweep written to {args.csv}")
    return 0 if report.all_passed else 1


def cmd_dilemma(args) -> int:
    env_name = DILEMMA_VARIANTS[args.variant]
    if args.config is not None:
        config = ExperimentConfig.from_file(args.config)
        config = config.with_overrides(env={**config.to_dict()["env"], "name": env_name})
    else:
        config = ExperimentConfig.desk()
        config = config.with_overrides(env={"name": env_name, "horizon": 25,
                                            "n_parallel": 12})
    if args.seeds is not None:
        config = config.with_overrides(seeds=list(args.seeds))
    if args.out is not None:
        config = config.with_overrides(out_dir=str(args.out))
    report = dilemma_study(config)
    print(f"environment: {report['env']} (seeds {report['seeds']})")
    for name, row in report["results"].items():
        print(f"  {name:<10} final return {row['mean']:8.3f} +- {row['std']:.3f}")
    return 0


def cmd_plot(args) -> int:
    from .plots import emit_plots

    written = emit_plots(args.run, args.out)
    for path in written:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    commands = {
        "train": cmd_train,
        "verify-theorems": cmd_verify,
        "dilemma": cmd_dilemma,
        "plot": cmd_plot,
    }
    return commands[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
