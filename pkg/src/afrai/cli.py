"""Command-line entry point: ``afrai run ...`` and ``afrai inspect FILE``."""

from __future__ import annotations

import argparse
import logging
import sys

from afrai.automata import FraFormatError
from afrai.environments import GridConfigError
from afrai.experiment import (
    ConfigError,
    ExperimentConfig,
    inspect_automaton,
    make_env,
    run_experiment,
)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _seeds(text: str) -> list:
    """``0,3,5`` or a range ``0-9``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        lo, sep, hi = part.partition("-")
        try:
            seeds.extend(range(int(lo), int(hi) + 1) if sep and lo else [int(part)])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afrai", description="Reward-automaton inference with Q-learning on grid worlds."
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a multi-seed experiment")
    run.add_argument("--env", choices=("office", "craft", "corridor"), default="office")
    run.add_argument("--task", type=int, default=1)
    run.add_argument("--seeds", type=_seeds, default=list(range(10)),
                     help="comma list or range, e.g. 0-9 (default)")
    run.add_argument("--total-steps", type=int, help="default depends on the task")
    run.add_argument("--eplength", type=int, help="default depends on the task")
    run.add_argument("--alpha", type=float, default=0.5)
    run.add_argument("--gamma", type=float, default=0.9)
    run.add_argument("--epsilon", type=float, default=0.1)
    run.add_argument("--budget-c", type=int, default=500,
                     help="episodes per membership query (default 500)")
    run.add_argument("--map", help="JSON grid file replacing the default map")
    run.add_argument("--out", default="runs", help="output directory")
    run.add_argument("--no-compress-empty", dest="compress_empty", action="store_false",
                     help="keep empty-label steps in traces")
    run.add_argument("--no-compress-repeats", dest="compress_repeats", action="store_false",
                     help="keep zero-reward steps that repeat the previous label")
    run.add_argument("--workers", type=int, default=1, help="parallel seeds")

    inspect = sub.add_parser("inspect", help="print a saved automaton as a table")
    inspect.add_argument("path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "inspect":
        try:
            sys.stdout.write(inspect_automaton(args.path))
        except FraFormatError as exc:
            print(f"afrai: {args.path}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except OSError as exc:
            print(f"afrai: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK

    try:
        config = ExperimentConfig(
            env=args.env, task=args.task, seeds=args.seeds, total_steps=args.total_steps,
            eplength=args.eplength, budget_c=args.budget_c, alpha=args.alpha,
            gamma=args.gamma, epsilon=args.epsilon, compress_empty=args.compress_empty,
            compress_repeats=args.compress_repeats,
            map=args.map, out_dir=args.out, workers=args.workers,
        )
        if config.map:
            make_env(config)  # validate the map before any seed runs
    except (ConfigError, GridConfigError) as exc:
        parser.error(f"invalid configuration: {exc}")
    except OSError as exc:
        parser.error(f"--map: {exc}")

    try:
        results = run_experiment(config)
    except OSError as exc:
        print(f"afrai: cannot write results: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    converged = sum(r.convergence_step is not None for r in results)
    print(f"{converged}/{len(results)} seeds converged; results in {config.out_dir}")
    for r in results:
        status = r.error or (f"converged at step {r.convergence_step}"
                             if r.convergence_step is not None else "not converged")
        print(f"  seed {r.seed}: {r.hyp_states}-state hypothesis, {status}")
    return EXIT_RUNTIME if any(r.error for r in results) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
