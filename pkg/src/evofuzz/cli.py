"""Command-line entry point: ``evofuzz {fuzz,compare,rank,replay,gen-target,serve}``.

Exit codes: 0 success, 1 invalid input, 2 I/O failure, 3 internal invariant violation.
"""

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .campaign import ReplayError, replay, run_campaign
from .core import CampaignConfig, ContractViolation, FitnessKind, SelectionKind
from .experiments import compare, rank
from .genome import Rng
from .harness import ProcessHarness, TargetError, generate_benchmark, load_target, serve

EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _rate(text: str) -> float:
    v = float(text.rstrip("%")) / (100 if text.endswith("%") else 1)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a probability in [0, 1], got {text}")
    return v


def _add_ga_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("genetic algorithm")
    g.add_argument("--population-initial-target-size", type=_positive_int, default=10,
                   help="individuals per population in generation 0")
    g.add_argument("--generations", type=_positive_int, default=20,
                   help="stop condition: number of generations")
    g.add_argument("--time-limit", type=float, default=None, help="stop condition: seconds")
    g.add_argument("--failure-limit", type=_positive_int, default=None, help="stop condition: crashes")
    g.add_argument("--test-limit", type=_positive_int, default=None, help="stop condition: executed tests")
    g.add_argument("--max-community-size", type=_positive_int, default=200,
                   help="soft bound on the sum of population target sizes")
    g.add_argument("--cross-over-rate", type=_rate, default=0.8, help="probability of crossover per offspring")
    g.add_argument("--mutation-rate", type=_rate, default=0.05, help="probability of mutation per offspring")
    g.add_argument("--tour", type=_positive_int, default=5, help="tournament size")
    g.add_argument("--fitness", choices=[k.value for k in FitnessKind],
                   default=FitnessKind.LEAST_BRANCH_HIT_COUNT.value, help="fitness function")
    g.add_argument("--selection", choices=[k.value for k in SelectionKind],
                   default=SelectionKind.RANKING.value, help="parent selection scheme")
    g.add_argument("--no-community", action="store_true",
                   help="keep every population at its initial target size")
    p.add_argument("--seed", type=int, default=0, help="campaign seed (repetition i uses seed + i)")


def _config(args, **overrides) -> CampaignConfig:
    kw = dict(
        population_initial_target_size=args.population_initial_target_size,
        generations=args.generations,
        time_limit=args.time_limit,
        failure_limit=args.failure_limit,
        test_limit=args.test_limit,
        max_community_size=args.max_community_size,
        crossover_rate=args.cross_over_rate,
        mutation_rate=args.mutation_rate,
        tour=args.tour,
        fitness=args.fitness,
        selection=args.selection,
        seed=args.seed,
        community=not args.no_community,
    )
    kw.update(overrides)
    try:
        return CampaignConfig(**kw)
    except ContractViolation as e:
        raise InputError(str(e)) from None


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="evofuzz", formatter_class=fmt,
                     description="Coverage-guided evolutionary fuzzing of service interfaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuzz", formatter_class=fmt, help="run one campaign")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--target", type=Path, help="synthetic target definition (JSON)")
    src.add_argument("--process", help="command line of an external harness speaking the line protocol")
    p.add_argument("--timeout", type=float, default=5.0, help="per-test response timeout of --process")
    p.add_argument("--blackbox", action="store_true", help="pure random mutation baseline")
    p.add_argument("--out", type=Path, default=Path("campaign"), help="campaign directory")
    _add_ga_flags(p)

    for name, text in (("compare", "EVO vs BB over paired repetitions"),
                       ("rank", "rank fitness x selection configurations")):
        p = sub.add_parser(name, formatter_class=fmt, help=text)
        p.add_argument("--target", type=Path, required=True)
        p.add_argument("--reps", type=_positive_int, default=10)
        p.add_argument("--jobs", type=_positive_int, default=1, help="parallel repetitions")
        p.add_argument("--out", type=Path, default=Path(name), help="report directory")
        p.add_argument("--keep-campaigns", action="store_true",
                       help="persist every repetition's campaign under the report directory")
        _add_ga_flags(p)
        if name == "compare":
            p.add_argument("--slowdown", type=float, default=None,
                           help="charge EVO this many BB test costs per test (e.g. 13.91)")
        else:
            p.add_argument("--alpha", type=float, default=0.05, help="significance level of pairwise tests")
            only = p.add_mutually_exclusive_group()
            only.add_argument("--fitness-only", action="store_true", help="vary only the fitness function")
            only.add_argument("--selection-only", action="store_true", help="vary only the selection scheme")

    p = sub.add_parser("replay", formatter_class=fmt, help="re-execute a campaign with coverage")
    p.add_argument("--campaign", type=Path, required=True)
    p.add_argument("--target", type=Path, default=None,
                   help="target definition (defaults to the copy stored in the campaign)")
    p.add_argument("--out", type=Path, default=None, help="coverage report file")

    p = sub.add_parser("gen-target", formatter_class=fmt, help="write a synthetic benchmark target")
    p.add_argument("family", choices=["gate-chain", "shared-core", "dead-branch", "trivial"])
    p.add_argument("--depth", type=_positive_int, default=8, help="gate-chain: number of gates")
    p.add_argument("--methods", type=_positive_int, default=11, help="shared-core: number of methods")
    p.add_argument("--core-depth", type=_positive_int, default=8, help="shared-core: gates of the deep method")
    p.add_argument("--fraction", type=float, default=0.5, help="dead-branch: share of unreachable blocks")
    p.add_argument("--size", type=_positive_int, default=20, help="dead-branch: total blocks")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("--out", type=Path, default=None, help="output file (stdout if omitted)")

    p = sub.add_parser("serve", formatter_class=fmt, help="serve a target over stdin/stdout")
    p.add_argument("target", type=Path)
    return parser


def _load(path: Path):
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    return load_target(path)


def cmd_fuzz(args) -> int:
    config = _config(args, blackbox=args.blackbox)
    if args.target is not None:
        svc = _load(args.target)
        state = run_campaign(svc.descriptor, svc, config, args.out)
    else:
        with ProcessHarness(shlex.split(args.process), timeout=args.timeout) as harness:
            state = run_campaign(harness.descriptor, harness, config, args.out)
    summary = state.summary()
    summary.pop("size_history", None)
    summary.pop("curve", None)
    print(json.dumps(summary, indent=1))
    print(f"campaign written to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    target = _load(args.target).to_json()
    if args.reps < 2:
        raise InputError("--reps must be at least 2")
    runs = args.out / "campaigns" if args.keep_campaigns else None
    report = compare(target, _config(args), args.reps, args.seed, args.jobs, args.slowdown, runs)
    report.write(args.out, "compare")
    print(report.render())
    return EXIT_OK


def cmd_rank(args) -> int:
    target = _load(args.target).to_json()
    if args.reps < 2:
        raise InputError("--reps must be at least 2")
    factor = "fitness" if args.fitness_only else "selection" if args.selection_only else None
    runs = args.out / "campaigns" if args.keep_campaigns else None
    report = rank(target, _config(args), args.reps, args.seed, args.jobs, factor, args.alpha, runs)
    report.write(args.out, "rank")
    print(report.render())
    return EXIT_OK


def cmd_replay(args) -> int:
    if not args.campaign.is_dir():
        raise FileNotFoundError(f"{args.campaign}: no such campaign directory")
    target = args.target or args.campaign / "target.json"
    if not target.exists():
        raise InputError(f"{args.campaign}: no stored target copy; pass --target")
    report = replay(args.campaign, _load(target))
    out = args.out or args.campaign / "replay.json"
    out.write_text(json.dumps(report.to_json(), indent=1) + "\n", encoding="utf-8")
    print(f"{report.summary['distinct_blocks']} blocks, {report.summary['distinct_branches']} branches "
          f"over {len(report.records)} tests; {len(report.mismatches)} mismatches")
    print(f"coverage curve written to {out}")
    return EXIT_INVARIANT if report.mismatches else EXIT_OK


def cmd_gen_target(args) -> int:
    params = {"gate-chain": {"depth": args.depth},
              "shared-core": {"methods": args.methods, "core_depth": args.core_depth},
              "dead-branch": {"fraction": args.fraction, "size": args.size},
              "trivial": {}}[args.family]
    try:
        svc = generate_benchmark(args.family, Rng(args.seed), **params)
    except ValueError as e:
        raise InputError(str(e)) from None
    text = svc.dumps()
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_serve(args) -> int:
    serve(_load(args.target), sys.stdin, sys.stdout)
    return EXIT_OK


COMMANDS = {"fuzz": cmd_fuzz, "compare": cmd_compare, "rank": cmd_rank,
            "replay": cmd_replay, "gen-target": cmd_gen_target, "serve": cmd_serve}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InputError, TargetError, ReplayError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ContractViolation as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
