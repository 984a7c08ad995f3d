"""Command-line entry point: ``aoii-eh <subcommand> [--config PATH] ...``.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from aoii_eh import experiments
from aoii_eh.config import ConfigError, load_config, parse_value
from aoii_eh.solver import SolverDidNotConverge

EXIT_CONFIG = 2
EXIT_SOLVER = 3

# defaults that differ per study; a config file or --set overrides them
COMMAND_DEFAULTS = {
    "sweep-n": {"p": 0.7, "mu": 0.3},
    "compare": {"mu": 0.5},
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH", help="flat key = value config file")
    sub.add_argument("--seed", type=int, help="override the simulation seed")
    sub.add_argument("--out", metavar="DIR", help="output directory")
    sub.add_argument("--threads", type=int, help="worker processes for independent points")
    sub.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoii-eh",
        description="AoII-optimal sampling and transmission with energy harvesting.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    subs = parser.add_subparsers(dest="command", required=True)

    _add_common(subs.add_parser("solve", help="solve the MDP and export the policy"))
    sim = subs.add_parser("simulate", help="simulate the optimal policy")
    _add_common(sim)
    sim.add_argument("--trace", type=int, default=0, metavar="SLOTS",
                     help="also dump a per-slot trace of replication 0")
    _add_common(subs.add_parser("sweep-n", help="optimal gain versus the AoI bound N"))
    _add_common(subs.add_parser("compare", help="real-time error, AoII- vs AoI-optimal"))

    chain = subs.add_parser("analyze-chain", help="recurrent-class decomposition as JSON")
    _add_common(chain)
    chain.add_argument("--policy", default="union",
                       choices=("union", "mixing", "optimal", "act-at-level"))
    chain.add_argument("--level", type=int, default=3,
                       help="battery level for --policy act-at-level")

    belief = subs.add_parser("belief", help="print the AoII belief for an AoI as CSV")
    belief.add_argument("--p", type=float, required=True)
    belief.add_argument("--theta", type=int, required=True)

    _add_common(subs.add_parser("kernel-dump", help="write the transition kernel as CSV"))
    return parser


def _config(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, text = item.split("=", 1)
        overrides[key.strip()] = parse_value(key.strip(), text)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    defaults = COMMAND_DEFAULTS.get(args.command, {})
    return load_config(args.config, overrides, **defaults)


def _print_json(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "belief":
            if not (0.5 < args.p <= 1.0) or args.theta < 1:
                raise ConfigError("belief needs 0.5 < p <= 1 and theta >= 1")
            w = csv.writer(sys.stdout, lineterminator="\n")
            w.writerow(("i", "b_i"))
            w.writerows(experiments.belief_rows(args.p, args.theta))
            return 0

        config = _config(args)
        if args.command == "solve":
            _print_json(experiments.cmd_solve(config))
        elif args.command == "simulate":
            _print_json(experiments.cmd_simulate(config, trace_slots=args.trace))
        elif args.command == "sweep-n":
            _print_json(experiments.cmd_sweep_n(config))
        elif args.command == "compare":
            _print_json(experiments.cmd_compare(config))
        elif args.command == "analyze-chain":
            _print_json(experiments.cmd_analyze_chain(config, args.policy, args.level))
        elif args.command == "kernel-dump":
            print(experiments.cmd_kernel_dump(config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverDidNotConverge as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
