"""Command line entry point.

Usage::

    piola verify SCENARIO.json [SCENARIO.json ...] [--format text|json]
                 [--seed N] [--points N] [--quad-order N] [--tolerance X]
    piola verify --builtin NAME
    piola verify --list-checks

Exit status: 0 when every check passes, 1 when any check fails, 2 when a
scenario cannot be loaded.  ``PIOLA_SEED`` overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import os
import sys

from piola.scenario import (
    CHECKS, ScenarioError, builtin_names, load_builtin, load_scenario, render, run,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_LOAD = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="piola", description="Verify Piola identities on scenario files.")
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run the checks of one or more scenarios")
    v.add_argument("scenarios", nargs="*", metavar="scenario.json")
    v.add_argument("--builtin", action="append", default=[], metavar="NAME",
                   help="run a built-in scenario (repeatable); 'all' runs every one")
    v.add_argument("--format", choices=("text", "json"), default="text")
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--points", type=int, default=None, help="sample points per pointwise check")
    v.add_argument("--quad-order", type=int, default=None, help="Gauss-Legendre points per axis")
    v.add_argument("--tolerance", type=float, default=None, help="pointwise tolerance")
    v.add_argument("--list-checks", action="store_true", help="list check names and exit")
    return parser


def _seed(args) -> int | None:
    env = os.environ.get("PIOLA_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ScenarioError(f"PIOLA_SEED: expected an integer, got {env!r}") from None
    return args.seed


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_checks:
        for name, text in CHECKS.items():
            print(f"{name:<22}{text}")
        print("\nbuilt-in scenarios: " + ", ".join(builtin_names()))
        return EXIT_PASS

    names = []
    for b in args.builtin:
        names.extend(builtin_names() if b == "all" else [b])
    if not names and not args.scenarios:
        print("piola verify: no scenario given (pass files or --builtin NAME)", file=sys.stderr)
        return EXIT_LOAD
    try:
        seed = _seed(args)
        scenarios = [load_builtin(n) for n in names] + [load_scenario(p) for p in args.scenarios]
    except ScenarioError as exc:
        print(f"piola verify: {exc}", file=sys.stderr)
        return EXIT_LOAD

    reports = [run(sc, seed=seed, points=args.points, quad_order=args.quad_order,
                   tolerance=args.tolerance) for sc in scenarios]
    sys.stdout.write(render(reports if len(reports) > 1 else reports[0], args.format))
    return EXIT_PASS if all(r.verdict == "pass" for r in reports) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
