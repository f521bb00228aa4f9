"""``ltstot`` command line: run, sweep-budget, sweep-temperature, verify-bounds, gen-instances."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .budget import BudgetMeter
from .harness import (
    BackendFailure,
    ConfigError,
    CurveRow,
    RunRecord,
    emit_results,
    load_config,
    run_batch,
    sweep_budget,
    sweep_cost_temperature,
)
from .nodes import PolicyError

EXIT_OK, EXIT_CONFIG, EXIT_BACKEND = 0, 2, 3


def _emit(cfg, rows, kind, out: str | None, fmt: str | None) -> None:
    path = out or cfg.output.path
    text = emit_results(rows, path, fmt or cfg.output.format, cfg.config_hash(), kind)
    if path is None:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    _emit(cfg, run_batch(cfg), RunRecord, args.out, args.format)
    return EXIT_OK


def cmd_sweep_budget(args) -> int:
    cfg = load_config(args.config)
    _emit(cfg, sweep_budget(cfg), CurveRow, args.out, args.format)
    return EXIT_OK


def cmd_sweep_temperature(args) -> int:
    cfg = load_config(args.config)
    try:
        taus = [float(t) for t in args.taus.split(",")]
    except ValueError:
        raise ConfigError(f"bad --taus {args.taus!r}") from None
    _emit(cfg, sweep_cost_temperature(cfg, taus), CurveRow, args.out, args.format)
    return EXIT_OK


def cmd_verify_bounds(args) -> int:
    from .bounds import verify_search_against_bounds
    from .policy import SyntheticPolicy
    from .search import lts_search
    from .suites import random_suite

    failures = 0
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for i, tree in enumerate(random_suite(args.count, args.seed)):
            res = lts_search(SyntheticPolicy(tree, args.b_max, args.seed), tree.root_node(), BudgetMeter(), 1.0, tree.max_depth() + 1)
            rep = verify_search_against_bounds(res, tree, args.b_max)
            failures += not all(rep.satisfied)
            out.write(json.dumps({"tree": i, **json.loads(rep.to_json())}) + "\n")
    finally:
        if args.out:
            out.close()
    print(f"{args.count - failures}/{args.count} runs within both bounds", file=sys.stderr)
    return EXIT_OK if failures == 0 else 1


def cmd_gen_instances(args) -> int:
    if args.domain == "sort":
        from .domains.sort import dump_instances, sort_make_instances

        text = dump_instances(sort_make_instances(args.seed, args.count))
    elif args.domain == "blocksworld":
        from .domains.blocksworld import bw_make_problems, dump_problems

        text = dump_problems(bw_make_problems(args.seed, args.step, args.count))
    else:
        raise ConfigError(f"cannot generate instances for {args.domain!r}")
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ltstot", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--out", help="output path (default: config output.path or stdout)")
        sp.add_argument("--format", choices=["csv", "json"])
        return sp

    with_config(sub.add_parser("run", help="run one batch")).set_defaults(func=cmd_run)
    with_config(sub.add_parser("sweep-budget", help="accuracy vs budget")).set_defaults(func=cmd_sweep_budget)
    sp = with_config(sub.add_parser("sweep-temperature", help="LTS accuracy vs cost temperature"))
    sp.add_argument("--taus", default="0.01,0.5,1.0,1.5,2.0")
    sp.set_defaults(func=cmd_sweep_temperature)

    sp = sub.add_parser("verify-bounds", help="check LTS expansion/thought bounds on random synthetic trees")
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--b-max", type=int, default=3)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify_bounds)

    sp = sub.add_parser("gen-instances", help="write a Sort or Blocksworld instance file")
    sp.add_argument("--domain", choices=["sort", "blocksworld"], required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--step", type=int, default=2)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen_instances)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (BackendFailure, PolicyError) as err:
        print(f"backend failure: {err}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
