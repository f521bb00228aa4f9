"""Accuracy vs budget for LTS, guided DFS and beam search on a synthetic suite."""

import argparse

from ltstot.harness import config_from_dict, emit_results, sweep_budget


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--suite", default="random", help="random, solvable, uniform, deep_trap, adversarial")
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--budgets", default="0,2,5,10,20,50,100,inf")
    ap.add_argument("--out", help="CSV path (default: print a table)")
    args = ap.parse_args()

    rows = []
    for alg in ("lts", "dfs", "beam"):
        cfg = config_from_dict(
            {
                "domain": {"suite": args.suite, "count": args.count, "seed": args.seed},
                "algorithm": {"name": alg, "beam_width": 3 if alg == "beam" else None},
                "budget": {"values": args.budgets.split(",")},
            }
        )
        rows += sweep_budget(cfg)
    if args.out:
        emit_results(rows, args.out, "csv")
        return
    budgets = sorted({r.budget_value for r in rows})
    print("budget  " + "  ".join(f"{a:>6s}" for a in ("lts", "dfs", "beam")))
    for b in budgets:
        acc = {r.algorithm: r.accuracy for r in rows if r.budget_value == b}
        print(f"{b:>6g}  " + "  ".join(f"{acc[a]:6.3f}" for a in ("lts", "dfs", "beam")))


if __name__ == "__main__":
    main()
