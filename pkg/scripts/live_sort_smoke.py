"""Ten Sort instances with LTS against a live OpenAI-compatible endpoint (LTSTOT_ENDPOINT).

Optionally records request/response fixtures for later replay with --record DIR.
"""

import argparse
import os
import sys

from ltstot.harness import config_from_dict, emit_results, run_batch


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--algorithm", default="lts", choices=["lts", "dfs", "beam"])
    ap.add_argument("--budget", type=int, default=60)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--record")
    args = ap.parse_args()
    if not os.environ.get("LTSTOT_ENDPOINT"):
        sys.exit("set LTSTOT_ENDPOINT (and LTSTOT_MODEL) first")
    cfg = config_from_dict(
        {
            "domain": {"name": "sort", "count": args.count},
            "algorithm": {"name": args.algorithm, "beam_width": 3 if args.algorithm == "beam" else None},
            "backend": {"kind": "lm", "lm": {"samples": 3}, "record": args.record},
            "budget": {"values": [args.budget]},
            "live": True,
        }
    )
    records = run_batch(cfg)
    sys.stdout.write(emit_results(records, None, "csv", cfg.config_hash()))
    print(f"# solved {sum(r.goal for r in records)}/{len(records)}", file=sys.stderr)


if __name__ == "__main__":
    main()
