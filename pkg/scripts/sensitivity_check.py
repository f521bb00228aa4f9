"""Compare the finite-difference slope of the thought bound in tau with the closed-form sensitivity bound.

For each logit tree it prints the slope, the min-margin bound and a max-margin
variant. The min-margin bound fails whenever the solution margins differ a lot
along the path; the max-margin variant always holds because pi <= 1.
"""

import argparse

from ltstot.bounds import check_sensitivity, delta_plus
from ltstot.suites import logit_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--b-max", type=int, default=3)
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args()

    fails = max_fails = 0
    for k, lt in enumerate(logit_suite(args.count, args.seed)):
        chk = check_sensitivity(lt, args.tau, args.b_max)
        margins = [delta_plus([row], args.tau) for row in lt.solution_rows()]
        g, pi = lt.goal_depth(), lt.goal_prob(args.tau)
        max_bound = args.b_max * g * g * max(margins) / (pi * pi * args.tau**2)
        fails += not chk.holds
        max_fails += chk.slope > max_bound + 1e-6
        if args.verbose or not chk.holds:
            print(f"tree {k:3d} g={g} pi={pi:.4f} margins={[round(m, 3) for m in margins]} "
                  f"slope={chk.slope:.4f} bound={chk.bound:.4f} max-margin={max_bound:.4f}")
    print(f"min-margin bound violated on {fails}/{args.count}; max-margin bound violated on {max_fails}/{args.count}")


if __name__ == "__main__":
    main()
