"""Barrier shortfall against k along the penalty schedule, with successive ratios.

Writes a CSV (k, shortfall, ratio to previous) and prints the mean ratio over the
last doublings; an O(1/k) decay shows up as ratios near 0.5.

    python3 scripts/shortfall_rate.py reflected_quadratic_active --kcount 16
"""

import argparse
import csv
import sys

import numpy as np

from rbsde.model import PenaltySchedule
from rbsde.reflection import run_penalty_schedule
from rbsde.scenarios import bundled


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("scenario", nargs="?", default="reflected_quadratic_active")
    ap.add_argument("--kcount", type=int, default=13)
    ap.add_argument("--last", type=int, default=6)
    args = ap.parse_args()
    scn = bundled(args.scenario)
    scn = scn.replace(penalty_schedule=PenaltySchedule(scn.penalty_schedule.k0, 2.0, args.kcount))
    run = run_penalty_schedule(scn, metrics=True)
    sf = np.array([max(e.metrics["shortfall"]) for e in run.entries])
    w = csv.writer(sys.stdout)
    w.writerow(["k", "shortfall", "ratio"])
    for j, (k, s) in enumerate(zip(run.ks, sf)):
        w.writerow([k, repr(float(s)), "" if j == 0 or sf[j - 1] == 0 else repr(float(s / sf[j - 1]))])
    tail = sf[-args.last - 1:]
    if np.all(tail[:-1] > 0):
        print(f"# mean ratio over last {args.last} doublings: {np.mean(tail[1:] / tail[:-1]):.4f}", file=sys.stderr)
    else:
        print("# shortfall vanishes: barrier never binds", file=sys.stderr)


if __name__ == "__main__":
    main()
