"""Run the full verify battery on every bundled scenario and print one status line each.

    python3 scripts/run_scenarios.py --out runs/
"""

import argparse
from pathlib import Path

from rbsde.cli import RunConfig, run_experiment
from rbsde.scenarios import bundled_names


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--no-uniqueness", action="store_true")
    ap.add_argument("names", nargs="*", help="subset of bundled scenarios (default: all)")
    args = ap.parse_args()
    for name in args.names or bundled_names():
        cfg = RunConfig(scenario=name, out=str(Path(args.out) / name), uniqueness=not args.no_uniqueness)
        rep = run_experiment(cfg)
        failed = [c["name"] for c in rep.checks if c["status"] == "fail"]
        warned = [c["name"] for c in rep.checks if c["status"] == "warn"]
        row = rep.rows[-1]
        print(f"{name:28s} {rep.status:12s} Y0={row['Y0_1']:.6f} shortfall={row['shortfall_1']:.2e} "
              f"schedule={rep.run_status} fail={failed or '-'} warn={warned or '-'}")


if __name__ == "__main__":
    main()
