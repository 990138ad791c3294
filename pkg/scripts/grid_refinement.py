"""Y0 on M, 2M, 4M time steps and the O(dt) refinement predicate.

    python3 scripts/grid_refinement.py reflected_quadratic_active --solver penalized
"""

import argparse
import json

from rbsde.scenarios import bundled, bundled_names
from rbsde.verify import grid_refinement


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("names", nargs="*")
    ap.add_argument("--solver", choices=("direct", "penalized"), default="direct")
    args = ap.parse_args()
    for name in args.names or bundled_names():
        scn = bundled(name)
        if scn.engine_config.engine != "lattice":
            continue
        print(name, json.dumps(grid_refinement(scn, solver=args.solver)))


if __name__ == "__main__":
    main()
