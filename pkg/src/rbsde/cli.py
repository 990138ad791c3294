"""Command-line front end: ``rbsde solve | verify | acceptance``.

``solve`` runs the penalty schedule and writes the per-k metric table;
``verify`` additionally runs every applicable check. Both write into ``--out``:

* ``metrics.csv``   one row per k, ascending, fixed column order
* ``report.json``   fingerprint, version, timings, metric rows, checks
* ``report.txt``    the same, as a human-readable table
* ``limit.npz``     the limit solution (every layer on the lattice, layer 0 for mc)

Exit codes: 0 pass, 1 check failure, 2 usage/config/assumption error,
3 numerical error (non-convergence, resource limit, regression breakdown).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    AssumptionError,
    ConfigError,
    InvalidInput,
    NonConvergence,
    RBSDEError,
    RegressionError,
    ResourceError,
    UnsupportedEngine,
)
from .model import PenaltySchedule
from .reflection import run_penalty_schedule
from .scenarios import bundled_names, bundled_path, load_scenario
from .verify import Tolerances, verify_run

log = logging.getLogger("rbsde")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
NUMERICAL_ERRORS = (NonConvergence, ResourceError, RegressionError)
CONFIG_ERRORS = (ConfigError, InvalidInput, AssumptionError, UnsupportedEngine)


@dataclass
class RunConfig:
    """Everything that determines one experiment.

    ``None`` fields keep the scenario file's own value.
    """

    scenario: str
    out: str
    engine: str | None = None
    steps: int | None = None
    k0: float | None = None
    kfactor: float | None = None
    kcount: int | None = None
    seed: int | None = None
    paths: int | None = None
    basis_degree: int | None = None
    node_budget: int | None = None
    grain: int | None = None
    tol_limit: float = 1e-4
    tol_skorokhod: float = 1e-3
    tol_shortfall: float = 1e-2
    verify: bool = True
    uniqueness: bool = True
    timings: bool = True

    def __post_init__(self):
        for name in ("tol_limit", "tol_skorokhod", "tol_shortfall"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")

    def scenario_path(self):
        """The scenario file; bare names of bundled scenarios are accepted too."""
        p = Path(self.scenario)
        if not p.exists() and self.scenario in bundled_names():
            return bundled_path(self.scenario)
        return p

    def load(self):
        scn = load_scenario(self.scenario_path(), check=False)
        if self.steps is not None:
            scn = scn.replace(steps=self.steps)
        sched = scn.penalty_schedule
        if any(v is not None for v in (self.k0, self.kfactor, self.kcount)):
            sched = PenaltySchedule(
                k0=sched.k0 if self.k0 is None else self.k0,
                growth=sched.growth if self.kfactor is None else self.kfactor,
                count=sched.count if self.kcount is None else self.kcount,
            )
            scn = scn.replace(penalty_schedule=sched)
        eng = {k: v for k, v in (("engine", self.engine), ("seed", self.seed), ("paths", self.paths),
                                 ("basis_degree", self.basis_degree), ("node_budget", self.node_budget),
                                 ("grain", self.grain)) if v is not None}
        if eng:
            scn = scn.with_engine(**eng)
        return scn.check()


@dataclass
class Report:
    fingerprint: str | None
    version: str
    status: str
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    run_status: str | None = None
    error: str | None = None
    scenario: dict | None = None
    n: int = 1

    @property
    def passed(self):
        return self.status == "passed"

    def to_dict(self):
        return asdict(self)


# ---------------------------------------------------------------------------
# Metric table
# ---------------------------------------------------------------------------

METRIC_GROUPS = ("Y0", "shortfall", "skorokhod", "bmo", "KT_p2")


def metric_columns(n):
    cols = ["k"]
    for g in METRIC_GROUPS:
        cols += [f"{g}_{i + 1}" for i in range(n)]
    return cols + ["picard_max", "wall_ms"]


def metric_rows(run):
    rows = []
    for e in sorted(run.entries, key=lambda e: e.k):
        m = e.metrics
        row = {"k": float(e.k)}
        for g in METRIC_GROUPS:
            vals = m.get(g)
            for i in range(run.scenario.n):
                row[f"{g}_{i + 1}"] = None if vals is None else float(vals[i])
        row["picard_max"] = int(m["picard_max"])
        row["wall_ms"] = float(m["wall_ms"])
        rows.append(row)
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_metrics_csv(rows, n, path, timings=True):
    """Fixed-column CSV; with ``timings=False`` the wall-clock column is left blank."""
    cols = metric_columns(n)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_fmt(row[c]) if (c != "wall_ms" or timings) else "" for c in cols])
    Path(path).write_text(buf.getvalue())


def _save_limit(run, path):
    sol = run.limit
    arrays = {"Y0": sol.Y0, "k_source": np.array(float(sol.source_k or np.nan))}
    if sol.engine_kind == "lattice":
        for m, y in enumerate(sol.Y):
            arrays[f"Y_{m}"] = y
    else:
        arrays["Y_0"] = sol.Y[0]
    np.savez(path, **arrays)


def format_report(rep):
    lines = [f"rbsde {rep.version}  scenario {rep.fingerprint}  status {rep.status}"]
    if rep.error:
        lines.append(f"error: {rep.error}")
    if rep.run_status:
        lines.append(f"penalty schedule: {rep.run_status}")
    if rep.rows:
        cols = [c for c in metric_columns(rep.n) if c != "wall_ms"]
        lines.append("")
        lines.append("  ".join(f"{c:>12}" for c in cols))
        for row in rep.rows:
            lines.append("  ".join(f"{'-' if row[c] is None else format(row[c], '.6g'):>12}" for c in cols))
    if rep.checks:
        lines.append("")
        width = max(len(c["name"]) for c in rep.checks)
        for c in rep.checks:
            val = c["value"]
            val = "" if val is None else (f"{val:.3e}" if isinstance(val, float) else str(val))
            tol = "" if c["tol"] is None else f"(tol {c['tol']:.1e})"
            lines.append(f"{c['name']:<{width}}  {c['status']:<8} {val} {tol}".rstrip())
    lines.append("")
    lines.append("timings: " + ", ".join(f"{k} {v:.2f}s" for k, v in rep.timings.items()))
    return "\n".join(lines) + "\n"


def write_report(rep, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(rep.to_dict(), indent=2, default=_json_default))
    (out / "report.txt").write_text(format_report(rep))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    return str(o)


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def run_experiment(config):
    """Solve the schedule, run the checks, write every report file.

    Errors propagate after a partial report marked ``"failed"`` has been written.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rep = Report(None, __version__, "failed")
    t_start = time.perf_counter()
    try:
        scn = config.load()
        rep.fingerprint = scn.fingerprint()
        rep.scenario = scn.to_dict()
        rep.n = scn.n
        t0 = time.perf_counter()
        run = run_penalty_schedule(scn, tol_limit=config.tol_limit)
        rep.timings["schedule"] = time.perf_counter() - t0
        rep.run_status = run.status
        rep.rows = metric_rows(run)
        write_metrics_csv(rep.rows, scn.n, out / "metrics.csv", timings=config.timings)
        _save_limit(run, out / "limit.npz")
        if config.verify:
            t0 = time.perf_counter()
            tol = Tolerances(skorokhod=config.tol_skorokhod, shortfall=config.tol_shortfall)
            vr = verify_run(run, tol, uniqueness=config.uniqueness)
            rep.checks = [c.to_dict() for c in vr.checks]
            rep.timings["verify"] = time.perf_counter() - t0
        rep.status = "passed" if all(c["status"] != "fail" for c in rep.checks) else "check_failed"
    except RBSDEError as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        rep.timings["total"] = time.perf_counter() - t_start
        if not config.timings:
            rep.timings = {}
            for row in rep.rows:
                row["wall_ms"] = None
        write_report(rep, out)
    return rep


def _exit_code(exc):
    if isinstance(exc, NUMERICAL_ERRORS):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


# ---------------------------------------------------------------------------
# argparse
# ---------------------------------------------------------------------------


def _add_run_args(p):
    p.add_argument("--scenario", required=True, help="scenario JSON file (or a bundled scenario name)")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--engine", choices=("lattice", "mc"))
    p.add_argument("--steps", type=int)
    p.add_argument("--k0", type=float)
    p.add_argument("--kfactor", type=float)
    p.add_argument("--kcount", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--paths", type=int)
    p.add_argument("--basis-degree", type=int)
    p.add_argument("--node-budget", type=int)
    p.add_argument("--grain", type=int)
    p.add_argument("--tol-limit", type=float, default=1e-4)
    p.add_argument("--tol-skorokhod", type=float, default=1e-3)
    p.add_argument("--tol-shortfall", type=float, default=1e-2)
    p.add_argument("--no-timings", action="store_true",
                   help="leave wall-clock fields empty so repeated runs are byte-identical")


def build_parser():
    parser = argparse.ArgumentParser(prog="rbsde", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"rbsde {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the penalty schedule and write the metric table")
    _add_run_args(p)
    p = sub.add_parser("verify", help="solve, then run every applicable check")
    _add_run_args(p)
    p.add_argument("--no-uniqueness", action="store_true", help="skip the perturbed-rerun probe")

    p = sub.add_parser("acceptance", help="run the acceptance suite on the bundled scenarios")
    p.add_argument("--out", required=True)
    p.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "acceptance":
        from .acceptance import run_acceptance

        results = run_acceptance(args.out, only=args.only)
        return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK

    try:
        config = RunConfig(
            scenario=args.scenario, out=args.out, engine=args.engine, steps=args.steps, k0=args.k0,
            kfactor=args.kfactor, kcount=args.kcount, seed=args.seed, paths=args.paths,
            basis_degree=args.basis_degree, node_budget=args.node_budget, grain=args.grain,
            tol_limit=args.tol_limit, tol_skorokhod=args.tol_skorokhod, tol_shortfall=args.tol_shortfall,
            verify=args.command == "verify",
            uniqueness=not getattr(args, "no_uniqueness", False),
            timings=not args.no_timings,
        )
    except ConfigError as exc:
        print(f"rbsde: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        rep = run_experiment(config)
    except (*NUMERICAL_ERRORS, *CONFIG_ERRORS) as exc:
        print(f"rbsde: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _exit_code(exc)

    sys.stdout.write(format_report(rep))
    return EXIT_OK if rep.passed else EXIT_CHECK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
