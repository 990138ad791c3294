"""Penalty schedule driver, limit extraction and reflection diagnostics."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInput, RBSDEError
from .solver import build_engine, solve_penalized

TOL_LIMIT = 1e-4
TOL_SKOROKHOD = 1e-3


def barrier_shortfall(sol, scenario=None):
    """``max_{m, node} (S_m - Y_m)^+`` per component."""
    return np.max(np.stack([np.max(np.maximum(s - y, 0.0), axis=0) for y, s in zip(sol.Y, sol.S)]), axis=0)


def skorokhod_residual(sol, engine):
    """``sum_m E[(Y_m - S_m)^+ dK_m]`` per component, expectation at time 0."""
    total = np.zeros(sol.n)
    for m, dk in enumerate(sol.dK):
        gap = np.maximum(sol.Y[m] - sol.S[m], 0.0)
        total += engine.expectation(m, gap * dk)
    return total


def sup_delta(sol_a, sol_b):
    return float(max(np.max(np.abs(ya - yb)) for ya, yb in zip(sol_a.Y, sol_b.Y)))


@dataclass(frozen=True)
class PenaltyEntry:
    k: float
    solution: object
    metrics: dict


@dataclass(frozen=True, eq=False)
class PenaltyRun:
    """Ordered solves along the penalty schedule plus the extracted limit.

    ``converged_at`` is the first schedule index whose sup-norm change from the
    previous entry fell below ``tol_limit`` (``None`` if never: "unconverged").
    """

    scenario: object
    engine: object
    entries: list
    limit: object
    converged_at: int | None
    tol_limit: float

    @property
    def ks(self):
        return [e.k for e in self.entries]

    @property
    def converged(self):
        return self.converged_at is not None

    @property
    def status(self):
        return "converged" if self.converged else "unconverged"

    def solutions(self):
        return [e.solution for e in self.entries]


def _metrics(sol, prev, engine, wall_ms):
    from .verify import bmo_estimate, k_moment

    out = {
        "Y0": sol.Y0.tolist(),
        "delta": None if prev is None else sup_delta(sol, prev),
        "shortfall": barrier_shortfall(sol).tolist(),
        "skorokhod": skorokhod_residual(sol, engine).tolist(),
        "KT_p2": k_moment(sol, 2, engine).tolist(),
        "KT_p4": k_moment(sol, 4, engine).tolist(),
        "sup_Y": sol.sup_norm(),
        "picard_max": sol.picard_max,
        "clamp_count": sol.clamp_count,
        "wall_ms": wall_ms,
    }
    out["bmo"] = bmo_estimate(sol, engine).tolist() if engine.kind == "lattice" else None
    return out


def run_penalty_schedule(scenario, engine=None, tol_limit=TOL_LIMIT, stop_early=False, metrics=True):
    """Solve the penalized system for each ``k_j`` of the scenario's schedule.

    The limit is the last solved entry, relabelled ``"limit"``. With
    ``stop_early`` the schedule is cut at the first converged index. With
    ``metrics=False`` only the sup-norm deltas are recorded.
    """
    if not tol_limit > 0:
        raise InvalidInput("tol_limit must be positive")
    scenario.check()
    engine = engine or build_engine(scenario)
    entries = []
    converged_at = None
    prev = None
    for j, k in enumerate(scenario.penalty_schedule.levels()):
        t0 = time.perf_counter()
        try:
            sol = solve_penalized(scenario, k, engine)
        except RBSDEError as exc:
            exc.args = (f"k_{j}={k:g}: {exc}",) + exc.args[1:]
            raise
        wall_ms = 1e3 * (time.perf_counter() - t0)
        if metrics:
            info = _metrics(sol, prev, engine, wall_ms)
        else:
            info = {"delta": None if prev is None else sup_delta(sol, prev), "wall_ms": wall_ms}
        entries.append(PenaltyEntry(k, sol, info))
        if converged_at is None and info["delta"] is not None and info["delta"] < tol_limit:
            converged_at = j
            if stop_early:
                break
        prev = sol
    limit = entries[-1].solution.relabel("limit")
    return PenaltyRun(scenario, engine, entries, limit, converged_at, tol_limit)


@dataclass(frozen=True)
class UniquenessReport:
    max_discrepancy: float
    per_perturbation: dict = field(default_factory=dict)
    tol: float = 1e-9

    @property
    def passed(self):
        return self.max_discrepancy <= self.tol


DEFAULT_PERTURBATIONS = (
    {"picard_start": "upper"},
    {"picard_start": "lower"},
    {"order": "reversed"},
    {"order": "permuted"},
    {"grain": 7},
)


def uniqueness_probe(scenario, engine=None, perturbations=DEFAULT_PERTURBATIONS, tol=1e-9, base=None):
    """Rerun the schedule under numerically equivalent configurations.

    Each perturbation is a dict of ``EngineConfig`` overrides. Reports the largest
    nodewise difference of ``Y`` against the baseline (``base``, solved here when
    not given), over every schedule entry.
    """
    engine = engine or build_engine(scenario)
    if base is None:
        base = run_penalty_schedule(scenario, engine)
    report = {}
    for pert in perturbations:
        alt_scn = scenario.replace(engine_config=replace(scenario.engine_config, **pert))
        alt = run_penalty_schedule(alt_scn, engine, metrics=False)
        disc = max(sup_delta(a.solution, b.solution) for a, b in zip(base.entries, alt.entries))
        report[_label(pert)] = disc
    worst = max(report.values()) if report else 0.0
    return UniquenessReport(worst, report, tol)


def _label(pert):
    return ",".join(f"{k}={v}" for k, v in sorted(pert.items())) or "identical"
