"""Acceptance criteria on the bundled scenarios.

Each ``criterion_*`` function runs one criterion at its fixed tolerance and
returns a :class:`CriterionResult`. Shared penalty runs are cached for the
lifetime of the process so the full suite solves each schedule once.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .mc import MonteCarloEngine
from .reflection import barrier_shortfall, run_penalty_schedule, skorokhod_residual, uniqueness_probe
from .scenarios import bundled
from .solver import build_engine, solve_direct_reflected, solve_penalized
from .verify import (
    bmo_estimate,
    check_comparison_hypotheses,
    cole_hopf_oracle,
    compare_runs,
    k_moment,
    optimal_stopping_value,
    ratio,
    representation_gap,
)

# Scenario with a barrier that never binds under gamma = 1 is kept as written;
# the "_active" variant exercises the reflection.
REFLECTED = ("reflected_quadratic", "reflected_quadratic_active")


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    runtime_s: float
    budget_s: float | None = None
    details: dict = field(default_factory=dict)

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        budget = f" (budget {self.budget_s:g} s)" if self.budget_s else ""
        return f"[{mark}] criterion {self.number:2d} {self.name}: {self.runtime_s:.2f} s{budget}"


def _timed(budget=None):
    def wrap(fn):
        def run(*args, **kw):
            t0 = time.perf_counter()
            number, name, ok, details = fn(*args, **kw)
            dt = time.perf_counter() - t0
            if budget is not None:
                details["runtime_within_budget"] = dt < budget
                ok = ok and dt < budget
            return CriterionResult(number, name, bool(ok), dt, budget, _plain(details))

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.generic):
        return x.item()
    return x


@lru_cache(maxsize=None)
def _setup(name):
    scn = bundled(name)
    return scn, build_engine(scn)


@lru_cache(maxsize=None)
def _run(name):
    scn, eng = _setup(name)
    return run_penalty_schedule(scn, eng)


@lru_cache(maxsize=None)
def _direct(name):
    scn, eng = _setup(name)
    return solve_direct_reflected(scn, eng)


# ---------------------------------------------------------------------------


@_timed(budget=1.0)
def criterion_1():
    """Unreflected reduction: k=0 solve equals the direct lattice expectation of g."""
    scn = bundled("unreflected_zero")
    eng = build_engine(scn)
    sol = solve_penalized(scn, 0.0, eng)
    M = scn.steps
    expected = eng.expectation(M, scn.terminal(eng.states(M)))
    err = float(np.max(np.abs(sol.Y0 - expected)))
    k_zero = all(np.all(dk == 0.0) for dk in sol.dK)
    return 1, "unreflected reduction", err <= 1e-10 and k_zero, {
        "Y0": sol.Y0, "expected": expected, "abs_err": err, "tol": 1e-10, "K_identically_zero": k_zero}


@_timed(budget=2.0)
def criterion_2():
    """Quadratic driver, inactive barrier: solver Y0 vs (1/gamma) log E exp(gamma g)."""
    scn = bundled("quadratic_inactive")
    eng = build_engine(scn)
    sol = solve_penalized(scn, 0.0, eng)
    oracle, _ = cole_hopf_oracle(scn)
    err = abs(float(sol.Y0[0]) - oracle)
    return 2, "exponential-transform oracle", err <= 5e-3, {
        "Y0": sol.Y0[0], "oracle": oracle, "abs_err": err, "tol": 5e-3}


@_timed(budget=10.0)
def criterion_3():
    """Reflected quadratic: limit Y0 vs the reflected exponential-transform DP."""
    details = {}
    ok = True
    for name in REFLECTED:
        t0 = time.perf_counter()
        run = _run(name)
        unrefl, refl = cole_hopf_oracle(run.scenario)
        tol = max(5e-3, 3.0 / run.ks[-1])
        err = abs(float(run.limit.Y0[0]) - refl)
        ok &= err <= tol
        details[name] = {"Y0_limit": run.limit.Y0[0], "oracle_reflected": refl, "oracle_unreflected": unrefl,
                         "abs_err": err, "tol": tol, "k_max": run.ks[-1], "run_status": run.status,
                         "barrier_binds": bool(refl - unrefl > 1e-12),
                         "seconds": time.perf_counter() - t0}
    return 3, "reflected exponential-transform oracle", ok, details


@_timed()
def criterion_4():
    """Monotone convergence: Y^(k_j) <= Y^(k_{j+1}) nodewise within 1e-10."""
    details = {}
    ok = True
    for name in REFLECTED:
        run = _run(name)
        worst = 0.0
        for a, b in zip(run.entries[:-1], run.entries[1:]):
            for ya, yb in zip(a.solution.Y, b.solution.Y):
                worst = max(worst, float(np.max(ya - yb)))
        ok &= worst <= 1e-10
        details[name] = {"max_violation": worst, "tol": 1e-10}
    return 4, "monotone convergence in k", ok, details


def shortfall_profile(run, last=6):
    """Shortfall per k, monotonicity, and mean ratio over the last ``last`` doublings."""
    sf = np.array([np.max(e.metrics["shortfall"]) for e in run.entries])
    nonincreasing = bool(np.all(np.diff(sf) <= 0.0))
    tail = sf[-(last + 1):]
    if np.all(tail[:-1] == 0.0):
        mean_ratio = None
    else:
        mean_ratio = float(np.mean(tail[1:] / tail[:-1]))
    return sf, nonincreasing, mean_ratio


@_timed()
def criterion_5():
    """Barrier attainment: shortfall nonincreasing, small at k_max, roughly halving."""
    details = {}
    ok = True
    for name in REFLECTED:
        run = _run(name)
        sf, mono, mean_ratio = shortfall_profile(run)
        growths = np.diff(np.log(run.ks))
        doubling = bool(np.allclose(growths, np.log(2.0)))
        ratio_ok = True if mean_ratio is None else mean_ratio <= 0.75
        this = mono and sf[-1] <= 1e-2 and ratio_ok and doubling
        ok &= this
        details[name] = {"shortfall": sf, "nonincreasing": mono, "shortfall_kmax": sf[-1], "tol": 1e-2,
                         "mean_ratio_last6": mean_ratio, "ratio_tol": 0.75,
                         "note": "zero shortfall at every k: ratio not evaluable" if mean_ratio is None else ""}
    return 5, "barrier attainment", ok, details


@_timed()
def criterion_6():
    """Skorokhod condition: limit residual <= 1e-3, direct-scheme residual exactly 0."""
    details = {}
    ok = True
    for name in REFLECTED:
        scn, eng = _setup(name)
        lim = skorokhod_residual(_run(name).limit, eng)
        direct = skorokhod_residual(_direct(name), eng)
        this = bool(np.all(lim <= 1e-3) and np.all(direct == 0.0))
        ok &= this
        details[name] = {"limit_residual": lim, "direct_residual": direct, "tol": 1e-3}
    return 6, "Skorokhod condition", ok, details


@_timed()
def criterion_7():
    """Optimal-stopping representation of the limit; exact identity for the zero driver."""
    details = {}
    ok = True
    for name in REFLECTED:
        scn, eng = _setup(name)
        run = _run(name)
        gap = representation_gap(optimal_stopping_value(run.limit, scn, eng), run.limit)
        tol = max(1e-2, 3.0 / run.ks[-1])
        ok &= gap <= tol
        details[name] = {"gap": gap, "tol": tol}
    scn, eng = _setup("reflected_zero_driver")
    direct = _direct("reflected_zero_driver")
    gap0 = representation_gap(optimal_stopping_value(direct, scn, eng), direct)
    ok &= gap0 <= 1e-8
    details["reflected_zero_driver (direct)"] = {"gap": gap0, "tol": 1e-8}
    return 7, "optimal-stopping representation", ok, details


@_timed(budget=30.0)
def criterion_8():
    """Comparison: bumping terminal, barrier or drift by +0.1 never lowers Y."""
    scn, eng = _setup("coupled_pair")
    base = _run("coupled_pair")
    bumps = {
        "terminal+0.1": scn.replace(terminal=scn.terminal.bumped(0.1)),
        "barrier+0.1": scn.replace(barrier=scn.barrier.bumped(0.1)),
        "drift+0.1": scn.replace(generator=scn.generator.bumped(0.1)),
    }
    details = {}
    ok = True
    for label, other in bumps.items():
        hyp = check_comparison_hypotheses(scn, other)
        rep = compare_runs(base, run_penalty_schedule(other, eng), tol=1e-9, hypotheses=hyp)
        ok &= rep.passed and hyp["passed"]
        details[label] = {"max_violation": rep.max_violation, "per_k": {f"{k:g}": v for k, v in rep.per_k.items()},
                          "hypotheses": hyp, "tol": 1e-9}
    return 8, "comparison", ok, details


@_timed()
def criterion_9():
    """Uniform bounds across the schedule: sup|Y|, BMO surrogate, E[K_T^2]^(1/2) max/min <= 2."""
    details = {}
    run = _run("reflected_quadratic")
    scn, eng = _setup("reflected_quadratic")
    sols = run.solutions()
    sup = ratio([s.sup_norm() for s in sols])
    bmo = max(ratio([bmo_estimate(s, eng)[i] for s in sols]) for i in range(scn.n))
    km = max(ratio([k_moment(s, 2, eng)[i] for s in sols]) for i in range(scn.n))
    clamps = sum(s.clamp_count for s in sols)
    ok = sup <= 2 and bmo <= 2 and km <= 2 and clamps == 0
    details["reflected_quadratic"] = {"sup_Y_ratio": sup, "bmo_ratio": bmo, "KT_p2_ratio": km,
                                      "clamp_warnings": clamps, "tol": 2.0}
    # Reported only: with a binding barrier E[K_T^2] grows from ~0 at k=1.
    arun = _run("reflected_quadratic_active")
    ascn, aeng = _setup("reflected_quadratic_active")
    asols = arun.solutions()
    details["reflected_quadratic_active (reported)"] = {
        "sup_Y_ratio": ratio([s.sup_norm() for s in asols]),
        "bmo_ratio": ratio([bmo_estimate(s, aeng)[0] for s in asols]),
        "KT_p2_ratio": ratio([k_moment(s, 2, aeng)[0] for s in asols]),
        "KT_p2_ratio_k_ge_64": ratio([k_moment(s, 2, aeng)[0] for s in asols if s.k >= 64]),
        "KT_p2": [k_moment(s, 2, aeng)[0] for s in asols],
        "clamp_warnings": sum(s.clamp_count for s in asols),
    }
    return 9, "uniform-bound diagnostics", ok, details


@_timed(budget=60.0)
def criterion_10(seeds=10, paths=50_000, degree=3):
    """Monte Carlo backend reproduces the lattice Y0 within 3 combined standard errors."""
    scn = bundled("unreflected_zero")
    lattice_y0 = float(solve_penalized(scn, 0.0, build_engine(scn)).Y0[0])
    ys = []
    for seed in range(seeds):
        eng = MonteCarloEngine.simulate(seed, paths, scn.steps, scn.d, scn.T, degree)
        ys.append(float(solve_penalized(scn, 0.0, eng).Y0[0]))
    ys = np.array(ys)
    se = float(np.std(ys, ddof=1) / np.sqrt(seeds))
    err = abs(float(ys.mean()) - lattice_y0)
    return 10, "engine agreement", err <= 3 * se, {
        "lattice_Y0": lattice_y0, "mc_mean": ys.mean(), "mc_se": se, "abs_err": err, "bound": 3 * se,
        "per_seed": ys}


@_timed()
def criterion_11():
    """Uniqueness probe: perturbed-configuration reruns agree nodewise within 1e-9."""
    details = {}
    ok = True
    for name in REFLECTED + ("coupled_pair",):
        scn, eng = _setup(name)
        rep = uniqueness_probe(scn, eng, tol=1e-9, base=_run(name))
        ok &= rep.passed
        details[name] = {"max_discrepancy": rep.max_discrepancy, "per_perturbation": rep.per_perturbation,
                         "tol": 1e-9}
    return 11, "uniqueness probe", ok, details


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def run_acceptance(outdir, only=None, echo=print):
    """Run the criteria, write ``summary.json`` into ``outdir`` and return the results."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    results = []
    for i, fn in CRITERIA.items():
        if only and i not in only:
            continue
        res = fn()
        results.append(res)
        if echo:
            echo(res.line())
    summary = {
        "passed": all(r.passed for r in results),
        "criteria": [asdict(r) for r in results],
    }
    (outdir / "summary.json").write_text(json.dumps(_plain(summary), indent=2))
    return results
