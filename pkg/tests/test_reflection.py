import numpy as np
import pytest

from rbsde.errors import InvalidInput
from rbsde.model import PenaltySchedule
from rbsde.reflection import (
    barrier_shortfall,
    run_penalty_schedule,
    skorokhod_residual,
    sup_delta,
    uniqueness_probe,
)
from rbsde.solver import build_engine, solve_direct_reflected, solve_penalized


def test_shortfall_and_skorokhod_trivial(inactive, active_quadratic):
    eng = build_engine(inactive)
    sol = solve_penalized(inactive, 4.0, eng)
    assert np.all(barrier_shortfall(sol) == 0.0)
    assert np.all(skorokhod_residual(sol, eng) == 0.0)
    eng = build_engine(active_quadratic)
    direct = solve_direct_reflected(active_quadratic, eng)
    assert np.all(barrier_shortfall(direct) == 0.0)
    assert np.all(skorokhod_residual(direct, eng) == 0.0)
    assert np.any(sum(np.sum(dk) for dk in direct.dK) > 0)


def test_inactive_schedule_converges_at_first_delta(inactive):
    run = run_penalty_schedule(inactive)
    deltas = [e.metrics["delta"] for e in run.entries]
    assert deltas[0] is None and all(d == 0.0 for d in deltas[1:])
    assert run.converged_at == 1 and run.status == "converged"
    assert run.limit.k == "limit" and run.limit.source_k == run.ks[-1]


def test_single_level_is_unconverged(active_quadratic):
    scn = active_quadratic.replace(penalty_schedule=PenaltySchedule(1.0, 2.0, 1))
    run = run_penalty_schedule(scn)
    assert run.status == "unconverged"


def test_active_schedule_shortfall_decays(active_quadratic):
    scn = active_quadratic.replace(penalty_schedule=PenaltySchedule(1.0, 2.0, 10))
    run = run_penalty_schedule(scn)
    sf = [e.metrics["shortfall"][0] for e in run.entries]
    assert all(b <= a for a, b in zip(sf[:-1], sf[1:]))
    assert sf[-1] < 0.5 * sf[0]
    # sandwich: every iterate below the limit below the direct solution
    direct = solve_direct_reflected(scn, run.engine)
    for e in run.entries:
        for y, yl, yd in zip(e.solution.Y, run.limit.Y, direct.Y):
            assert np.max(y - yl) <= 1e-8 and np.max(yl - yd) <= 1e-8


def test_stop_early(active_quadratic):
    run = run_penalty_schedule(active_quadratic, tol_limit=1.0, stop_early=True)
    assert run.converged_at == 1 and len(run.entries) == 2


def test_bad_tolerance(inactive):
    with pytest.raises(InvalidInput):
        run_penalty_schedule(inactive, tol_limit=-1.0)


def test_uniqueness_identical_configs(active_quadratic):
    rep = uniqueness_probe(active_quadratic, perturbations=({},))
    assert rep.max_discrepancy == 0.0 and rep.passed


def test_uniqueness_grain_and_start(coupled):
    eng = build_engine(coupled)
    base = run_penalty_schedule(coupled, eng)
    grain = uniqueness_probe(coupled, eng, perturbations=({"grain": 3},), base=base)
    assert grain.max_discrepancy <= 1e-12
    start = uniqueness_probe(coupled, eng, perturbations=({"picard_start": "upper"}, {"picard_start": "lower"}),
                             base=base)
    assert start.max_discrepancy <= 1e-9


def test_sup_delta_symmetric(active_quadratic):
    a = solve_penalized(active_quadratic, 1.0)
    b = solve_penalized(active_quadratic, 8.0)
    assert sup_delta(a, b) == sup_delta(b, a) > 0
