import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbsde.errors import NonConvergence
from rbsde.lattice import build_lattice
from rbsde.model import ClampedAffineBarrier, ClampedAffineTerminal, LinearQuadratic
from rbsde.solver import (
    build_engine,
    implicit_penalty_step,
    picard_step,
    solve_direct_reflected,
    solve_penalized,
)

from .conftest import make_scenario


def _fixed_point(a, S, k, dt, iters=200):
    # y -> (a + lam S) / (1 + lam) is the exact step; the plain map y -> a + lam (y - S)^-
    # is a contraction only for lam < 1, so iterate it damped.
    y = a
    lam = dt * k
    for _ in range(iters):
        y = 0.5 * y + 0.5 * (a + lam * max(S - y, 0.0))
    return y


def test_implicit_step_examples():
    assert implicit_penalty_step(1.0, 0.0, 100.0, 0.01) == 1.0
    assert implicit_penalty_step(-1.0, 0.0, 100.0, 0.01) == pytest.approx(-0.5, abs=1e-15)
    assert _fixed_point(-1.0, 0.0, 100.0, 0.01) == pytest.approx(-0.5, abs=1e-12)
    assert abs(implicit_penalty_step(-1.0, 0.0, 1e9, 0.01)) < 1e-6


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 1e6), st.floats(1e-4, 1.0))
def test_implicit_step_zero_residual(a, S, k, dt):
    y = float(implicit_penalty_step(a, S, k, dt))
    resid = y - a - dt * k * max(S - y, 0.0)
    assert abs(resid) <= 1e-12 * max(1.0, abs(a), dt * k * abs(S))


def test_picard_identity():
    gen = LinearQuadratic.zero(1, 1)
    y, iters = picard_step(gen, 0.0, [[0.7]], np.zeros((1, 1, 1)), [[-10.0]], 0.0, 0.1)
    assert y[0, 0] == 0.7 and iters == 1


def test_picard_linear_fixed_point():
    gen = LinearQuadratic(a=[0.0], c=[[1.0]], b=[[0.0]], gamma=[0.0])
    y, _ = picard_step(gen, 0.0, [[1.0]], np.zeros((1, 1, 1)), [[-10.0]], 0.0, 0.1)
    assert y[0, 0] == pytest.approx(1.0 / 0.9, abs=1e-12)


def test_picard_divergence():
    gen = LinearQuadratic(a=[0.0], c=[[100.0]], b=[[0.0]], gamma=[0.0])
    with pytest.raises(NonConvergence):
        picard_step(gen, 0.0, [[1.0]], np.zeros((1, 1, 1)), [[-10.0]], 0.0, 0.1)


def test_constant_terminal():
    scn = make_scenario(terminal=ClampedAffineTerminal.constant([3.0]), steps=20)
    sol = solve_penalized(scn, 0.0)
    assert all(np.all(y == 3.0) for y in sol.Y)
    assert all(np.all(z == 0.0) for z in sol.Z)
    assert all(np.all(dk == 0.0) for dk in sol.dK)


def test_zero_driver_matches_expectation():
    scn = make_scenario(steps=200)
    sol = solve_penalized(scn, 0.0)
    lat = build_lattice(1, 1.0, 200)
    direct = lat.expectation(200, np.clip(lat.states(200)[:, 0], -1, 1))
    assert sol.Y0[0] == pytest.approx(direct, abs=1e-10)


def test_inactive_barrier_any_k(inactive):
    base = solve_penalized(inactive, 0.0)
    for k in (1.0, 1e3, 1e8):
        sol = solve_penalized(inactive, k)
        assert all(np.array_equal(a, b) for a, b in zip(sol.Y, base.Y))
        assert all(np.all(dk == 0.0) for dk in sol.dK)
    direct = solve_direct_reflected(inactive)
    assert all(np.array_equal(a, b) for a, b in zip(direct.Y, base.Y))


def test_direct_constant_snell():
    scn = make_scenario(barrier=ClampedAffineBarrier.constant([0.0]), terminal=ClampedAffineTerminal.constant([1.0]),
                        steps=20)
    sol = solve_direct_reflected(scn)
    assert all(np.all(y == 1.0) for y in sol.Y)
    assert all(np.all(dk == 0.0) for dk in sol.dK)


def test_dk_consistency(active_quadratic):
    k = 64.0
    sol = solve_penalized(active_quadratic, k)
    dt = active_quadratic.dt
    for m in range(sol.steps):
        assert np.array_equal(sol.dK[m], dt * k * np.maximum(sol.S[m] - sol.Y[m], 0.0))


def test_penalty_monotone_and_dominated(active_quadratic):
    eng = build_engine(active_quadratic)
    direct = solve_direct_reflected(active_quadratic, eng)
    prev = None
    for k in (1.0, 10.0, 100.0, 1e4):
        sol = solve_penalized(active_quadratic, k, eng)
        for y, yd in zip(sol.Y, direct.Y):
            assert np.max(y - yd) <= 1e-10
        if prev is not None:
            for y0, y1 in zip(prev.Y, sol.Y):
                assert np.max(y0 - y1) <= 1e-10
        prev = sol


def test_solution_arrays_read_only(inactive):
    sol = solve_penalized(inactive, 1.0)
    with pytest.raises(ValueError):
        sol.Y[0][0, 0] = 1.0


def test_mc_engine_solves(active_zero):
    scn = active_zero.with_engine(engine="mc", paths=4000, seed=1)
    sol = solve_direct_reflected(scn)
    assert sol.engine_kind == "mc" and sol.Y[0].shape == (4000, 1)
    assert np.ptp(sol.Y[0]) < 1e-12
