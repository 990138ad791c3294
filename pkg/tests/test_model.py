import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbsde.errors import AssumptionError, ConfigError
from rbsde.model import (
    ClampedAffineBarrier,
    ClampedAffineTerminal,
    LinearQuadratic,
    PenaltySchedule,
    Scenario,
    default_samples,
    validate_bounds,
    validate_growth,
    validate_off_diagonal_monotonicity,
)
from rbsde.reflection import run_penalty_schedule
from rbsde.scenarios import bundled, bundled_names, load_scenario, parse_scenario
from rbsde.solver import solve_direct_reflected, solve_penalized

from .conftest import make_scenario

# -- growth ------------------------------------------------------------------


def test_growth_pure_quadratic_ratio():
    gen = LinearQuadratic.quadratic([1.0])
    rep = validate_growth(gen, [(0.0, np.zeros(1), np.array([[2.0]]))], declared=0.5)
    assert rep.passed
    assert rep.constant == pytest.approx(2.0 / 5.0, abs=1e-15)


def test_growth_zero_generator():
    gen = LinearQuadratic.zero(1, 1)
    rng = np.random.default_rng(1)
    samples = [(0.1, rng.normal(size=1), rng.normal(size=(1, 1))) for _ in range(20)]
    rep = validate_growth(gen, samples)
    assert rep.passed and rep.constant == 0.0


def test_growth_declared_too_small_has_witness():
    gen = LinearQuadratic(a=[5.0], c=[[0.0]], b=[[0.0]], gamma=[0.0])
    rep = validate_growth(gen, [(0.0, np.zeros(1), np.zeros((1, 1)))], declared=1.0)
    assert not rep.passed
    assert rep.witness["f"] == 5.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=2, max_size=20))
def test_growth_estimate_monotone_in_samples(points):
    gen = LinearQuadratic(a=[0.3], c=[[0.7]], b=[[0.2]], gamma=[1.5])
    samples = [(0.0, np.array([y]), np.array([[z]])) for y, z in points]
    estimates = [validate_growth(gen, samples[: i + 1]).constant for i in range(len(samples))]
    assert all(b >= a for a, b in zip(estimates[:-1], estimates[1:]))


# -- off-diagonal monotonicity -----------------------------------------------


def test_off_diagonal_example_passes():
    gen = LinearQuadratic(a=[0, 0], c=[[0, 1], [0, 0]], b=[[0], [0]], gamma=[0, 0])
    rep = validate_off_diagonal_monotonicity(gen, [(0.0, 0, np.zeros(2), np.array([0.0, 1.0]), np.zeros((2, 1)))])
    assert rep.passed
    assert rep.worst == pytest.approx(1.0)


def test_off_diagonal_scalar_vacuous():
    assert validate_off_diagonal_monotonicity(LinearQuadratic.quadratic([1.0]), []).passed


def test_off_diagonal_negative_coupling_fails_with_witness():
    gen = LinearQuadratic(a=[0, 0], c=[[0, -1], [0, 0]], b=[[0], [0]], gamma=[0, 0])
    rep = validate_off_diagonal_monotonicity(gen, [])
    assert not rep.passed
    assert rep.witness["component"] == 0
    assert rep.witness["fbar"] < rep.witness["f"]


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(2, 4),
    data=st.data(),
)
def test_off_diagonal_nonnegative_coupling_always_passes(n, data):
    entries = data.draw(st.lists(st.floats(0, 3), min_size=n * n, max_size=n * n))
    c = np.array(entries).reshape(n, n)
    np.fill_diagonal(c, data.draw(st.floats(-3, 3)))
    gamma = data.draw(st.lists(st.floats(0, 2), min_size=n, max_size=n))
    gen = LinearQuadratic(a=np.zeros(n), c=c, b=np.ones((n, 1)), gamma=gamma)
    scn = make_scenario(n=n, generator=gen, steps=10)
    assert validate_off_diagonal_monotonicity(gen, default_samples(scn)["pairs"]).passed


# -- bounds ------------------------------------------------------------------


def _states(T=1.0):
    return [(t, np.array([w])) for t in (0.0, 0.5, T) for w in np.linspace(-3, 3, 13)]


def test_bounds_inactive_constant():
    rep = validate_bounds(ClampedAffineBarrier.constant([-10.0]), ClampedAffineTerminal.constant([0.0]), _states(), 1.0)
    assert rep.passed


def test_bounds_cap_forces_bound():
    barrier = ClampedAffineBarrier(alpha=[0.0], beta=[[1.0]], cap=[1.0], s_plus_max=1.0)
    terminal = ClampedAffineTerminal(alpha=[0.0], beta=[[1.0]], lower=[-1.0], upper=[1.0])
    assert validate_bounds(barrier, terminal, _states(), 1.0).passed


def test_bounds_terminal_below_barrier_fails():
    rep = validate_bounds(ClampedAffineBarrier.constant([1.0]), ClampedAffineTerminal.constant([0.0]), _states(), 1.0)
    assert not rep.passed
    assert rep.witness["check"] == "terminal_dominates_barrier"


def test_failing_scenario_rejected_by_every_entry_point():
    scn = make_scenario(barrier=ClampedAffineBarrier.constant([1.0]),
                        terminal=ClampedAffineTerminal.constant([0.0]), steps=5)
    for call in (lambda: solve_penalized(scn, 1.0), lambda: solve_direct_reflected(scn),
                 lambda: run_penalty_schedule(scn)):
        with pytest.raises(AssumptionError):
            call()


# -- schedule / serialization ------------------------------------------------


def test_schedule_levels():
    assert PenaltySchedule().levels() == [2.0**j for j in range(13)]
    with pytest.raises(ConfigError):
        PenaltySchedule(k0=1.0, growth=1.0)


@pytest.mark.parametrize("name", bundled_names())
def test_bundled_roundtrip(name):
    scn = bundled(name)
    back = Scenario.from_dict(json.loads(scn.to_json()))
    assert back.fingerprint() == scn.fingerprint()
    assert back.to_dict() == scn.to_dict()


def test_fingerprint_tracks_content():
    a = make_scenario()
    assert a.fingerprint() == make_scenario().fingerprint()
    assert a.fingerprint() != a.replace(steps=41).fingerprint()


def test_parse_error_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        parse_scenario('{\n "n": 1,\n "d": ,\n}')


def test_unknown_field_rejected():
    data = make_scenario().to_dict()
    data["colour"] = "blue"
    with pytest.raises(ConfigError, match="colour"):
        Scenario.from_dict(data)


def test_load_negative_coupling_file(tmp_path):
    data = bundled("coupled_pair").to_dict()
    data["generator"]["c"] = [[0.0, -0.5], [0.5, 0.0]]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(AssumptionError) as info:
        load_scenario(path)
    assert info.value.report.name == "off_diagonal_monotonicity"
    assert info.value.report.witness is not None


def test_load_terminal_below_barrier_file(tmp_path):
    data = bundled("unreflected_zero").to_dict()
    data["barrier"] = {"alpha": [1.0], "beta": [[0.0]], "cap": [1.0]}
    data["terminal"] = {"alpha": [0.0], "beta": [[0.0]], "xi_max": 0.0}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    with pytest.raises(AssumptionError, match="terminal_dominates_barrier"):
        load_scenario(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "nope.json")
