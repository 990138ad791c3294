import numpy as np
import pytest

from rbsde.errors import InvalidInput, RegressionError
from rbsde.mc import (
    MonteCarloEngine,
    PathBundle,
    RegressionBasis,
    _projector,
    cond_exp_regress,
    cond_z_regress,
    simulate_paths,
)


@pytest.fixture(scope="module")
def bundle():
    return simulate_paths(7, 20_000, 10, 1, 1.0)


def test_basis_layout():
    basis = RegressionBasis(2, 2)
    assert basis.names() == ["1", "w1", "w0", "w1^2", "w0*w1", "w0^2"]
    w = np.array([[2.0, 3.0]])
    np.testing.assert_allclose(basis.design(w), [[1, 3, 2, 9, 6, 4]])


def test_determinism_and_invariants(bundle):
    again = simulate_paths(7, 20_000, 10, 1, 1.0)
    assert np.array_equal(bundle.dW, again.dW)
    assert np.all(bundle.W[:, 0] == 0.0)
    np.testing.assert_allclose(np.diff(bundle.W, axis=1), bundle.dW, atol=1e-14)


def test_terminal_mean_clt():
    b = simulate_paths(11, 10_000, 20, 1, 1.0)
    assert abs(b.W[:, -1, 0].mean()) <= 5 * np.sqrt(1.0 / 10_000)
    se = np.sqrt(b.dt / b.N)
    assert np.all(np.abs(b.dW.mean(axis=0)) <= 5 * se)


def test_too_few_paths():
    with pytest.raises(InvalidInput):
        simulate_paths(0, 3, 5, 1, 1.0, RegressionBasis(1, 2))


def test_regression_examples(bundle):
    m = 6
    np.testing.assert_allclose(cond_exp_regress(bundle, m, np.full(bundle.N, 9.0)), 9.0, atol=1e-12)
    w = bundle.W[:, m, 0]
    np.testing.assert_allclose(cond_exp_regress(bundle, m, w), w, atol=1e-10)
    fitted = cond_exp_regress(bundle, m, w + bundle.dW[:, m, 0])
    # projecting mean-zero noise (sd sqrt(dt)) onto a p-dim span leaves rms sd * sqrt(p / N)
    rms = np.sqrt(np.mean((fitted - w) ** 2))
    assert rms <= 5 * np.sqrt(bundle.dt) * np.sqrt(RegressionBasis(1).size / bundle.N)


def test_regression_z_examples(bundle):
    m = 4
    z = cond_z_regress(bundle, m, np.full(bundle.N, 2.0))
    se = 2.0 / np.sqrt(bundle.dt) / np.sqrt(bundle.N)
    assert abs(z.mean()) <= 5 * se
    z = cond_z_regress(bundle, m, bundle.W[:, m + 1, 0])
    assert z.shape == (bundle.N, 1)
    assert abs(z.mean() - 1.0) <= 5 * np.sqrt(2.0 / bundle.N)


def test_regression_z_cross_coordinates():
    b = simulate_paths(5, 20_000, 4, 2, 1.0)
    z = cond_z_regress(b, 2, b.W[:, 3, 0])
    assert abs(z[:, 0].mean() - 1.0) <= 5 * np.sqrt(2.0 / b.N)
    assert abs(z[:, 1].mean()) <= 5 * np.sqrt(1.0 / b.N)


def test_projection_invariance(bundle):
    m = 5
    rng = np.random.default_rng(0)
    Q = _projector(bundle, m, RegressionBasis(1))
    v = rng.normal(size=bundle.N)
    r = rng.normal(size=bundle.N)
    perp = r - Q @ (Q.T @ r)
    np.testing.assert_allclose(cond_exp_regress(bundle, m, v + perp), cond_exp_regress(bundle, m, v), atol=1e-10)


def test_rank_deficient_design_fails_loudly():
    dW = np.where(np.arange(40)[:, None, None] % 2 == 0, 0.5, -0.5) * np.ones((40, 2, 1))
    b = PathBundle._from_increments(0, 40, 2, 1, 0.5, dW)
    with pytest.raises(RegressionError) as info:
        cond_exp_regress(b, 1, np.ones(40))
    assert info.value.feature is not None


def test_dump_load_roundtrip(tmp_path):
    b = simulate_paths(3, 50, 4, 2, 1.5)
    path = tmp_path / "paths.bin"
    b.dump(path)
    back = PathBundle.load(path)
    assert (back.seed, back.N, back.M, back.d, back.T) == (3, 50, 4, 2, 1.5)
    assert np.array_equal(back.dW, b.dW) and np.array_equal(back.W, b.W)


def test_engine_contract(bundle):
    eng = MonteCarloEngine(bundle)
    assert eng.kind == "mc" and eng.steps == 10 and eng.size(3) == bundle.N
    v = bundle.W[:, 7, 0] ** 2
    np.testing.assert_allclose(eng.cond_exp(6, v), cond_exp_regress(bundle, 6, v))
    assert eng.expectation(7, v) == pytest.approx(v.mean())
