import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rbsde.errors import ResourceError
from rbsde.lattice import build_lattice


def test_layer_sizes():
    lat = build_lattice(1, 1.0, 2)
    assert [lat.size(m) for m in range(3)] == [1, 2, 3]
    assert build_lattice(2, 1.0, 1).size(1) == 4
    assert lat.states(2).shape == (3, 1)


def test_node_budget():
    with pytest.raises(ResourceError):
        build_lattice(1, 1.0, 10**6, node_budget=10**6)


def test_cond_exp_examples():
    lat = build_lattice(1, 1.0, 4)
    assert lat.cond_exp(0, np.array([2.0, 4.0])) == pytest.approx([3.0])
    assert np.all(lat.cond_exp(2, np.full(4, 7.0)) == 7.0)
    m = 3
    np.testing.assert_allclose(lat.cond_exp(m, lat.states(m + 1)), lat.states(m), atol=1e-15)


def test_cond_z_examples():
    lat = build_lattice(1, 1.0, 8)
    m = 5
    np.testing.assert_allclose(lat.cond_z(m, lat.states(m + 1)[:, 0]), 1.0, rtol=1e-13)
    assert np.all(lat.cond_z(m, np.full(m + 2, 3.3)) == 0.0)
    lat2 = build_lattice(2, 1.0, 6)
    z = lat2.cond_z(3, lat2.states(4)[:, 0])
    np.testing.assert_allclose(z, np.tile([1.0, 0.0], (lat2.size(3), 1)), atol=1e-13)


def test_cond_z_brute_force_2d():
    # E_m[V dW^r]/dt by explicit enumeration of the four children.
    lat = build_lattice(2, 0.5, 5)
    m = 2
    rng = np.random.default_rng(3)
    v = rng.normal(size=lat.size(m + 1))
    ch = lat.children(m)
    dw = lat.states(m + 1)[ch] - lat.states(m)[:, None, :]
    brute = np.einsum("ns,nsr->nr", v[ch], dw) / 4.0 / lat.dt
    np.testing.assert_allclose(lat.cond_z(m, v), brute, atol=1e-12)


def test_parents_invert_children():
    lat = build_lattice(2, 1.0, 4)
    ch, par = lat.children(2), lat.parents(3)
    for node in range(lat.size(2)):
        for s in range(4):
            assert par[ch[node, s], s] == node


@pytest.mark.parametrize("d,M", [(1, 30), (2, 8)])
def test_tower_property(d, M):
    lat = build_lattice(d, 1.0, M)
    rng = np.random.default_rng(d)
    v = rng.normal(size=lat.size(M))
    direct = lat.expectation(M, v)
    for m in range(M - 1, -1, -1):
        v = lat.cond_exp(m, v)
    assert v[0] == pytest.approx(direct, abs=1e-12)
    assert lat.weights(M).sum() == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 7, elements=st.floats(-1e3, 1e3)), arrays(np.float64, 7, elements=st.floats(0, 1e3)))
def test_cond_exp_monotone(f, bump):
    lat = build_lattice(1, 1.0, 10)
    assert np.all(lat.cond_exp(5, f) <= lat.cond_exp(5, f + bump))


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e6, 1e6), st.integers(1, 2), st.integers(0, 4))
def test_cond_z_constant_exact_zero(c, d, m):
    lat = build_lattice(d, 2.0, 6)
    assert np.all(lat.cond_z(m, np.full(lat.size(m + 1), c)) == 0.0)
