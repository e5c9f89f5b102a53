import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lagdg.limiters import (
    apply_fct,
    beta_scale,
    clip_and_scale,
    limited_node_velocity,
    local_bounds,
    shift_to_averages,
    zalesak_factors,
)
from lagdg.mesh import build_topology, structured_mesh


def one_element():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return build_topology([[0, 1, 2, 3]], 4, coords=x)


def grid(n=3):
    x, elems = structured_mesh([0, 0], [1, 1], (n, n))
    return build_topology(elems, len(x), coords=x)


def test_zalesak_hand_example():
    topo = one_element()
    hb = np.array([[-0.4, -0.4, 0.0, 0.0]])
    f = zalesak_factors(topo, hb, np.array([0.5]), np.array([1.0]), 1.0)
    assert f.p_minus[0] == pytest.approx(-0.8)
    assert f.r_minus[0] == pytest.approx(0.625, rel=1e-14)
    limited = 0.5 + np.sum(f.node * hb[0])
    # the rounding guard leaves the bound reached from above within a few ulps
    assert 0.0 <= limited <= 1e-14


def test_zalesak_positive_fluxes_untouched():
    topo = one_element()
    f = zalesak_factors(topo, np.array([[0.3, 0.0, 0.1, 2.0]]), np.array([0.2]), np.array([1.0]), 1.0)
    np.testing.assert_array_equal(f.corner, 1.0)
    np.testing.assert_array_equal(f.node, 1.0)


def test_zalesak_zero_headroom():
    topo = one_element()
    f = zalesak_factors(topo, np.array([[-0.1, 0.2, -0.3, 0.0]]), np.array([0.0]), np.array([1.0]), 1.0)
    assert f.r_minus[0] == 0.0
    assert f.node[0] == 0.0 and f.node[2] == 0.0


def random_fluxes(topo, rng):
    """Antidiffusive corner fluxes that cancel at every node, (C, Np, m)."""
    hb = rng.normal(size=topo.elem_to_nodes.shape + (3,))
    for node in range(topo.n_nodes):
        e, k = topo.corners_of(node)
        hb[e, k] -= hb[e, k].mean(axis=0)
    return hb


def test_node_fluxes_cancel_in_helper():
    topo = grid()
    hb = random_fluxes(topo, np.random.default_rng(0))
    assert np.abs(topo.scatter(hb)).max() < 1e-14


def test_apply_fct_extremes_and_conservation():
    rng = np.random.default_rng(1)
    topo = grid()
    hb = random_fluxes(topo, rng)
    m = rng.uniform(0.5, 2.0, topo.n_elems)
    low = rng.uniform(0.5, 1.5, (topo.n_elems, 3))
    dt = 0.1
    high = low + dt * hb.sum(axis=1) / m[:, None]
    np.testing.assert_array_equal(apply_fct(topo, low, hb, np.zeros(topo.n_nodes), m, dt), low)
    np.testing.assert_allclose(apply_fct(topo, low, hb, np.ones(topo.n_nodes), m, dt), high, rtol=1e-15)
    alpha = rng.uniform(size=topo.n_nodes)
    out = apply_fct(topo, low, hb, alpha, m, dt)
    np.testing.assert_allclose((m[:, None] * out).sum(axis=0), (m[:, None] * low).sum(axis=0), rtol=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0))
def test_fct_positivity_property(seed, dt):
    rng = np.random.default_rng(seed)
    topo = grid(4)
    hb = 5 * random_fluxes(topo, rng)
    m = rng.uniform(0.1, 2.0, topo.n_elems)
    low = np.zeros((topo.n_elems, 3))
    low[:, 0] = rng.uniform(0.0, 1.0, topo.n_elems) * (rng.uniform(size=topo.n_elems) > 0.2)
    f = zalesak_factors(topo, hb[..., 0], low[:, 0], m, dt)
    assert np.all((f.node >= 0) & (f.node <= 1))
    out = apply_fct(topo, low, hb, f.node, m, dt)
    assert out[:, 0].min() >= 0.0


def test_limited_node_velocity():
    uL = np.array([[0.0, 0.0], [1.0, 1.0]])
    uH = np.array([[4.0, 8.0], [3.0, -1.0]])
    np.testing.assert_allclose(limited_node_velocity(uL, uH, [0.25, 1.0]), [[1.0, 2.0], [3.0, -1.0]])
    np.testing.assert_array_equal(limited_node_velocity(uL, uH, [0.0, 0.0]), uL)


def element_values(nu, other=None):
    U = np.zeros((1, len(nu), 4))
    U[0, :, 0] = nu
    if other is not None:
        U[0, :, 1:] = other
    return U


def test_clip_identity_when_in_bounds():
    U = element_values([1.0, 1.2, 0.9, 1.1], np.random.default_rng(0).normal(size=(4, 3)))
    mj = np.full((1, 4), 0.25)
    res = clip_and_scale(U, mj, np.ones(1), np.full((1, 4), 0.5), np.full((1, 4), 2.0))
    np.testing.assert_allclose(res.U, U, rtol=1e-15, atol=1e-15)
    assert res.clipped == 0


def test_clip_two_node_hand_trace():
    d = 0.2
    U = element_values([1.0 + d, 1.0 - d, 1.0, 1.0])
    mj = np.ones((1, 4))
    res = clip_and_scale(U, mj, np.full(1, 4.0), np.full((1, 4), 0.0), np.full((1, 4), 1.0 + d / 2))
    np.testing.assert_allclose(res.U[0, :, 0] - 1.0, [d / 2, -d / 2, 0.0, 0.0], atol=1e-15)
    assert res.clipped == 1


def test_clip_constant_element_unchanged():
    U = element_values([0.7] * 4, np.ones((4, 3)))
    res = clip_and_scale(U, np.full((1, 4), 0.25), np.ones(1), np.full((1, 4), 0.7), np.full((1, 4), 0.7))
    np.testing.assert_array_equal(res.U, U)


@settings(max_examples=80, deadline=None)
@given(arrays(float, (5, 4, 4), elements=st.floats(-3, 3)), arrays(float, (5, 4), elements=st.floats(0.1, 2)))
def test_clip_properties(U, mj):
    U[..., 0] = np.abs(U[..., 0]) + 0.1
    m = mj.sum(axis=1)
    avg = np.einsum("cj,cjk->ck", mj, U) / m[:, None]
    lo = np.minimum(avg[:, 0:1] - 0.1, U[..., 0] + 0.3)
    hi = np.maximum(avg[:, 0:1] + 0.1, U[..., 0] - 0.3)
    res = clip_and_scale(U, mj, m, lo, hi)
    new_avg = np.einsum("cj,cjk->ck", mj, res.U) / m[:, None]
    scale = 1 + np.abs(U).max()
    np.testing.assert_allclose(new_avg, avg, atol=1e-12 * scale)
    assert np.all(res.U[..., 0] >= lo - 1e-12 * scale)
    assert np.all(res.U[..., 0] <= hi + 1e-12 * scale)
    assert np.all((res.ratio >= 0) & (res.ratio <= 1))


def test_local_bounds_cover_neighbours():
    topo = grid(2)
    nu = np.arange(16, dtype=float).reshape(4, 4)
    lo, hi = local_bounds(topo, nu)
    centre = [n for n in range(topo.n_nodes) if len(topo.corners_of(n)[0]) == 4][0]
    e, k = topo.corners_of(centre)
    assert np.all(lo[e, k] == 0.0) and np.all(hi[e, k] == 15.0)
    lo2, hi2 = local_bounds(topo, nu, avg_nu=np.array([-1.0, 0.0, 0.0, 20.0]))
    assert lo2.min() == -1.0 and hi2.max() == 20.0


def test_beta_scale_examples():
    U = np.full((1, 4, 4), 2.0)
    U[0, 0, 0] = 3.0
    U[0, 1, 0] = 1.0
    mj = np.full((1, 4), 0.25)
    out = beta_scale(U, mj, np.ones(1), 0.8)
    assert out[0, 0, 0] == pytest.approx(2.8)
    np.testing.assert_allclose(np.einsum("cj,cjk->ck", mj, out), [[2.0] * 4])
    np.testing.assert_array_equal(beta_scale(U, mj, np.ones(1), 1.0), U)
    const = np.full((1, 4, 4), 1.5)
    np.testing.assert_allclose(beta_scale(const, mj, np.ones(1), 0.3), const)


def test_beta_scale_literal_warns_and_validates():
    U = np.ones((1, 4, 4))
    mj = np.full((1, 4), 0.25)
    with pytest.warns(RuntimeWarning):
        out = beta_scale(U, mj, np.ones(1), 0.5, mode="literal")
    np.testing.assert_allclose(out, 0.5)
    np.testing.assert_array_equal(beta_scale(U, mj, np.ones(1), 1.0, mode="literal"), U)
    with pytest.raises(ValueError):
        beta_scale(U, mj, np.ones(1), 1.2)
    with pytest.raises(ValueError):
        beta_scale(U, mj, np.ones(1), 0.5, mode="bogus")


def test_shift_to_averages():
    rng = np.random.default_rng(2)
    U = rng.normal(size=(3, 4, 4))
    mj = rng.uniform(0.1, 1.0, (3, 4))
    m = mj.sum(axis=1)
    target = rng.normal(size=(3, 4))
    out = shift_to_averages(U, mj, m, target)
    np.testing.assert_allclose(np.einsum("cj,cjk->ck", mj, out) / m[:, None], target, atol=1e-14)
