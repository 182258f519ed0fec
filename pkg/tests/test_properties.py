import numpy as np
from hypothesis import assume, given, strategies as st

from cacp import Label, build_band, build_grid, classify_nodes
from cacp.interp import interpolation_weights
from cacp.kernels import lagrange_weights
from cacp.surface import Circle, Clover, Sphere

coord = st.floats(-1.8, 1.8, allow_nan=False)


@given(st.tuples(coord, coord), st.floats(0.3, 1.5))
def test_circle_closest_point_invariants(p, R):
    x = np.array([p])
    assume(np.linalg.norm(x) > 1e-6)
    c = Circle(R)
    cp = c.closest_point(x)
    phi = c.signed_distance(x)
    assert abs(np.linalg.norm(cp) - R) < 1e-12
    assert abs(np.linalg.norm(x - cp) - abs(phi[0])) < 1e-12
    assert np.allclose(c.closest_point(cp), cp, atol=1e-14)
    assert (phi[0] < 0) == (np.linalg.norm(x) < R)


@given(st.tuples(coord, coord, coord))
def test_sphere_closest_point_invariants(p):
    x = np.array([p])
    assume(np.linalg.norm(x) > 1e-6)
    s = Sphere()
    cp = s.closest_point(x)
    assert abs(np.linalg.norm(cp) - 1) < 1e-12
    # no surface sample is closer
    rng = np.random.default_rng(0)
    v = rng.normal(size=(500, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    assert np.linalg.norm(x - cp) <= np.linalg.norm(x - v, axis=1).min() + 1e-12


@given(st.floats(0, 2 * np.pi), st.floats(-0.08, 0.15))
def test_clover_closest_point_invariants(t, off):
    clover = Clover()
    base = clover.point(np.array([t]))
    n = np.stack([np.cos(t), np.sin(t)])[None]
    x = base + off * n
    tc = clover.closest_param(x)
    cp = clover.closest_point(x)
    np.testing.assert_allclose(cp, clover.point(tc), atol=1e-13)
    np.testing.assert_allclose(clover.closest_point(cp), cp, atol=1e-9)
    assert np.linalg.norm(x - cp) <= np.linalg.norm(x - base) + 1e-12


@given(st.lists(st.floats(-0.5, 3.5), min_size=1, max_size=20), st.sampled_from([1, 2, 3, 4]))
def test_lagrange_partition_and_exactness(t, q):
    t = np.array(t)
    w = lagrange_weights(t, q)
    nodes = np.arange(q + 1)
    for k in range(q + 1):
        np.testing.assert_allclose(w @ nodes**k, t**k, rtol=1e-10, atol=1e-9)


@given(st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)), st.sampled_from([1, 3]))
def test_stencil_row_sum_and_monomials(p, q):
    g = build_grid(2, -2, 2, 40)
    p = np.array(p)
    s = interpolation_weights(g, p, q)
    w = s.weights.ravel()
    xs = g.coords(s.nodes)
    assert abs(w.sum() - 1) < 1e-12
    for a in range(q + 1):
        for b in range(q + 1):
            val = np.sum(w * xs[:, 0] ** a * xs[:, 1] ** b)
            assert abs(val - p[0] ** a * p[1] ** b) < 1e-11


def _box_meets_circle(lo, hi, R):
    # nearest and farthest points of the closed box from the origin
    near = np.linalg.norm(np.clip(0.0, lo, hi), axis=-1)
    far = np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi)), axis=-1)
    return (near <= R) & (R <= far)


@given(st.floats(0.4, 1.4), st.sampled_from([40, 48, 64, 80]))
def test_circle_classification_invariants(R, M):
    g = build_grid(2, -2, 2, M)
    nc = classify_nodes(g, Circle(R))
    idx = np.indices(g.shape).reshape(2, -1).T
    # grid units keep lattice ties such as R = 1 exact
    u = idx - M // 2
    oracle = _box_meets_circle(u - 2.0, u + 2.0, R * M / 4).reshape(g.shape)
    interp = nc.labels == Label.INTERPOLATION
    np.testing.assert_array_equal(interp, oracle)
    edge = nc.labels == Label.EDGE
    ring = np.zeros_like(interp)
    ring[1:] |= interp[:-1]
    ring[:-1] |= interp[1:]
    ring[:, 1:] |= interp[:, :-1]
    ring[:, :-1] |= interp[:, 1:]
    np.testing.assert_array_equal(edge, ring & ~interp)
    band = build_band(g, Circle(R))
    assert band.size == interp.sum() + edge.sum()
    assert (np.diff(g.flat_index(band.nodes)) > 0).all()
