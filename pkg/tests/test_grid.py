import csv

import numpy as np
import pytest
from scipy.spatial import cKDTree

from cacp import Label, build_band, build_grid, classify_nodes, enumerate_band, make_surface
from cacp.errors import ConfigurationError, GeometryError
from cacp.grid import NodeClass, neighbor_offsets, nodes_within, stencil_base
from cacp.surface import Circle
from oracles import circle_samples_units


def test_build_grid_2d_reference_domain():
    g = build_grid(2, -2, 2, 40)
    assert g.dx == pytest.approx(0.1, abs=1e-15)
    assert g.shape == (41, 41)
    assert g.n_nodes == 41**2


def test_build_grid_midpoint_node():
    g = build_grid(2, 0, 1, 4)
    np.testing.assert_array_equal(g.coords((2, 2)), [0.5, 0.5])


def test_build_grid_3d():
    g = build_grid(3, -2, 2, 40)
    assert g.n_nodes == 41**3
    assert g.dx == pytest.approx(0.1, abs=1e-15)


def test_node_coordinates_have_no_accumulated_error():
    g = build_grid(2, -2, 2, 640)
    i = np.arange(641)
    np.testing.assert_array_equal(g.axis(0), -2.0 + i * g.dx)


@pytest.mark.parametrize("args", [
    (2, (-2, -2), (2, 3), 40),   # unequal extents
    (2, -2, 2, 3),               # too few cells
    (4, -2, 2, 40),              # unsupported dimension
    (2, 2, -2, 40),              # reversed bounds
])
def test_build_grid_rejects_bad_configs(args):
    with pytest.raises(ConfigurationError):
        build_grid(*args)


def test_stencil_base_rule():
    # floor(u) - floor((q-1)/2)
    np.testing.assert_array_equal(stencil_base(np.array([[3.2, 7.0]]), 3), [[2, 6]])
    np.testing.assert_array_equal(stencil_base(np.array([[3.2, 7.0]]), 1), [[3, 7]])


def test_neighbor_offsets():
    assert len(neighbor_offsets(2, "axis")) == 4
    assert len(neighbor_offsets(2, "full")) == 8
    assert len(neighbor_offsets(3, "full")) == 26


@pytest.fixture(scope="module")
def circle40():
    g = build_grid(2, -2, 2, 40)
    return g, classify_nodes(g, Circle())


def test_nodes_near_circle_are_interpolation(circle40):
    # the closed stencil box has half-width 2 dx, so any node within 2 dx of
    # the circle lies in the stencil of some surface point
    g, nc = circle40
    near = nodes_within(g, Circle(), 2 * g.dx)
    assert near.sum() > 0
    assert (nc.labels[near] == Label.INTERPOLATION).all()


def test_centre_is_outside(circle40):
    g, nc = circle40
    assert nc.labels[20, 20] == Label.OUTSIDE


def test_band_matches_sampled_stencil_reach(circle40):
    # independent route: Chebyshev distance from each node to a dense sample
    # of the circle, in grid units, must be at most 2
    g, nc = circle40
    tree = cKDTree(circle_samples_units(1.0, -2.0, g.dx, 40, 400_000))
    idx = np.indices(g.shape).reshape(2, -1).T
    d, _ = tree.query(idx, p=np.inf, distance_upper_bound=3.0)
    oracle = (d <= 2.0 + 1e-7).reshape(g.shape)
    np.testing.assert_array_equal(nc.labels == Label.INTERPOLATION, oracle)


def test_clover_band_matches_sampled_stencil_reach():
    clover = make_surface("clover")
    g = build_grid(2, -2, 2, 80)
    nc = classify_nodes(g, clover)
    th = np.arange(400_000) * 2 * np.pi / 400_000
    pts = clover.point(th)
    tree = cKDTree((pts + 2.0) / g.dx)
    idx = np.indices(g.shape).reshape(2, -1).T
    d, _ = tree.query(idx, p=np.inf, distance_upper_bound=3.0)
    oracle = (d <= 2.0 + 1e-6).reshape(g.shape)
    np.testing.assert_array_equal(nc.labels == Label.INTERPOLATION, oracle)


def test_band_size_frozen_and_linear():
    # counts from the independent sampled-reach oracle above
    sizes = {}
    for M in (40, 80, 160):
        sizes[M] = build_band(build_grid(2, -2, 2, M), Circle()).size
    assert sizes == {40: 448, 80: 880, 160: 1744}
    slope = np.polyfit(list(sizes), list(sizes.values()), 1)[0]
    assert slope == pytest.approx(10.8, rel=0.01)


def test_edge_nodes_are_exact_one_ring(circle40):
    g, nc = circle40
    interp = nc.labels == Label.INTERPOLATION
    ring = np.zeros_like(interp)
    ring[1:] |= interp[:-1]
    ring[:-1] |= interp[1:]
    ring[:, 1:] |= interp[:, :-1]
    ring[:, :-1] |= interp[:, 1:]
    np.testing.assert_array_equal(nc.labels == Label.EDGE, ring & ~interp)


def test_full_neighbourhood_is_superset():
    g = build_grid(2, -2, 2, 40)
    axis = classify_nodes(g, Circle(), neighborhood="axis")
    full = classify_nodes(g, Circle(), neighborhood="full")
    np.testing.assert_array_equal(axis.labels == Label.INTERPOLATION,
                                  full.labels == Label.INTERPOLATION)
    assert ((axis.labels == Label.EDGE) <= (full.labels == Label.EDGE)).all()
    assert (full.labels == Label.EDGE).sum() > (axis.labels == Label.EDGE).sum()


def test_classification_is_deterministic():
    g = build_grid(2, -2, 2, 80)
    a = build_band(g, make_surface("clover"))
    b = build_band(g, make_surface("clover"))
    np.testing.assert_array_equal(a.nodes, b.nodes)


def test_tube_leaving_grid_raises():
    g = build_grid(2, -2, 2, 40)
    with pytest.raises(GeometryError):
        classify_nodes(g, Circle(1.9))


def test_empty_band():
    g = build_grid(2, -2, 2, 8)
    band = enumerate_band(NodeClass(g, np.zeros(g.shape, dtype=np.int8), 3, "axis"))
    assert band.size == 0


def test_lexicographic_order():
    g = build_grid(2, 0, 1, 4)
    labels = np.zeros(g.shape, dtype=np.int8)
    labels[1, 0] = Label.INTERPOLATION
    labels[0, 1] = Label.EDGE
    band = enumerate_band(NodeClass(g, labels, 3, "axis"))
    np.testing.assert_array_equal(band.nodes, [[0, 1], [1, 0]])
    assert band.row_of[g.flat_index((0, 1))] == 0


def test_band_is_bijection(circle40):
    g, nc = circle40
    band = enumerate_band(nc)
    assert band.size == len(np.unique(band.flat))
    np.testing.assert_array_equal(band.row_of[band.flat], np.arange(band.size))
    assert (band.row_of >= 0).sum() == band.size


def test_band_csv(tmp_path, circle40):
    g, nc = circle40
    band = enumerate_band(nc)
    path = tmp_path / "band.csv"
    band.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["i", "j", "label", "row"]
    assert len(rows) == band.size + 1
    assert rows[1][3] == "0"
