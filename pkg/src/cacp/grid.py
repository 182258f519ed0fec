"""Uniform Cartesian grids and the interpolation/edge band.

A node is an *interpolation* node when it belongs to the degree-``q``
tensor stencil of some point on the surface, and an *edge* node when it is
not an interpolation node but neighbours one. Interpolation and edge nodes
together form the band on which the linear systems live.
"""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from cacp.errors import ConfigurationError, GeometryError

log = logging.getLogger(__name__)


class Label(enum.IntEnum):
    OUTSIDE = 0
    INTERPOLATION = 1
    EDGE = 2


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``M`` cells (``M + 1`` nodes) along every axis."""

    dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    M: int
    dx: float = field(init=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.lower) != self.dim or len(self.upper) != self.dim:
            raise ConfigurationError("lower/upper must have one entry per axis")
        if self.M < 4:
            raise ConfigurationError(f"need at least 4 cells per axis, got M={self.M}")
        ext = np.subtract(self.upper, self.lower)
        if np.any(ext <= 0):
            raise ConfigurationError("upper must exceed lower on every axis")
        if not np.allclose(ext, ext[0], rtol=1e-12, atol=0.0):
            raise ConfigurationError(f"unequal axis extents {tuple(ext)}")
        object.__setattr__(self, "dx", float(ext[0]) / self.M)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M + 1,) * self.dim

    @property
    def n_nodes(self) -> int:
        return (self.M + 1) ** self.dim

    @property
    def mirror_axis0(self) -> bool:
        return False

    def axis(self, d: int) -> np.ndarray:
        return self.lower[d] + np.arange(self.M + 1) * self.dx

    def coords(self, index) -> np.ndarray:
        """Coordinates of integer multi-indices, shape ``(..., dim)``."""
        index = np.asarray(index)
        return np.asarray(self.lower) + index * self.dx

    def flat_index(self, index) -> np.ndarray:
        index = np.asarray(index)
        return np.ravel_multi_index(tuple(np.moveaxis(index, -1, 0)), self.shape)

    def unravel(self, flat) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat), self.shape), axis=-1)

    def to_grid_units(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - np.asarray(self.lower)) / self.dx


def build_grid(dim: int, lower, upper, M: int) -> GridSpec:
    """Build a :class:`GridSpec`; scalar bounds are broadcast to every axis."""
    lower = tuple(float(v) for v in np.broadcast_to(lower, (dim,)))
    upper = tuple(float(v) for v in np.broadcast_to(upper, (dim,)))
    return GridSpec(dim, lower, upper, int(M))


def stencil_offset(q: int) -> int:
    return (q - 1) // 2


def stencil_base(u, q: int) -> np.ndarray:
    """First node of the degree-``q`` stencil for grid-unit coordinates ``u``."""
    return np.floor(u).astype(np.int64) - stencil_offset(q)


def neighbor_offsets(dim: int, neighborhood: str) -> list[tuple[int, ...]]:
    if neighborhood == "axis":
        out = []
        for d in range(dim):
            for s in (1, -1):
                e = [0] * dim
                e[d] = s
                out.append(tuple(e))
        return out
    if neighborhood == "full":
        return [o for o in product((-1, 0, 1), repeat=dim) if any(o)]
    raise ConfigurationError(f"unknown neighborhood {neighborhood!r}")


@dataclass(frozen=True)
class NodeClass:
    """Per-node labels on a grid (see :class:`Label`)."""

    grid: object
    labels: np.ndarray
    q: int
    neighborhood: str

    @property
    def interpolation(self) -> np.ndarray:
        return self.labels == Label.INTERPOLATION

    @property
    def edge(self) -> np.ndarray:
        return self.labels == Label.EDGE

    @property
    def band(self) -> np.ndarray:
        return self.labels != Label.OUTSIDE


@dataclass(frozen=True)
class BandMap:
    """Bijection between band nodes and matrix rows (lexicographic order)."""

    grid: object
    flat: np.ndarray
    nodes: np.ndarray
    row_of: np.ndarray
    is_interp: np.ndarray

    @property
    def size(self) -> int:
        return int(self.flat.size)

    @property
    def points(self) -> np.ndarray:
        return self.grid.coords(self.nodes)

    @property
    def interp_rows(self) -> np.ndarray:
        return np.flatnonzero(self.is_interp)

    @property
    def edge_rows(self) -> np.ndarray:
        return np.flatnonzero(~self.is_interp)

    def to_csv(self, path) -> None:
        dim = self.nodes.shape[1]
        names = ["i", "j", "k"][:dim]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([*names, "label", "row"])
            for r in range(self.size):
                label = "interpolation" if self.is_interp[r] else "edge"
                w.writerow([*map(int, self.nodes[r]), label, r])


def _mark_stencils(mask, grid, points, q):
    """Set ``mask`` on every stencil node of ``points``; error if off-grid."""
    if len(points) == 0:
        return
    shape = np.asarray(grid.shape)
    base = stencil_base(grid.to_grid_units(points), q)
    lo = base.copy()
    if grid.mirror_axis0:
        lo[:, 0] = 0
    if (lo < 0).any() or (base + q >= shape).any():
        raise GeometryError("surface tube exceeds the grid: an interpolation stencil leaves the domain")
    for off in product(range(q + 1), repeat=grid.dim):
        idx = base + np.asarray(off)
        if grid.mirror_axis0:
            idx[:, 0] = np.abs(idx[:, 0])
        mask[tuple(idx.T)] = True


def _check_inside(interp, grid, q):
    """A marked node on the outer face means some stencil was clipped."""
    for d in range(grid.dim):
        for end in (0, grid.shape[d] - 1):
            if end == 0 and grid.mirror_axis0 and d == 0:
                continue
            face = [slice(None)] * grid.dim
            face[d] = end
            if interp[tuple(face)].any():
                raise GeometryError("surface tube exceeds the grid: interpolation nodes reach the boundary")


def _slab_points(grid, i):
    axes = [grid.axis(d) for d in range(1, grid.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    x0 = np.full(mesh[0].shape, grid.axis(0)[i])
    return np.stack([x0, *mesh], axis=-1).reshape(-1, grid.dim)


def classify_nodes(grid, surface, q: int = 3, neighborhood: str = "axis",
                   seed_radius: float | None = None,
                   sample_spacing: float | None = None) -> NodeClass:
    """Label grid nodes as interpolation, edge or outside.

    Interpolation nodes are those inside the degree-``q`` stencil of some
    surface point, counting both stencil choices when the point sits
    exactly on a grid line. Surfaces with an exact ``box_hits_units`` test
    get that set exactly; for the others it is the union of the stencils of
    ``cp(x)`` over the seed nodes ``|phi(x)| <= seed_radius`` and of a dense
    surface sample.

    Parameters
    ----------
    grid : GridSpec or HalfPlaneGrid
    surface : Surface
    q : int
        Interpolation degree.
    neighborhood : {"axis", "full"}
        Neighbours used to grow the edge layer.
    seed_radius : float, optional
        Defaults to ``(q + 2) * dx * sqrt(dim)``.
    sample_spacing : float, optional
        Surface sample spacing when no ``box_hits`` test exists
        (default ``dx / 16``).

    Raises
    ------
    GeometryError
        If the interpolation nodes or their edge layer leave the grid.
    """
    dim, dx = grid.dim, grid.dx
    if seed_radius is None:
        seed_radius = (q + 2) * dx * np.sqrt(dim)
    interp = np.zeros(grid.shape, dtype=bool)
    if hasattr(surface, "box_hits_units"):
        # node n lies in a stencil of p (either base choice at ties) iff
        # u_p lies in the closed box [n - q + off, n + off + 1] on every axis
        off = stencil_offset(q)
        rest = np.indices(grid.shape[1:]).reshape(dim - 1, -1).T
        for i in range(grid.shape[0]):
            n = np.column_stack([np.full(len(rest), i), rest]).astype(float)
            hit = surface.box_hits_units(n - q + off, n + off + 1, grid)
            interp[i] = hit.reshape(grid.shape[1:])
    else:
        seeds = []
        for i in range(grid.shape[0]):
            pts = _slab_points(grid, i)
            near = surface.seed_mask(pts, seed_radius)
            if near.any():
                seeds.append(pts[near])
        if seeds:
            _mark_stencils(interp, grid, surface.closest_point(np.concatenate(seeds)), q)
        spacing = dx / 16 if sample_spacing is None else sample_spacing
        _mark_stencils(interp, grid, surface.sample(spacing), q)
    _check_inside(interp, grid, q)

    shape = grid.shape
    grown = np.zeros_like(interp)
    for off in neighbor_offsets(dim, neighborhood):
        src = []
        dst = []
        for d, o in enumerate(off):
            n = shape[d]
            src.append(slice(max(0, -o), n - max(0, o)))
            dst.append(slice(max(0, o), n - max(0, -o)))
        grown[tuple(dst)] |= interp[tuple(src)]
    labels = np.zeros(shape, dtype=np.int8)
    labels[grown & ~interp] = Label.EDGE
    labels[interp] = Label.INTERPOLATION
    return NodeClass(grid, labels, q, neighborhood)


def enumerate_band(node_class: NodeClass) -> BandMap:
    """Enumerate band nodes in lexicographic multi-index order."""
    grid = node_class.grid
    labels = node_class.labels.ravel()
    flat = np.flatnonzero(labels != Label.OUTSIDE).astype(np.int64)
    row_of = np.full(labels.size, -1, dtype=np.int64)
    row_of[flat] = np.arange(flat.size)
    nodes = grid.unravel(flat).reshape(-1, grid.dim)
    is_interp = labels[flat] == Label.INTERPOLATION
    return BandMap(grid, flat, nodes, row_of, is_interp)


def build_band(grid, surface, q: int = 3, **kwargs) -> BandMap:
    """Shortcut for ``enumerate_band(classify_nodes(...))``."""
    return enumerate_band(classify_nodes(grid, surface, q, **kwargs))


def nodes_within(grid, surface, radius: float) -> np.ndarray:
    """Boolean grid mask of nodes with ``|phi| <= radius``."""
    out = np.zeros(grid.shape, dtype=bool)
    for i in range(grid.shape[0]):
        pts = _slab_points(grid, i)
        out[i] = (np.abs(surface.signed_distance(pts)) <= radius).reshape(grid.shape[1:])
    return out


__all__ = [
    "GridSpec", "Label", "NodeClass", "BandMap", "build_grid", "classify_nodes",
    "enumerate_band", "build_band", "stencil_base", "stencil_offset",
    "neighbor_offsets", "nodes_within",
]

