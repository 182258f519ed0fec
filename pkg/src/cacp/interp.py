"""Tensor-product Lagrange interpolation onto closest points."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from cacp import kernels
from cacp.errors import AssemblyError, GeometryError
from cacp.grid import stencil_base


SNAP = 1e-9


def _grid_units(grid, points) -> np.ndarray:
    """Grid units with round-off near integers removed.

    Points that are grid nodes up to round-off would otherwise pick the
    neighbouring stencil and put ~1e-16 weights on nodes outside the band.
    """
    u = grid.to_grid_units(points)
    r = np.rint(u)
    return np.where(np.abs(u - r) <= SNAP, r, u)


@dataclass(frozen=True)
class InterpStencil:
    """Weights of a single target on its ``(q + 1) ** dim`` stencil nodes."""

    target: np.ndarray
    base: np.ndarray
    q: int
    weights: np.ndarray  # shape (q + 1,) * dim

    @property
    def nodes(self) -> np.ndarray:
        dim = len(self.base)
        off = np.indices((self.q + 1,) * dim).reshape(dim, -1).T
        return self.base + off


def interpolation_weights(grid, p, q: int) -> InterpStencil:
    """Stencil for one point ``p``.

    Raises
    ------
    GeometryError
        If the stencil does not fit inside the grid.
    """
    p = np.asarray(p, dtype=float)
    u = _grid_units(grid, p)
    base = stencil_base(u, q)
    if (base < 0).any() or (base + q >= np.asarray(grid.shape)).any():
        raise GeometryError(f"degree-{q} stencil of {p} leaves the grid")
    w1 = kernels.lagrange_weights(u - base, q)
    w = w1[0]
    for d in range(1, grid.dim):
        w = np.multiply.outer(w, w1[d])
    return InterpStencil(p, base, q, w)


def stencil_triplets(grid, band, targets, q: int):
    """Raw ``(rows, cols, vals)`` for the interpolation matrix.

    Checks that every stencil node is a band member and raises
    :class:`AssemblyError` naming the first offending node otherwise.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, grid.dim)
    u = _grid_units(grid, targets)
    base = stencil_base(u, q)
    rows, cols, vals, bad, _ = kernels.stencil_entries(
        u, base, q, band.row_of, grid.shape, grid.mirror_axis0)
    if bad >= 0:
        # nodes with an exactly zero weight may sit outside the band
        miss = cols < 0
        real = miss & (vals != 0.0)
        if real.any():
            k = int(np.flatnonzero(real)[0])
            t = int(rows[k])
            off = np.indices((q + 1,) * grid.dim).reshape(grid.dim, -1).T
            node = base[t] + off[k % len(off)]
            if grid.mirror_axis0:
                node[0] = abs(node[0])
            node = tuple(int(v) for v in node)
            raise AssemblyError(
                f"interpolation stencil of target {t} ({targets[t]}) touches node {node}, "
                "which is not in the band", node)
        rows, cols, vals = rows[~miss], cols[~miss], vals[~miss]
    return rows, cols, vals


def build_interp_matrix(grid, band, targets, q: int) -> sp.csr_matrix:
    """Sparse ``E_q`` with one row per target and one column per band node."""
    rows, cols, vals = stencil_triplets(grid, band, targets, q)
    n = len(np.asarray(targets).reshape(-1, grid.dim))
    E = sp.csr_matrix((vals, (rows, cols)), shape=(n, band.size))
    E.sum_duplicates()
    return E


def write_matrix_market(path, A, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)
