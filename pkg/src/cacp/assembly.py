"""Assembly of the CP and CACP linear systems over a band.

CP:
    ``A = I - E1 L + omega (I - E3)`` with ``L`` the standard Laplacian on
    interpolation rows and the identity on edge rows.
CACP:
    interpolation rows hold ``c gamma - F * div(alpha grad gamma)`` where
    ``F`` and the face coefficients ``alpha`` come from the tube geometry,
    edge rows hold the closure ``omega (I - E3)`` with zero right-hand side.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from cacp.errors import AssemblyError, ConfigurationError, GeometryError
from cacp.interp import build_interp_matrix, write_matrix_market

log = logging.getLogger(__name__)

COEFF_VARIANTS = ("node", "face")


@dataclass
class SparseSystem:
    """Assembled system ``A gamma = b`` over a band."""

    A: sp.csr_matrix
    b: np.ndarray
    band: object
    method: str
    omega: float
    E3: sp.csr_matrix
    cp: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def nnz(self) -> int:
        return int(self.A.nnz)

    @property
    def size(self) -> int:
        return int(self.A.shape[0])

    def write(self, directory, stem: str | None = None) -> tuple[Path, Path]:
        """Write ``A`` (Matrix Market) and ``b`` (CSV) into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = stem or self.method
        mtx = directory / f"{stem}_A.mtx"
        rhs = directory / f"{stem}_b.csv"
        write_matrix_market(mtx, self.A, comment=f"{self.method} system, {self.size} rows")
        with open(rhs, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "b"])
            for r, v in enumerate(self.b):
                w.writerow([r, repr(float(v))])
        return mtx, rhs


def omega_for(dim: int, dx: float) -> float:
    return 2.0 * dim / dx**2


def _axis_neighbors(grid, band, rows):
    """Band rows of the ``2 dim`` axis neighbours of ``rows``.

    Returns a list of ``(axis, sign, cols)`` tuples.
    """
    nodes = band.nodes[rows]
    shape = np.asarray(grid.shape)
    out = []
    for d in range(grid.dim):
        for s in (1, -1):
            nb = nodes.copy()
            nb[:, d] += s
            if grid.mirror_axis0 and d == 0:
                nb[:, 0] = np.abs(nb[:, 0])
            inside = ((nb >= 0) & (nb < shape)).all(axis=1)
            cols = np.full(len(rows), -1, dtype=np.int64)
            if inside.any():
                cols[inside] = band.row_of[grid.flat_index(nb[inside])]
            miss = cols < 0
            if miss.any():
                k = int(np.flatnonzero(miss)[0])
                raise AssemblyError(
                    f"Laplacian stencil at node {tuple(int(v) for v in nodes[k])} "
                    "reaches a node outside the band", tuple(int(v) for v in nb[k]))
            out.append((d, s, cols))
    return out


def _closure_rows(band, E3, omega, rows):
    """``omega (e_k - E3[k])`` for the given rows, as COO triplets."""
    sub = E3[rows].tocoo()
    r = np.concatenate([rows, rows[sub.row]])
    c = np.concatenate([rows, sub.col])
    v = np.concatenate([np.full(len(rows), omega), -omega * sub.data])
    return r, c, v


def _interp_matrices(grid, band, cp):
    E1 = build_interp_matrix(grid, band, cp, 1)
    E3 = build_interp_matrix(grid, band, cp, 3)
    return E1, E3


def assemble_cp(grid, surface, band, dim: int | None = None) -> SparseSystem:
    """Closest Point system ``I - E1 L + omega (I - E3)``, ``b = m(cp)``."""
    dim = grid.dim if dim is None else dim
    if dim != grid.dim:
        raise ConfigurationError(f"dim={dim} does not match the grid")
    n = band.size
    dx = grid.dx
    cp = surface.closest_point(band.points)
    E1, E3 = _interp_matrices(grid, band, cp)
    ii = band.interp_rows
    ee = band.edge_rows
    rows = [ii, ee]
    cols = [ii, ee]
    vals = [np.full(len(ii), -2.0 * dim / dx**2), np.ones(len(ee))]
    for _, _, c in _axis_neighbors(grid, band, ii):
        rows.append(ii)
        cols.append(c)
        vals.append(np.full(len(ii), 1.0 / dx**2))
    L = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    I = sp.identity(n, format="csr")
    omega = omega_for(dim, dx)
    A = (I - E1 @ L + omega * (I - E3)).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    c_field, m_field = surface.reaction(cp), surface.forcing(cp)
    if not np.allclose(c_field, 1.0):
        A = (A + sp.diags(c_field - 1.0)).tocsr()
    return SparseSystem(A, m_field.astype(float), band, "cp", omega, E3, cp,
                        {"E1": E1, "L": L})


def _assemble_cacp(grid, surface, band, node_factor, face_coeff, name):
    """Shared CACP assembly given the outer factor and face coefficients.

    ``node_factor(rows)`` returns ``F`` on interpolation rows and
    ``face_coeff(rows, axis, sign, cols)`` the face coefficient between each
    row and its neighbour.
    """
    n = band.size
    dx2 = grid.dx**2
    cp = surface.closest_point(band.points)
    E3 = build_interp_matrix(grid, band, cp, 3)
    ii = band.interp_rows
    ee = band.edge_rows
    F = node_factor(ii)
    c_field = surface.reaction(cp[ii])
    diag = c_field.astype(float).copy()
    rows, cols, vals = [], [], []
    for d, s, c in _axis_neighbors(grid, band, ii):
        a = face_coeff(ii, d, s, c)
        w = F * a / dx2
        rows.append(ii)
        cols.append(c)
        vals.append(-w)
        diag += w
    rows.append(ii)
    cols.append(ii)
    vals.append(diag)
    omega = omega_for(grid.dim, grid.dx)
    r, c, v = _closure_rows(band, E3, omega, ee)
    rows.append(r)
    cols.append(c)
    vals.append(v)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    b = np.zeros(n)
    b[ii] = surface.forcing(cp[ii])
    return SparseSystem(A, b, band, name, omega, E3, cp)


def _check_tube(values, what):
    bad = ~(values > 0)
    if bad.any():
        raise GeometryError(
            f"tube too wide: 1 + phi*kappa <= 0 at {int(bad.sum())} {what} "
            f"(min {np.nanmin(values):.3e}); refine the grid")


def assemble_cacp_2d(grid, surface, band, coeff: str = "node") -> SparseSystem:
    """CACP system for a curve in the plane.

    Parameters
    ----------
    coeff : {"node", "face"}
        ``"node"`` averages ``1 + phi kappa`` at the two nodes of a face;
        ``"face"`` evaluates it at the face midpoint through the closest
        point of that midpoint.
    """
    if grid.dim != 2:
        raise ConfigurationError("assemble_cacp_2d needs a 2D grid")
    if coeff not in COEFF_VARIANTS:
        raise ConfigurationError(f"coeff must be one of {COEFF_VARIANTS}, got {coeff!r}")
    pts = band.points
    all_f = None

    def node_factor(rows):
        nonlocal all_f
        f = surface.tube_factor(pts[rows])
        _check_tube(f, "interpolation nodes")
        all_f = np.full(band.size, np.nan)
        all_f[rows] = f
        return f

    def face_coeff(rows, d, s, cols):
        if coeff == "node":
            missing = np.isnan(all_f[cols])
            if missing.any():
                todo = np.unique(cols[missing])
                all_f[todo] = surface.tube_factor(pts[todo])
            f_nb = all_f[cols]
            _check_tube(f_nb, "neighbour nodes")
            return 0.5 * (all_f[rows] + f_nb)
        mid = pts[rows].copy()
        mid[:, d] += 0.5 * s * grid.dx
        a = surface.tube_factor(mid)
        _check_tube(a, "faces")
        return a

    return _assemble_cacp(grid, surface, band, node_factor, face_coeff, "cacp")


def assemble_cacp_sphere(grid, surface, band) -> SparseSystem:
    """CACP system for a sphere: ``c gamma - (1 + phi/R)^2 Lap gamma``."""
    if grid.dim != 3:
        raise ConfigurationError("assemble_cacp_sphere needs a 3D grid")
    pts = band.points

    def node_factor(rows):
        f = surface.tube_factor(pts[rows])
        _check_tube(f, "interpolation nodes")
        return f

    def face_coeff(rows, d, s, cols):
        return np.ones(len(rows))

    return _assemble_cacp(grid, surface, band, node_factor, face_coeff, "cacp")


def assemble(grid, surface, band, method: str, coeff: str = "node") -> SparseSystem:
    """Dispatch on ``method`` in ``{"cp", "cacp"}`` and the grid dimension."""
    if method == "cp":
        return assemble_cp(grid, surface, band)
    if method == "cacp":
        if grid.dim == 2:
            return assemble_cacp_2d(grid, surface, band, coeff)
        return assemble_cacp_sphere(grid, surface, band)
    raise ConfigurationError(f"unknown method {method!r}")
