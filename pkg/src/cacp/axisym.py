"""Axisymmetric surfaces in the meridian half-plane.

A surface of revolution ``r(s, t) = x(s) e_x(t) + y(s) e_y`` is handled
through its generating curve in the half-plane ``x >= 0``. Fields are
axisymmetric, so everything lives on a 2D grid whose first column sits on
the axis; values at ``x = -dx`` are even reflections of ``x = +dx``.

The principal curvatures are ``kappa`` (meridian) and ``h`` (azimuthal), and
with ``T = (1 + phi kappa) / (1 + phi h)`` the embedded operators read::

    grad_s g  = (1 + phi kappa) grad g
    lap_s g   = (1 + phi kappa)(1 + phi h) div(T grad g)
    div_s f   = (1 + phi kappa)(1 + phi h) div(f_tau tau / (1 + phi h)) + H f_n

where ``div`` is the cylindrical divergence ``(1/x)(x F^x)_x + (F^y)_y``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from cacp.assembly import SparseSystem, _check_tube, _closure_rows, omega_for
from cacp.errors import AssemblyError, ConfigurationError, GeometryError
from cacp.grid import build_band
from cacp.interp import build_interp_matrix
from cacp.surface import Surface, _as_points, round_box_hits

POLE_EPS = 1e-8


@dataclass(frozen=True)
class HalfPlaneGrid:
    """Grid on ``[0, width] x [-height/2, height/2]`` with square cells.

    Node ``(i, j)`` sits at ``(i dx, -height/2 + j dx)``; column ``i = 0`` is
    the symmetry axis.
    """

    Mx: int
    width: float = 2.0
    height: float = 4.0
    dim: int = 2
    dx: float = field(init=False)
    My: int = field(init=False)

    def __post_init__(self):
        if self.Mx < 4:
            raise ConfigurationError(f"need at least 4 radial cells, got {self.Mx}")
        dx = self.width / self.Mx
        my = self.height / dx
        if abs(my - round(my)) > 1e-9 * my:
            raise ConfigurationError("height must be a whole number of cells")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "My", int(round(my)))

    @property
    def lower(self) -> tuple[float, float]:
        return (0.0, -0.5 * self.height)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Mx + 1, self.My + 1)

    @property
    def n_nodes(self) -> int:
        return (self.Mx + 1) * (self.My + 1)

    @property
    def mirror_axis0(self) -> bool:
        return True

    def axis(self, d: int) -> np.ndarray:
        return self.lower[d] + np.arange(self.shape[d]) * self.dx

    def coords(self, index) -> np.ndarray:
        return np.asarray(self.lower) + np.asarray(index) * self.dx

    def flat_index(self, index) -> np.ndarray:
        index = np.asarray(index)
        return np.ravel_multi_index(tuple(np.moveaxis(index, -1, 0)), self.shape)

    def unravel(self, flat) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(flat), self.shape), axis=-1)

    def to_grid_units(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - np.asarray(self.lower)) / self.dx


class AxisymShape(Surface):
    """Ellipsoid of revolution with radial semi-axis ``a`` and axial ``c``.

    Generating curve ``x = a sin s``, ``y = -c cos s`` for ``s`` in
    ``[0, pi]`` (south pole to north pole); ``a = c`` gives a sphere.
    The manufactured tension problem is ``H^2 g - lap_s g = m`` with
    ``g = y``, for which ``lap_s y = -H n_y``.
    """

    dim = 2

    def __init__(self, a: float = 1.0, c: float = 1.0, nscan: int = 512,
                 tol: float = 1e-13, maxit: int = 60):
        if a <= 0 or c <= 0:
            raise GeometryError("semi-axes must be positive")
        self.a = float(a)
        self.c = float(c)
        self.nscan = nscan
        self.tol = tol
        self.maxit = maxit
        self.name = "axisym-sphere" if a == c else "axisym-ellipsoid"

    # generating curve ---------------------------------------------------
    def curve(self, s):
        s = np.asarray(s, dtype=float)
        return self.a * np.sin(s), -self.c * np.cos(s)

    def curve_d1(self, s):
        return self.a * np.cos(s), self.c * np.sin(s)

    def curve_d2(self, s):
        return -self.a * np.sin(s), self.c * np.cos(s)

    def speed(self, s):
        xs, ys = self.curve_d1(s)
        return np.hypot(xs, ys)

    def normal_at(self, s):
        xs, ys = self.curve_d1(s)
        q = np.hypot(xs, ys)
        return np.stack([ys / q, -xs / q], axis=-1)

    def tangent_at(self, s):
        xs, ys = self.curve_d1(s)
        q = np.hypot(xs, ys)
        return np.stack([xs / q, ys / q], axis=-1)

    def curvatures_at(self, s):
        """``(kappa, h)`` with the umbilic limit ``h = kappa`` on the axis."""
        s = np.asarray(s, dtype=float)
        x, _ = self.curve(s)
        xs, ys = self.curve_d1(s)
        xss, yss = self.curve_d2(s)
        q = np.hypot(xs, ys)
        kappa = -(xss * ys - yss * xs) / q**3
        with np.errstate(divide="ignore", invalid="ignore"):
            h = ys / (x * q)
        h = np.where(np.abs(x) < POLE_EPS, kappa, h)
        return kappa, h

    # closest point ------------------------------------------------------
    def closest_param(self, x) -> np.ndarray:
        x = _as_points(x, 2)
        px, py = np.abs(x[:, 0]), x[:, 1]
        if self.a == self.c:
            s = np.arctan2(px, -py)
            return s
        # the meridian ellipse is closed over [-pi, pi); scan then Newton
        n = self.nscan
        grid = np.linspace(0.0, np.pi, n + 1)
        gx, gy = self.curve(grid)
        d2 = (gx[None, :] - px[:, None]) ** 2 + (gy[None, :] - py[:, None]) ** 2
        s = grid[np.argmin(d2, axis=1)]
        h = np.pi / n
        lo = np.maximum(s - h, 0.0)
        hi = np.minimum(s + h, np.pi)
        for _ in range(self.maxit):
            cx, cy = self.curve(s)
            tx, ty = self.curve_d1(s)
            ax, ay = self.curve_d2(s)
            f = (cx - px) * tx + (cy - py) * ty
            fp = tx * tx + ty * ty + (cx - px) * ax + (cy - py) * ay
            if np.all(np.abs(f) <= self.tol):
                break
            lo = np.where(f < 0, s, lo)
            hi = np.where(f > 0, s, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = s - f / fp
            bad = ~np.isfinite(step) | (fp <= 0) | (step < lo) | (step > hi)
            s = np.where(bad, 0.5 * (lo + hi), step)
        return s

    def closest_point(self, x):
        x = _as_points(x, 2)
        cx, cy = self.curve(self.closest_param(x))
        return np.stack([cx, cy], axis=1)

    def signed_distance(self, x):
        return self.geometry(x)[1]

    def geometry(self, x):
        """Closest parameter, ``phi``, ``kappa``, ``h`` and unit normal at ``x``."""
        x = _as_points(x, 2)
        s = self.closest_param(x)
        cx, cy = self.curve(s)
        d = np.hypot(np.abs(x[:, 0]) - cx, x[:, 1] - cy)
        inside = (x[:, 0] / self.a) ** 2 + (x[:, 1] / self.c) ** 2 < 1.0
        phi = np.where(inside, -d, d)
        kappa, h = self.curvatures_at(s)
        return s, phi, kappa, h, self.normal_at(s)

    def tube_factors(self, x):
        """``(1 + phi kappa, 1 + phi h)`` at arbitrary points."""
        _, phi, kappa, h, _ = self.geometry(x)
        return 1.0 + phi * kappa, 1.0 + phi * h

    def box_hits_units(self, lo, hi, grid):
        # the meridian ellipse is the unit circle after scaling each axis
        lower = np.asarray(grid.lower)
        scale = np.array([self.a, self.c]) / grid.dx
        centre = -lower / grid.dx
        lo = (np.asarray(lo, dtype=float) - centre) / scale
        hi = (np.asarray(hi, dtype=float) - centre) / scale
        return round_box_hits(lo, hi, 0.0, 1.0)

    # manufactured tension problem ---------------------------------------
    def total_curvature(self, p):
        s = self.closest_param(p)
        kappa, h = self.curvatures_at(s)
        return kappa + h

    def exact(self, p):
        return _as_points(p, 2)[:, 1].copy()

    def reaction(self, p):
        return self.total_curvature(p) ** 2

    def forcing(self, p):
        p = _as_points(p, 2)
        s = self.closest_param(p)
        kappa, h = self.curvatures_at(s)
        H = kappa + h
        ny = self.normal_at(s)[:, 1]
        return H * H * p[:, 1] + H * ny


def make_axisym(name: str) -> AxisymShape:
    if name == "axisym-sphere":
        return AxisymShape(1.0, 1.0)
    if name == "axisym-ellipsoid":
        return AxisymShape(0.5, 1.0)
    raise ConfigurationError(f"unknown axisymmetric shape {name!r}")


# ----------------------------------------------------------------------
# embedded operators on band fields

@dataclass
class AxisymBand:
    """Band on a half-plane grid with the geometry cached per band node."""

    grid: HalfPlaneGrid
    shape: AxisymShape
    band: object
    s: np.ndarray
    phi: np.ndarray
    kappa: np.ndarray
    h: np.ndarray
    normal: np.ndarray

    @property
    def fk(self) -> np.ndarray:
        return 1.0 + self.phi * self.kappa

    @property
    def fh(self) -> np.ndarray:
        return 1.0 + self.phi * self.h

    @property
    def H(self) -> np.ndarray:
        return self.kappa + self.h

    @property
    def tangent(self) -> np.ndarray:
        return np.stack([-self.normal[:, 1], self.normal[:, 0]], axis=1)

    @property
    def cp(self) -> np.ndarray:
        cx, cy = self.shape.curve(self.s)
        return np.stack([cx, cy], axis=1)


def axisym_band(grid: HalfPlaneGrid, shape: AxisymShape) -> AxisymBand:
    """Classify the half-plane grid and cache the tube geometry."""
    band = build_band(grid, shape)
    s, phi, kappa, h, n = shape.geometry(band.points)
    ab = AxisymBand(grid, shape, band, s, phi, kappa, h, n)
    _check_tube(ab.fk, "band nodes")
    _check_tube(ab.fh, "band nodes")
    return ab


def _neighbor(ab: AxisymBand, rows, d, step):
    """Band rows of the neighbour ``step`` along axis ``d`` (axis mirrored)."""
    nodes = ab.band.nodes[rows].copy()
    nodes[:, d] += step
    if d == 0:
        nodes[:, 0] = np.abs(nodes[:, 0])
    shape = np.asarray(ab.grid.shape)
    inside = ((nodes >= 0) & (nodes < shape)).all(axis=1)
    cols = np.full(len(rows), -1, dtype=np.int64)
    cols[inside] = ab.band.row_of[ab.grid.flat_index(nodes[inside])]
    if (cols < 0).any():
        k = int(np.flatnonzero(cols < 0)[0])
        raise AssemblyError("axisymmetric stencil reaches a node outside the band",
                            tuple(int(v) for v in nodes[k]))
    return cols


def laplace_beltrami_matrix(ab: AxisymBand) -> sp.csr_matrix:
    """Sparse embedded Laplace-Beltrami operator on the interpolation rows.

    Face coefficients are averages of the nodal values of ``x T`` (radial)
    and ``T`` (axial); on the axis the radial part uses the quadratic
    profile limit ``4 T_{x+} (g_1 - g_0) / dx^2``.
    """
    grid, band = ab.grid, ab.band
    n = band.size
    dx2 = grid.dx**2
    T = ab.fk / ab.fh
    x = band.points[:, 0]
    ii = band.interp_rows
    F = ab.fk[ii] * ab.fh[ii]
    xi = x[ii]
    on_axis = band.nodes[ii, 0] == 0
    rows, cols, vals = [], [], []
    diag = np.zeros(len(ii))

    def add(c, w):
        rows.append(ii)
        cols.append(c)
        vals.append(F * w)
        nonlocal diag
        diag = diag - F * w

    xp = _neighbor(ab, ii, 0, 1)
    xm = _neighbor(ab, ii, 0, -1)
    safe_x = np.where(on_axis, 1.0, xi)
    w_xp = np.where(on_axis, 4.0 * 0.5 * (T[ii] + T[xp]),
                    0.5 * (xi * T[ii] + x[xp] * T[xp]) / safe_x) / dx2
    w_xm = np.where(on_axis, 0.0, 0.5 * (xi * T[ii] + x[xm] * T[xm]) / safe_x) / dx2
    add(xp, w_xp)
    add(xm, w_xm)
    for step in (1, -1):
        c = _neighbor(ab, ii, 1, step)
        add(c, 0.5 * (T[ii] + T[c]) / dx2)
    rows.append(ii)
    cols.append(ii)
    vals.append(diag)
    L = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n))
    L.sum_duplicates()
    return L


def embed_laplace_beltrami_axisym(ab: AxisymBand, gamma) -> np.ndarray:
    """Embedded ``lap_s gamma`` on the interpolation rows (NaN on edge rows)."""
    out = np.full(ab.band.size, np.nan)
    ii = ab.band.interp_rows
    out[ii] = (laplace_beltrami_matrix(ab) @ np.asarray(gamma, dtype=float))[ii]
    return out


def embed_gradient_axisym(ab: AxisymBand, gamma) -> np.ndarray:
    """``(1 + phi kappa)`` times the centred gradient, shape ``(n, 2)``.

    Rows that are not interpolation nodes are NaN.
    """
    gamma = np.asarray(gamma, dtype=float)
    ii = ab.band.interp_rows
    out = np.full((ab.band.size, 2), np.nan)
    for d in range(2):
        p = _neighbor(ab, ii, d, 1)
        m = _neighbor(ab, ii, d, -1)
        out[ii, d] = ab.fk[ii] * (gamma[p] - gamma[m]) / (2 * ab.grid.dx)
    return out


def embed_surface_divergence_axisym(ab: AxisymBand, f_tau, f_n=None) -> np.ndarray:
    """Embedded surface divergence of ``f = f_tau tau + f_n n``.

    ``f_tau`` and ``f_n`` are band fields (constant along normals). The
    tangential part uses the centred cylindrical divergence of
    ``f_tau tau / (1 + phi h)``; on the axis the radial term is
    ``2 F^x_1 / dx``. The normal part contributes ``H f_n``.
    """
    f_tau = np.asarray(f_tau, dtype=float)
    ii = ab.band.interp_rows
    dx = ab.grid.dx
    Fv = (f_tau / ab.fh)[:, None] * ab.tangent
    x = ab.band.points[:, 0]
    xi = x[ii]
    on_axis = ab.band.nodes[ii, 0] == 0
    xp = _neighbor(ab, ii, 0, 1)
    xm = _neighbor(ab, ii, 0, -1)
    safe_x = np.where(on_axis, 1.0, xi)
    radial = np.where(on_axis, 2.0 * Fv[xp, 0] / dx,
                      (x[xp] * Fv[xp, 0] - x[xm] * Fv[xm, 0]) / (2 * dx * safe_x))
    yp = _neighbor(ab, ii, 1, 1)
    ym = _neighbor(ab, ii, 1, -1)
    axial = (Fv[yp, 1] - Fv[ym, 1]) / (2 * dx)
    out = np.full(ab.band.size, np.nan)
    out[ii] = ab.fk[ii] * ab.fh[ii] * (radial + axial)
    if f_n is not None:
        out[ii] += ab.H[ii] * np.asarray(f_n, dtype=float)[ii]
    return out


def inextensibility_residual(shape: AxisymShape, u_tau, u_n, n: int = 512):
    """``(1/(x |r_s|)) (x u_tau)_s + H u_n`` along the generating curve.

    Parameters
    ----------
    u_tau, u_n : callable
        Velocity components along ``tau`` and ``n`` as functions of ``s``.
    n : int
        Number of sample points; they sit at ``s_k = (k + 1/2) pi / n`` so
        the poles are never evaluated directly.

    Returns
    -------
    s, residual : ndarray
    """
    ds = np.pi / n
    s = (np.arange(n) + 0.5) * ds
    x, _ = shape.curve(s)
    q = shape.speed(s)
    kappa, h = shape.curvatures_at(s)
    flux = x * u_tau(s)
    # x and a smooth u_tau are both odd about a pole, so x u_tau is even
    padded = np.concatenate([[flux[0]], flux, [flux[-1]]])
    dflux = (padded[2:] - padded[:-2]) / (2 * ds)
    return s, dflux / (x * q) + (kappa + h) * u_n(s)


# ----------------------------------------------------------------------
# tension solve

def assemble_tension_axisym(ab: AxisymBand) -> SparseSystem:
    """CACP system for ``H^2 g - lap_s g = m`` on the half-plane band."""
    band, grid = ab.band, ab.grid
    n = band.size
    cp = ab.cp
    E3 = build_interp_matrix(grid, band, cp, 3)
    L = laplace_beltrami_matrix(ab)
    ii = band.interp_rows
    ee = band.edge_rows
    c = np.zeros(n)
    c[ii] = ab.H[ii] ** 2
    A = (sp.diags(c) - L).tocsr()
    omega = omega_for(2, grid.dx)
    r, cc, v = _closure_rows(band, E3, omega, ee)
    A = (A + sp.csr_matrix((v, (r, cc)), shape=(n, n))).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    b = np.zeros(n)
    b[ii] = ab.shape.forcing(cp[ii])
    return SparseSystem(A, b, band, "cacp-axisym", omega, E3, cp)


@dataclass
class TensionResult:
    gamma: np.ndarray
    exact: np.ndarray
    l2: float
    linf: float
    system: SparseSystem


def solve_tension_axisym(shape: AxisymShape, Mx: int, width: float = 2.0,
                         height: float = 4.0) -> TensionResult:
    """Solve the manufactured tension problem and measure the error."""
    from cacp.solver import error_norms, solve

    grid = HalfPlaneGrid(Mx, width, height)
    ab = axisym_band(grid, shape)
    system = assemble_tension_axisym(ab)
    rep = solve(system)
    exact = shape.exact(system.cp)
    l2, linf = error_norms(rep.gamma, exact)
    return TensionResult(rep.gamma, exact, l2, linf, system)


def write_fields_csv(path, ab: AxisymBand, **fields) -> None:
    """Write band fields as CSV with columns ``i, j, x, y, label, <fields>``."""
    names = sorted(fields)
    pts = ab.band.points
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x", "y", "label", *names])
        for r in range(ab.band.size):
            label = "interpolation" if ab.band.is_interp[r] else "edge"
            w.writerow([int(ab.band.nodes[r, 0]), int(ab.band.nodes[r, 1]),
                        repr(float(pts[r, 0])), repr(float(pts[r, 1])), label,
                        *(repr(float(fields[k][r])) for k in names)])
