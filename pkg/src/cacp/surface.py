"""Geometry providers for the test surfaces.

Every surface exposes the closest point map, the signed distance (positive
outside), curvature information at the closest point, and the
manufactured data ``c``, ``m`` and exact solution used by the convergence
studies. Data fields are always evaluated through the closest point, so
they are constant along normals.
"""
from __future__ import annotations

import logging

import numpy as np

from cacp import kernels
from cacp.errors import ClosestPointError, ConfigurationError, GeometryError

log = logging.getLogger(__name__)


class Surface:
    """Base class; subclasses provide ``dim`` and the geometry methods."""

    dim: int = 2
    name: str = "surface"

    def signed_distance(self, x) -> np.ndarray:
        raise NotImplementedError

    def closest_point(self, x) -> np.ndarray:
        raise NotImplementedError

    def tube_factor(self, x) -> np.ndarray:
        """``1 + phi * kappa`` for curves; ``(1 + phi k1)(1 + phi k2)`` style
        factors are provided by the 3D subclasses."""
        raise NotImplementedError

    def exact(self, p) -> np.ndarray:
        """Manufactured solution evaluated at surface points ``p``."""
        raise NotImplementedError

    def forcing(self, p) -> np.ndarray:
        """Right-hand side ``m`` at surface points ``p``."""
        raise NotImplementedError

    def reaction(self, p) -> np.ndarray:
        """Reaction coefficient ``c`` at surface points ``p``."""
        return np.ones(len(p))

    def seed_mask(self, x, radius: float) -> np.ndarray:
        return np.abs(self.signed_distance(x)) <= radius

    def data_fields(self, x):
        """``(c, m)`` at arbitrary points, extended constantly along normals."""
        cp = self.closest_point(x)
        return self.reaction(cp), self.forcing(cp)


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[-1] != dim:
        raise ValueError(f"expected points with {dim} coordinates, got shape {x.shape}")
    return x


def round_box_hits(lo, hi, center, R):
    """Does the sphere ``|x - center| = R`` meet the closed boxes ``[lo, hi]``?"""
    lo = np.asarray(lo, dtype=float) - center
    hi = np.asarray(hi, dtype=float) - center
    near = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(lo * lo, hi * hi)).sum(axis=-1)
    far = np.maximum(lo * lo, hi * hi).sum(axis=-1)
    return (near <= R * R) & (far >= R * R)


class _RoundSurface(Surface):
    """Shared code for the origin-centred circle and sphere."""

    R = 1.0

    def __init__(self, R: float = 1.0):
        if R <= 0:
            raise GeometryError("radius must be positive")
        self.R = float(R)

    def signed_distance(self, x):
        x = _as_points(x, self.dim)
        return np.linalg.norm(x, axis=1) - self.R

    def closest_point(self, x):
        x = _as_points(x, self.dim)
        r = np.linalg.norm(x, axis=1)
        out = np.empty_like(x)
        centre = r == 0
        if centre.any():
            # every surface point is equidistant; take the zero-angle one
            log.info("closest point tie at the centre for %d point(s)", int(centre.sum()))
            out[centre] = 0.0
            out[centre, 0] = self.R
        out[~centre] = self.R * x[~centre] / r[~centre, None]
        return out

    def normal(self, x):
        return self.closest_point(x) / self.R

    def box_hits_units(self, lo, hi, grid):
        """Closed-box hit test in grid units, where node indices are exact."""
        center = -np.asarray(grid.lower) / grid.dx
        return round_box_hits(lo, hi, center, self.R / grid.dx)

    def tube_factor(self, x):
        return 1.0 + self.signed_distance(x) / self.R


class Circle(_RoundSurface):
    """Circle of radius ``R`` about the origin; ``gamma = sin t + sin 12 t``."""

    dim = 2
    name = "circle"

    def curvature(self, x):
        return np.full(len(_as_points(x, 2)), 1.0 / self.R)

    def sample(self, spacing: float) -> np.ndarray:
        n = max(16, int(np.ceil(2 * np.pi * self.R / spacing)))
        t = 2 * np.pi * np.arange(n) / n
        return self.R * np.stack([np.cos(t), np.sin(t)], axis=1)

    def exact(self, p):
        t = np.arctan2(p[:, 1], p[:, 0])
        return np.sin(t) + np.sin(12 * t)

    def forcing(self, p):
        # -gamma_ss + gamma with s = R t
        t = np.arctan2(p[:, 1], p[:, 0])
        R2 = self.R * self.R
        return (1 + 1 / R2) * np.sin(t) + (1 + 144 / R2) * np.sin(12 * t)


class Sphere(_RoundSurface):
    """Sphere of radius ``R``; the exact solution is a degree-5 spherical
    harmonic, ``(X^3 - 3 X Y^2)(9 Z^2 - 1)`` in unit-sphere coordinates."""

    dim = 3
    name = "sphere"

    def curvatures(self, x):
        n = len(_as_points(x, 3))
        k = np.full(n, 1.0 / self.R)
        return k, k.copy()

    def tangents(self, x):
        """Orthonormal tangent pair (longitude, colatitude directions)."""
        p = self.normal(x)
        t = np.arctan2(p[:, 1], p[:, 0])
        psi = np.arccos(np.clip(p[:, 2], -1.0, 1.0))
        e_t = np.stack([-np.sin(t), np.cos(t), np.zeros_like(t)], axis=1)
        e_p = np.stack([np.cos(psi) * np.cos(t), np.cos(psi) * np.sin(t), -np.sin(psi)], axis=1)
        return e_t, e_p

    def tube_factor(self, x):
        return (1.0 + self.signed_distance(x) / self.R) ** 2

    def exact(self, p):
        X, Y, Z = (p / self.R).T
        return (X**3 - 3 * X * Y**2) * (9 * Z**2 - 1)

    def forcing(self, p):
        # spherical harmonic of degree 5: Delta_s gamma = -30 gamma / R^2
        return (1 + 30 / self.R**2) * self.exact(p)


class Clover(Surface):
    """Star-shaped curve ``r(t) = g(t)(cos t, sin t)``,
    ``g(t) = 1 + amp cos(lobes t - phase)``.

    The default is the four-lobed clover ``g = 1 + 0.25 cos(4t - pi)`` with
    manufactured solution ``u(t) = sin t + sin 12 t`` in the parameter.
    """

    dim = 2
    name = "clover"

    def __init__(self, amp: float = 0.25, lobes: int = 4, phase: float = np.pi,
                 nscan: int = 256, tol: float = 1e-12, maxit: int = 100):
        self.amp = float(amp)
        self.lobes = int(lobes)
        self.phase = float(phase)
        self.nscan = int(nscan)
        self.tol = float(tol)
        self.maxit = int(maxit)

    # profile -----------------------------------------------------------
    def g(self, t):
        return 1.0 + self.amp * np.cos(self.lobes * t - self.phase)

    def g_t(self, t):
        return -self.amp * self.lobes * np.sin(self.lobes * t - self.phase)

    def g_tt(self, t):
        return -self.amp * self.lobes**2 * np.cos(self.lobes * t - self.phase)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        g = self.g(t)
        return np.stack([g * np.cos(t), g * np.sin(t)], axis=-1)

    def curvature_at(self, t):
        return clover_curvature(t, self)

    # closest point -----------------------------------------------------
    def closest_param(self, x) -> np.ndarray:
        x = _as_points(x, 2)
        theta, resid, status = kernels.clover_closest(
            x[:, 0], x[:, 1], self.amp, float(self.lobes), self.phase,
            self.nscan, self.tol, self.maxit)
        bad = status == kernels.NOT_CONVERGED
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ClosestPointError(
                f"clover closest point did not converge at {x[i]} (residual {resid[i]:.3e})",
                x[bad], theta[bad])
        ties = status == kernels.TIE
        if ties.any():
            log.info("%d equidistant closest points; smallest parameter kept", int(ties.sum()))
        return theta

    def closest_point(self, x):
        return self.point(self.closest_param(x))

    def signed_distance(self, x):
        x = _as_points(x, 2)
        d = np.linalg.norm(x - self.closest_point(x), axis=1)
        outside = np.linalg.norm(x, axis=1) > self.g(np.arctan2(x[:, 1], x[:, 0]))
        return np.where(outside, d, -d)

    def seed_mask(self, x, radius):
        x = _as_points(x, 2)
        radial = np.linalg.norm(x, axis=1) - self.g(np.arctan2(x[:, 1], x[:, 0]))
        # the radial gap overestimates the distance by at most 1/cos of the
        # normal-to-ray angle, which stays below 2 for this profile
        near = np.abs(radial) <= 2 * radius
        out = np.zeros(len(x), dtype=bool)
        if near.any():
            out[near] = np.abs(self.signed_distance(x[near])) <= radius
        return out

    def curvature(self, x):
        return clover_curvature(self.closest_param(x), self)

    def box_hits_units(self, lo, hi, grid, per_edge: int = 33):
        """Closed-box hit test, boxes given in grid units.

        The curve is star-shaped, so it meets a box iff the radial gap
        ``|p| - g(atan2 p)`` takes both signs (or zero) on the box boundary.
        The boundary is sampled with ``per_edge`` points per edge, which
        resolves the curve since its radius of curvature exceeds the box
        size on every grid this is used with.
        """
        if grid.dim != 2:
            raise GeometryError("the clover lives in 2D")
        lower = np.asarray(grid.lower)
        lo = lower + np.asarray(lo, dtype=float) * grid.dx
        hi = lower + np.asarray(hi, dtype=float) * grid.dx
        out = np.zeros(len(lo), dtype=bool)
        centre = 0.5 * (lo + hi)
        half = 0.5 * np.linalg.norm(hi - lo, axis=1)
        gap = np.linalg.norm(centre, axis=1) - self.g(np.arctan2(centre[:, 1], centre[:, 0]))
        cand = np.flatnonzero(np.abs(gap) <= 2.0 * half + 1e-12)
        if cand.size == 0:
            return out
        s = np.linspace(0.0, 1.0, per_edge)
        a, b = lo[cand], hi[cand]
        xs = [a[:, :1] + s * (b - a)[:, :1], np.repeat(b[:, :1], per_edge, 1),
              b[:, :1] - s * (b - a)[:, :1], np.repeat(a[:, :1], per_edge, 1)]
        ys = [np.repeat(a[:, 1:], per_edge, 1), a[:, 1:] + s * (b - a)[:, 1:],
              np.repeat(b[:, 1:], per_edge, 1), b[:, 1:] - s * (b - a)[:, 1:]]
        px = np.concatenate(xs, axis=1)
        py = np.concatenate(ys, axis=1)
        f = np.hypot(px, py) - self.g(np.arctan2(py, px))
        tol = 1e-12
        out[cand] = (f.min(axis=1) <= tol) & (f.max(axis=1) >= -tol)
        return out

    def tube_factor(self, x):
        x = _as_points(x, 2)
        t = self.closest_param(x)
        p = self.point(t)
        d = np.linalg.norm(x - p, axis=1)
        outside = np.linalg.norm(x, axis=1) > self.g(np.arctan2(x[:, 1], x[:, 0]))
        phi = np.where(outside, d, -d)
        return 1.0 + phi * clover_curvature(t, self)

    def sample(self, spacing: float) -> np.ndarray:
        speed = np.sqrt((1 + abs(self.amp)) ** 2 + (self.amp * self.lobes) ** 2)
        n = max(64, int(np.ceil(2 * np.pi * speed / spacing)))
        return self.point(2 * np.pi * np.arange(n) / n)

    # data --------------------------------------------------------------
    def _param(self, p):
        return np.mod(np.arctan2(p[:, 1], p[:, 0]), 2 * np.pi)

    def exact(self, p):
        t = self._param(p)
        return np.sin(t) + np.sin(12 * t)

    def forcing(self, p):
        t = self._param(p)
        u = np.sin(t) + np.sin(12 * t)
        u_t = np.cos(t) + 12 * np.cos(12 * t)
        u_tt = -np.sin(t) - 144 * np.sin(12 * t)
        return clover_forcing(t, u, u_t, u_tt, self)


def clover_curvature(t, clover: Clover | None = None) -> np.ndarray:
    """Signed curvature of a star curve at parameter ``t``.

    Positive where the curve is convex, negative in the dents.
    """
    c = clover or Clover()
    g, gt, gtt = c.g(t), c.g_t(t), c.g_tt(t)
    return (g * g - gtt * g + 2 * gt * gt) / (gt * gt + g * g) ** 1.5


def clover_forcing(t, u, u_t, u_tt, clover: Clover | None = None):
    """``u - Delta_s u`` for a parameter-space field ``u(t)`` on a star curve."""
    c = clover or Clover()
    g, gt, gtt = c.g(t), c.g_t(t), c.g_tt(t)
    s2 = gt * gt + g * g
    return -u_tt / s2 + (gt * gtt + g * gt) * u_t / s2**2 + u


def clover_closest_param(x, clover: Clover | None = None) -> np.ndarray:
    """Global minimiser ``t*`` of ``|x - r(t)|^2`` for each point."""
    return (clover or Clover()).closest_param(x)


def closest_point(surface: Surface, x) -> np.ndarray:
    return surface.closest_point(x)


def data_fields(surface: Surface, x):
    return surface.data_fields(x)


def make_surface(name: str) -> Surface:
    try:
        return {"circle": Circle, "clover": Clover, "sphere": Sphere}[name]()
    except KeyError:
        raise ConfigurationError(f"unknown surface {name!r}") from None
