"""Numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors them loop for
loop and the test suite checks that both agree.
"""
from math import comb

import numpy as np

OK = 0
TIE = 1
NOT_CONVERGED = 2
# closer than this to a node the barycentric terms would overflow
NODE_SNAP = 1e-100


def lagrange_weights(t, q):
    """Barycentric Lagrange weights on the equispaced nodes ``0..q``.

    Parameters
    ----------
    t : array_like, shape (n,)
        Evaluation positions in units of the node spacing.
    q : int
        Polynomial degree.

    Returns
    -------
    ndarray, shape (n, q + 1)
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    nodes = np.arange(q + 1, dtype=float)
    bary = np.array([(-1.0) ** j * comb(q, j) for j in range(q + 1)])
    diff = t[:, None] - nodes[None, :]
    hit = np.abs(diff) < NODE_SNAP
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = bary[None, :] / diff
        w = terms / terms.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    w[rows] = hit[rows].astype(float)
    return w


def stencil_entries(u, base, q, row_of, shape, mirror_axis0=False):
    """Tensor-product stencil entries for many targets.

    Parameters
    ----------
    u : ndarray, shape (n, dim)
        Target coordinates in grid units (``(p - lower) / dx``).
    base : ndarray of int, shape (n, dim)
        First stencil node per axis.
    q : int
        Degree; each target gets ``(q + 1) ** dim`` entries.
    row_of : ndarray of int
        Flat-node to band-row lookup, ``-1`` for nodes outside the band.
    shape : sequence of int
        Node counts per axis.
    mirror_axis0 : bool
        Fold negative axis-0 indices onto ``-i`` (even reflection).

    Returns
    -------
    rows, cols, vals : ndarray
    bad : int
        Index of the first target touching a non-band node, or -1.
    bad_node : int
        Flat index of the offending node, or -1.
    """
    u = np.asarray(u, dtype=float)
    base = np.asarray(base, dtype=np.int64)
    n, dim = u.shape
    k = q + 1
    weights = [lagrange_weights(u[:, d] - base[:, d], q) for d in range(dim)]
    offsets = np.indices((k,) * dim).reshape(dim, -1).T
    rows = np.repeat(np.arange(n, dtype=np.int64), k**dim)
    idx = base[:, None, :] + offsets[None, :, :]
    if mirror_axis0:
        idx[..., 0] = np.abs(idx[..., 0])
    vals = np.ones((n, k**dim))
    for d in range(dim):
        vals *= weights[d][:, offsets[:, d]]
    inside = np.ones(idx.shape[:2], dtype=bool)
    for d in range(dim):
        inside &= (idx[..., d] >= 0) & (idx[..., d] < shape[d])
    flat = np.zeros(idx.shape[:2], dtype=np.int64)
    for d in range(dim):
        flat = flat * shape[d] + np.clip(idx[..., d], 0, shape[d] - 1)
    cols = np.where(inside, row_of[flat], -1)
    miss = cols < 0
    if miss.any():
        t, j = np.argwhere(miss)[0]
        node = int(flat[t, j]) if inside[t, j] else -1
        return rows, cols.ravel(), vals.ravel(), int(t), node
    return rows, cols.ravel(), vals.ravel(), -1, -1


def _clover_terms(theta, amp, lobes, phase):
    c, s = np.cos(theta), np.sin(theta)
    arg = lobes * theta - phase
    g = 1.0 + amp * np.cos(arg)
    gt = -amp * lobes * np.sin(arg)
    gtt = -amp * lobes * lobes * np.cos(arg)
    rx, ry = g * c, g * s
    tx, ty = gt * c - g * s, gt * s + g * c
    ax = gtt * c - 2.0 * gt * s - g * c
    ay = gtt * s + 2.0 * gt * c - g * s
    return rx, ry, tx, ty, ax, ay


def _clover_refine(px, py, theta, h, amp, lobes, phase, tol, maxit):
    """Safeguarded Newton on the optimality condition (r - p) . r_theta = 0."""
    lo = theta - h
    hi = theta + h
    th = theta.copy()
    done = np.zeros(th.shape, dtype=bool)
    res = np.full(th.shape, np.inf)
    for _ in range(maxit):
        rx, ry, tx, ty, ax, ay = _clover_terms(th, amp, lobes, phase)
        dx, dy = rx - px, ry - py
        f = dx * tx + dy * ty
        fp = tx * tx + ty * ty + dx * ax + dy * ay
        res = np.where(done, res, np.abs(f))
        done |= np.abs(f) <= tol
        if done.all():
            break
        lo = np.where(f < 0, th, lo)
        hi = np.where(f > 0, th, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = th - f / fp
        bad = ~np.isfinite(step) | (fp <= 0) | (step <= lo) | (step >= hi)
        step = np.where(bad, 0.5 * (lo + hi), step)
        th = np.where(done, th, step)
    return th, res, done


def clover_closest(px, py, amp, lobes, phase, nscan, tol, maxit):
    """Global closest parameter on the star curve ``g(t)(cos t, sin t)``.

    Coarse scan over ``nscan`` uniform samples, then safeguarded Newton from
    the two best local minima of the sampled distance. Returns the parameter
    in ``[0, 2 pi)``, the optimality residual, and a status code
    (``OK``, ``TIE`` or ``NOT_CONVERGED``).
    """
    px = np.asarray(px, dtype=float).reshape(-1)
    py = np.asarray(py, dtype=float).reshape(-1)
    n = px.size
    two_pi = 2.0 * np.pi
    samples = two_pi * np.arange(nscan) / nscan
    h = two_pi / nscan
    theta = np.empty(n)
    resid = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    chunk = max(1, 400_000 // nscan)
    for s in range(0, n, chunk):
        sl = slice(s, min(n, s + chunk))
        x, y = px[sl, None], py[sl, None]
        rx, ry, *_ = _clover_terms(samples, amp, lobes, phase)
        d2 = (rx[None, :] - x) ** 2 + (ry[None, :] - y) ** 2
        locmin = (d2 <= np.roll(d2, 1, axis=1)) & (d2 <= np.roll(d2, -1, axis=1))
        masked = np.where(locmin, d2, np.inf)
        first = np.argmin(masked, axis=1)
        masked_2 = masked.copy()
        rr = np.arange(masked.shape[0])
        for off in (-1, 0, 1):
            masked_2[rr, (first + off) % nscan] = np.inf
        second = np.argmin(masked_2, axis=1)
        has_second = np.isfinite(masked_2[rr, second])
        xs, ys = px[sl], py[sl]
        t1, r1, ok1 = _clover_refine(xs, ys, samples[first], h, amp, lobes, phase, tol, maxit)
        t2, r2, ok2 = _clover_refine(xs, ys, samples[second], h, amp, lobes, phase, tol, maxit)
        d1 = _dist2(xs, ys, t1, amp, lobes, phase)
        d2b = np.where(has_second & ok2, _dist2(xs, ys, t2, amp, lobes, phase), np.inf)
        t1 = np.mod(t1, two_pi)
        t2 = np.mod(t2, two_pi)
        scale = np.maximum(1.0, d1)
        tie = np.abs(d1 - d2b) <= 1e-12 * scale
        use2 = (d2b < d1 - 1e-12 * scale) | (tie & (t2 < t1))
        th = np.where(use2, t2, t1)
        rs = np.where(use2, r2, r1)
        ok = np.where(use2, ok2, ok1)
        st = np.where(tie, TIE, OK)
        st = np.where(ok, st, NOT_CONVERGED)
        theta[sl], resid[sl], status[sl] = th, rs, st
    return theta, resid, status


def _dist2(px, py, theta, amp, lobes, phase):
    rx, ry, *_ = _clover_terms(theta, amp, lobes, phase)
    return (rx - px) ** 2 + (ry - py) ** 2
