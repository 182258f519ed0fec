# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``.

Same signatures and return conventions; see the numpy module for the
documentation of each routine.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, fabs, fmod, floor, M_PI, INFINITY, isfinite

cnp.import_array()

DEF MAXDIM = 3
DEF MAXK = 16
# closer than this to a node the barycentric terms would overflow
DEF NODE_SNAP = 1e-100

cdef int OK = 0
cdef int TIE = 1
cdef int NOT_CONVERGED = 2


cdef double _binom(int n, int k) noexcept nogil:
    cdef double r = 1.0
    cdef int i
    for i in range(1, k + 1):
        r = r * (n - k + i) / i
    return r


cdef void _weights(double t, int q, double* w) noexcept nogil:
    cdef int j
    cdef double s = 0.0, d, b
    cdef int k
    for j in range(q + 1):
        if fabs(t - j) < NODE_SNAP:
            for k in range(q + 1):
                w[k] = 0.0
            w[j] = 1.0
            return
    for j in range(q + 1):
        b = _binom(q, j)
        if j % 2 == 1:
            b = -b
        d = t - j
        w[j] = b / d
        s += w[j]
    for j in range(q + 1):
        w[j] = w[j] / s


def lagrange_weights(t, int q):
    cdef double[::1] tt = np.ascontiguousarray(t, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = tt.shape[0], i
    out = np.empty((n, q + 1), dtype=np.float64)
    cdef double[:, ::1] w = out
    for i in range(n):
        _weights(tt[i], q, &w[i, 0])
    return out


def stencil_entries(u, base, int q, row_of, shape, bint mirror_axis0=False):
    cdef double[:, ::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef long long[:, ::1] bb = np.ascontiguousarray(base, dtype=np.int64)
    cdef long long[::1] lookup = np.ascontiguousarray(row_of, dtype=np.int64)
    cdef Py_ssize_t n = uu.shape[0]
    cdef int dim = uu.shape[1]
    cdef int k = q + 1
    cdef long long per = 1
    cdef int d, a
    for d in range(dim):
        per *= k
    cdef long long shp[MAXDIM]
    for d in range(dim):
        shp[d] = shape[d]
    rows_a = np.empty(n * per, dtype=np.int64)
    cols_a = np.empty(n * per, dtype=np.int64)
    vals_a = np.empty(n * per, dtype=np.float64)
    cdef long long[::1] rows = rows_a
    cdef long long[::1] cols = cols_a
    cdef double[::1] vals = vals_a
    cdef double w[MAXDIM][MAXK]
    cdef int odo[MAXDIM]
    cdef Py_ssize_t t, pos = 0
    cdef long long flat, idx, r
    cdef double v
    cdef bint inside
    cdef long long bad = -1, bad_node = -1
    for t in range(n):
        for d in range(dim):
            _weights(uu[t, d] - bb[t, d], q, &w[d][0])
            odo[d] = 0
        for a in range(per):
            flat = 0
            v = 1.0
            inside = True
            for d in range(dim):
                idx = bb[t, d] + odo[d]
                if mirror_axis0 and d == 0 and idx < 0:
                    idx = -idx
                if idx < 0 or idx >= shp[d]:
                    inside = False
                    idx = 0 if idx < 0 else shp[d] - 1
                flat = flat * shp[d] + idx
                v *= w[d][odo[d]]
            r = lookup[flat] if inside else -1
            if r < 0 and bad < 0:
                bad = t
                bad_node = flat if inside else -1
            rows[pos] = t
            cols[pos] = r
            vals[pos] = v
            pos += 1
            d = dim - 1
            while d >= 0:
                odo[d] += 1
                if odo[d] < k:
                    break
                odo[d] = 0
                d -= 1
    return rows_a, cols_a, vals_a, int(bad), int(bad_node)


cdef inline void _terms(double th, double amp, double lobes, double phase,
                        double* out) noexcept nogil:
    cdef double c = cos(th), s = sin(th)
    cdef double arg = lobes * th - phase
    cdef double g = 1.0 + amp * cos(arg)
    cdef double gt = -amp * lobes * sin(arg)
    cdef double gtt = -amp * lobes * lobes * cos(arg)
    out[0] = g * c
    out[1] = g * s
    out[2] = gt * c - g * s
    out[3] = gt * s + g * c
    out[4] = gtt * c - 2.0 * gt * s - g * c
    out[5] = gtt * s + 2.0 * gt * c - g * s


cdef int _refine(double px, double py, double th0, double h, double amp,
                 double lobes, double phase, double tol, int maxit,
                 double* th_out, double* res_out) noexcept nogil:
    cdef double lo = th0 - h, hi = th0 + h, th = th0
    cdef double tr[6]
    cdef double dx, dy, f, fp, step
    cdef int it
    res_out[0] = INFINITY
    for it in range(maxit):
        _terms(th, amp, lobes, phase, tr)
        dx = tr[0] - px
        dy = tr[1] - py
        f = dx * tr[2] + dy * tr[3]
        fp = tr[2] * tr[2] + tr[3] * tr[3] + dx * tr[4] + dy * tr[5]
        res_out[0] = fabs(f)
        if fabs(f) <= tol:
            th_out[0] = th
            return 1
        if f < 0:
            lo = th
        elif f > 0:
            hi = th
        step = th - f / fp
        if (not isfinite(step)) or fp <= 0 or step <= lo or step >= hi:
            step = 0.5 * (lo + hi)
        th = step
    th_out[0] = th
    return 0


cdef inline double _d2(double px, double py, double th, double amp,
                       double lobes, double phase) noexcept nogil:
    cdef double tr[6]
    _terms(th, amp, lobes, phase, tr)
    return (tr[0] - px) * (tr[0] - px) + (tr[1] - py) * (tr[1] - py)


def clover_closest(px, py, double amp, double lobes, double phase, int nscan,
                   double tol, int maxit):
    cdef double[::1] xs = np.ascontiguousarray(px, dtype=np.float64).reshape(-1)
    cdef double[::1] ys = np.ascontiguousarray(py, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = xs.shape[0], i
    theta_a = np.empty(n)
    resid_a = np.empty(n)
    status_a = np.zeros(n, dtype=np.int64)
    cdef double[::1] theta = theta_a
    cdef double[::1] resid = resid_a
    cdef long long[::1] status = status_a
    cdef double two_pi = 2.0 * M_PI
    cdef double h = two_pi / nscan
    sx_a = np.empty(nscan)
    sy_a = np.empty(nscan)
    cdef double[::1] sx = sx_a
    cdef double[::1] sy = sy_a
    cdef double tr[6]
    cdef int k, km, kp, first, second
    for k in range(nscan):
        _terms(two_pi * k / nscan, amp, lobes, phase, tr)
        sx[k] = tr[0]
        sy[k] = tr[1]
    d2_a = np.empty(nscan)
    cdef double[::1] d2 = d2_a
    cdef double best1, best2, t1, t2, r1, r2, e1, e2, scale
    cdef int ok1, ok2
    cdef bint tie, use2
    with nogil:
        for i in range(n):
            for k in range(nscan):
                d2[k] = (sx[k] - xs[i]) ** 2 + (sy[k] - ys[i]) ** 2
            first = -1
            best1 = INFINITY
            for k in range(nscan):
                km = (k - 1 + nscan) % nscan
                kp = (k + 1) % nscan
                if d2[k] <= d2[km] and d2[k] <= d2[kp] and d2[k] < best1:
                    best1 = d2[k]
                    first = k
            second = -1
            best2 = INFINITY
            for k in range(nscan):
                if k == first or k == (first + 1) % nscan or k == (first - 1 + nscan) % nscan:
                    continue
                km = (k - 1 + nscan) % nscan
                kp = (k + 1) % nscan
                if d2[k] <= d2[km] and d2[k] <= d2[kp] and d2[k] < best2:
                    best2 = d2[k]
                    second = k
            ok1 = _refine(xs[i], ys[i], two_pi * first / nscan, h, amp, lobes,
                          phase, tol, maxit, &t1, &r1)
            e1 = _d2(xs[i], ys[i], t1, amp, lobes, phase)
            e2 = INFINITY
            ok2 = 0
            t2 = 0.0
            r2 = INFINITY
            if second >= 0:
                ok2 = _refine(xs[i], ys[i], two_pi * second / nscan, h, amp,
                              lobes, phase, tol, maxit, &t2, &r2)
                if ok2:
                    e2 = _d2(xs[i], ys[i], t2, amp, lobes, phase)
            t1 = fmod(t1, two_pi)
            if t1 < 0:
                t1 += two_pi
            t2 = fmod(t2, two_pi)
            if t2 < 0:
                t2 += two_pi
            scale = e1 if e1 > 1.0 else 1.0
            tie = fabs(e1 - e2) <= 1e-12 * scale
            use2 = (e2 < e1 - 1e-12 * scale) or (tie and t2 < t1)
            if use2:
                theta[i] = t2
                resid[i] = r2
                status[i] = (TIE if tie else OK) if ok2 else NOT_CONVERGED
            else:
                theta[i] = t1
                resid[i] = r1
                status[i] = (TIE if tie else OK) if ok1 else NOT_CONVERGED
    return theta_a, resid_a, status_a
