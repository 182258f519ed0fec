"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line to the acceptance log that is printed in
the terminal summary. Expensive solves are cached per (surface, method, M,
variant) and keep only scalar results.
"""
import gc
import itertools
import time

import numpy as np
import pytest

from cacp import assemble, build_band, build_grid, make_surface, solve
from cacp.axisym import AxisymShape, inextensibility_residual, solve_tension_axisym
from cacp.bench import fit_nnz_growth
from cacp.interp import build_interp_matrix
from cacp.solver import band_errors, side_condition_residual
from oracles import DenseCircle, inextensibility_unsimplified, permuted_dense

CIRCLE_ERRORS = {
    40: (6.529582e-02, 1.530827e-01),
    80: (1.536154e-02, 2.676026e-02),
    160: (3.756485e-03, 6.485326e-03),
    320: (9.423799e-04, 1.593578e-03),
    640: (2.358238e-04, 3.977083e-04),
}
CIRCLE_RATIOS = {80: (4.250604, 5.720524), 160: (4.089339, 4.126278),
                 320: (3.986168, 4.069663), 640: (3.996119, 4.006902)}
SPHERE_ERRORS = {
    40: (7.775448e-03, 2.057475e-02),
    80: (1.835869e-03, 4.032997e-03),
    160: (4.496780e-04, 9.728364e-04),
}
SPHERE_RATIOS = {80: (4.235295, 5.101603), 160: (4.082630, 4.145606)}
COND = {
    "circle": {80: (2.5643e4, 1.82546e4), 160: (1.01872e5, 7.53426e4),
               320: (4.09613e5, 3.10203e5)},
    "clover": {80: (2.75527e4, 2.46228e4), 160: (1.118065e5, 8.85923e4),
               320: (4.234336e5, 3.145863e5)},
    "sphere": {40: (1.8704e4, 9.5450e3), 80: (7.1974e4, 3.4255e4),
               160: (2.8856e5, 1.40423e5)},
}
MS = {"circle": (40, 80, 160, 320, 640), "clover": (80, 160, 320, 640),
      "sphere": (40, 80, 160)}

_cache = {}


def run(surface, method, M, coeff="node"):
    """Assemble and solve once; keep errors, nnz, side residual and cond."""
    key = (surface, method, M, coeff)
    if key not in _cache:
        s = make_surface(surface)
        g = build_grid(s.dim, -2, 2, M)
        t0 = time.perf_counter()
        sysm = assemble(g, s, build_band(g, s), method, coeff)
        rep = solve(sysm, condest=M in COND.get(surface, {}))
        seconds = time.perf_counter() - t0
        l2, linf = band_errors(sysm, rep.gamma, s)
        _cache[key] = dict(l2=l2, linf=linf, nnz=sysm.nnz, cond=rep.cond,
                           side=side_condition_residual(sysm, rep.gamma),
                           residual=rep.residual, seconds=seconds)
        del sysm, rep
        gc.collect()
    return _cache[key]


def report(log, label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    log.append(line)
    print(line)
    return ok


def _rel(a, b):
    return abs(a - b) / abs(b)


def _orders(errs):
    e = np.asarray(errs, dtype=float)
    return np.log2(e[:-1] / e[1:])


def test_c01_circle_reference_errors(acceptance_log):
    t0 = time.perf_counter()
    worst = 0.0
    for M, (l2, linf) in CIRCLE_ERRORS.items():
        r = run("circle", "cacp", M)
        worst = max(worst, _rel(r["l2"], l2), _rel(r["linf"], linf))
        assert r["residual"] <= 1e-10
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.02 and elapsed < 120
    report(acceptance_log, "1 circle CACP errors", ok,
           f"max relative deviation {worst:.2e} (tol 2e-2), {elapsed:.1f}s (limit 120s)")
    assert ok


def test_c02a_reference_ratios(acceptance_log):
    worst = 0.0
    for name, table, ratios in (("circle", CIRCLE_ERRORS, CIRCLE_RATIOS),
                                  ("sphere", SPHERE_ERRORS, SPHERE_RATIOS)):
        Ms = sorted(table)
        for prev, M in zip(Ms, Ms[1:]):
            a, b = run(name, "cacp", prev), run(name, "cacp", M)
            got = (a["l2"] / b["l2"], a["linf"] / b["linf"])
            worst = max(worst, *(abs(g - p) for g, p in zip(got, ratios[M])))
    ok = worst <= 0.3
    report(acceptance_log, "2a convergence ratios", ok,
           f"max |ratio - reference| {worst:.3f} (tol 0.3)")
    assert ok


def test_c02b_clover_order(acceptance_log):
    errs = [run("clover", "cacp", M) for M in MS["clover"]]
    o2 = _orders([e["l2"] for e in errs])
    oi = _orders([e["linf"] for e in errs])
    ok = bool(((o2 >= 1.8) & (o2 <= 2.2) & (oi >= 1.8) & (oi <= 2.2)).all())
    report(acceptance_log, "2b clover order 80->640", ok,
           f"L2 orders {np.round(o2, 2).tolist()}, Linf orders {np.round(oi, 2).tolist()} "
           "(band [1.8, 2.2])")
    assert ok


@pytest.mark.slow
def test_c03_cacp_cp_error_ratios(acceptance_log):
    targets = {"circle": ((0.62, 0.05), (0.68, 0.05)), "clover": ((0.65, 0.05), (0.8, 0.07)),
               "sphere": ((0.6, 0.05), (0.56, 0.05))}
    ok, parts = True, []
    for name, ((t2, d2), (ti, di)) in targets.items():
        M = MS[name][-1]
        cp, ca = run(name, "cp", M), run(name, "cacp", M)
        r2, ri = ca["l2"] / cp["l2"], ca["linf"] / cp["linf"]
        good = abs(r2 - t2) <= d2 and abs(ri - ti) <= di
        ok &= good
        parts.append(f"{name} M={M} {r2:.3f}/{ri:.3f} (want {t2}/{ti})")
    report(acceptance_log, "3 CACP/CP error ratios", ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_c04_nnz_growth(acceptance_log):
    targets = {"circle": (1, 177, 88), "clover": (1, 217, 109), "sphere": (2, 386, 118)}
    ok, parts = True, []
    for name, (deg, want_cp, want_cacp) in targets.items():
        for method, want in (("cp", want_cp), ("cacp", want_cacp)):
            a, _ = fit_nnz_growth([(M, run(name, method, M)["nnz"]) for M in MS[name]], deg)
            good = _rel(a, want) <= 0.10
            ok &= good
            parts.append(f"{name} {method} {a:.1f} (want {want})")
    report(acceptance_log, "4 nnz growth", ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_c05_sphere_reference_errors(acceptance_log):
    worst = max(max(_rel(run("sphere", "cacp", M)["l2"], l2),
                    _rel(run("sphere", "cacp", M)["linf"], linf))
                for M, (l2, linf) in SPHERE_ERRORS.items())
    ok = worst <= 0.02
    report(acceptance_log, "5 sphere CACP errors", ok,
           f"max relative deviation {worst:.2e} (tol 2e-2) for M=40,80,160")
    assert ok


@pytest.mark.slow
def test_c06_condition_estimates(acceptance_log):
    worst = 1.0
    for name, table in COND.items():
        for M, (cp_ref, cacp_ref) in table.items():
            for method, ref in (("cp", cp_ref), ("cacp", cacp_ref)):
                got = run(name, method, M)["cond"]
                worst = max(worst, got / ref, ref / got)
    ok = worst <= 3.0
    report(acceptance_log, "6 condition estimates", ok,
           f"worst factor {worst:.4f} (limit 3)")
    assert ok


@pytest.mark.slow
def test_c07_side_condition(acceptance_log):
    ok, parts = True, []
    for name in ("circle", "sphere"):
        res = [run(name, "cacp", M)["side"] for M in MS[name]]
        o = _orders(res)
        ok &= bool((o >= 1.8).all())
        parts.append(f"{name} orders {np.round(o, 2).tolist()}")
    report(acceptance_log, "7 side condition", ok, "; ".join(parts) + " (min 1.8)")
    assert ok


def test_c08_interpolation_exactness(acceptance_log):
    worst = 0.0
    for name, M in (("circle", 40), ("clover", 80), ("sphere", 40)):
        s = make_surface(name)
        g = build_grid(s.dim, -2, 2, M)
        band = build_band(g, s)
        cp = s.closest_point(band.points)
        for q in (1, 3):
            E = build_interp_matrix(g, band, cp, q)
            worst = max(worst, np.abs(E @ np.ones(band.size) - 1).max())
            if q == 1:
                continue
            for powers in itertools.product(range(4), repeat=s.dim):
                node = np.prod(band.points ** np.array(powers), axis=1)
                target = np.prod(cp ** np.array(powers), axis=1)
                worst = max(worst, np.abs(E @ node - target).max())
    ok = worst <= 1e-12
    report(acceptance_log, "8 interpolation exactness", ok, f"max deviation {worst:.2e} (tol 1e-12)")
    assert ok


def test_c09_axisym_suite(acceptance_log):
    sphere, ellipsoid = AxisymShape(1.0, 1.0), AxisymShape(0.5, 1.0)
    u_tau = lambda s: np.sin(s) * (1 + 0.4 * np.cos(s))
    u_n = lambda s: np.cos(2 * s)
    ident = []
    for shape in (sphere, ellipsoid):
        errs = []
        for n in (64, 128, 256):
            s, r = inextensibility_residual(shape, u_tau, u_n, n=n)
            errs.append(np.abs(r - inextensibility_unsimplified(shape.a, shape.c, u_tau, u_n,
                                                                  s, np.pi / n)).max())
        ident.append(_orders(errs).min())

    def translation(shape):
        q = lambda s: np.hypot(*shape.curve_d1(s))
        return (lambda s: shape.curve_d1(s)[1] / q(s), lambda s: -shape.curve_d1(s)[0] / q(s))

    rigid = []
    for shape in (sphere, ellipsoid):
        errs = [np.abs(inextensibility_residual(shape, *translation(shape), n=n)[1]).max()
                for n in (128, 256, 512)]
        rigid.append(_orders(errs).min())
    # delta sigma = 2 pi / 512 over the full meridian is pi / 256 on [0, pi]
    _, un = inextensibility_residual(sphere, np.zeros_like, np.ones_like, n=256)
    un_dev = np.abs(un / 2 - 1).max()
    tension = _orders([solve_tension_axisym(sphere, Mx).l2 for Mx in (20, 40, 80)])
    ok = min(ident) >= 1.8 and min(rigid) >= 1.8 and un_dev <= 0.01 and tension.min() >= 1.8
    report(acceptance_log, "9 axisym suite", ok,
           f"identity order {min(ident):.2f}, translation order {min(rigid):.2f}, "
           f"u=n deviation {un_dev:.1e}, tension orders {np.round(tension, 2).tolist()}")
    assert ok


def _oracle_match(M, method, coeff):
    s = make_surface("circle")
    g = build_grid(2, -2, 2, M)
    band = build_band(g, s)
    oracle = DenseCircle(M)
    if sorted(map(tuple, band.nodes.tolist())) != oracle.nodes:
        return np.inf
    dense, _ = oracle.cp_system() if method == "cp" else oracle.cacp_system(coeff)
    P, _ = permuted_dense(assemble(g, s, band, method, coeff).A, band.nodes, oracle)
    return np.abs(P - dense).max()


def test_c10_oracle_equivalence(acceptance_log):
    # node-averaged CACP is undefined at M=12 (1 + phi kappa = 0 at the centre
    # edge node), so it is checked at M=16; the face variant runs at M=12
    cases = [(12, "cp", "node"), (12, "cacp", "face"), (16, "cacp", "node")]
    devs = {c: _oracle_match(*c) for c in cases}
    ok = max(devs.values()) <= 1e-12
    report(acceptance_log, "10 dense oracle equivalence", ok,
           ", ".join(f"M={M} {m}/{c} {d:.1e}" for (M, m, c), d in devs.items()) + " (tol 1e-12)")
    assert ok
