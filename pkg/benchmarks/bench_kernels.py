"""Time the compiled and pure-Python kernel backends on realistic inputs.

Usage::

    python3 benchmarks/bench_kernels.py [--M 640] [--repeat 3]

Both backends receive identical arrays; the script checks that their
outputs agree before reporting timings.
"""
import argparse
import time

import numpy as np

from cacp import kernels
from cacp.grid import build_band, build_grid, stencil_base
from cacp.surface import make_surface


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--M", type=int, default=640)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the python backend is available")

    clover = make_surface("clover")
    grid = build_grid(2, -2.0, 2.0, args.M)
    band = build_band(grid, clover)
    pts = band.points
    cp = clover.closest_point(pts)
    u = grid.to_grid_units(cp)
    base = stencil_base(u, 3)
    t = np.ascontiguousarray((u - base).ravel())

    cases = {
        "lagrange_weights": lambda m: m.lagrange_weights(t, 3),
        "stencil_entries": lambda m: m.stencil_entries(u, base, 3, band.row_of, grid.shape, False),
        "clover_closest": lambda m: m.clover_closest(
            pts[:, 0].copy(), pts[:, 1].copy(), clover.amp, clover.lobes, clover.phase,
            clover.nscan, clover.tol, clover.maxit),
    }
    print(f"clover band at M={args.M}: {band.size} nodes")
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name in backends) + "     speedup")
    for name, fn in cases.items():
        times, outs = {}, {}
        for bname, mod in backends.items():
            times[bname], outs[bname] = _best(lambda: fn(mod), args.repeat)
        if len(outs) == 2:
            a, b = outs["python"], outs["cython"]
            a = a if isinstance(a, tuple) else (a,)
            b = b if isinstance(b, tuple) else (b,)
            for x, y in zip(a, b):
                if isinstance(x, np.ndarray):
                    np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-13)
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<18}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
              + f"  {speed:8.1f}x")


if __name__ == "__main__":
    main()
