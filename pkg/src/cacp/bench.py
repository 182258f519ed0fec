"""Convergence, comparison, sparsity and conditioning experiments.

Command line::

    bench convergence --surface circle --method cacp --M 40,80,160 --out results
    bench compare --surface clover --M 80,160,320,640 --out results
    bench nnz --surface sphere --out results
    bench condest --surface circle --out results

Every table is written as CSV whose first line is a ``#`` comment naming the
schema and its version. ``--dat`` adds whitespace separated copies for
gnuplot. The exit code is 0 only if every requested row completed.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from cacp.errors import CacpError, ConfigurationError

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SURFACES = ("circle", "clover", "sphere", "axisym-sphere", "axisym-ellipsoid")
METHODS = ("cp", "cacp", "both")
AXISYM = ("axisym-sphere", "axisym-ellipsoid")
MAX_3D_M = 160
CONVERGENCE_COLUMNS = ("M", "l2", "linf", "ratio2", "ratioInf", "nnz", "cond", "seconds")
RATIO_COLUMNS = ("M", "l2_cp", "linf_cp", "l2_cacp", "linf_cacp", "ratio2", "ratioInf")
NNZFIT_COLUMNS = ("method", "degree", "a", "b", "points")
DEFAULT_M = {
    "circle": (40, 80, 160, 320, 640),
    "clover": (80, 160, 320, 640),
    "sphere": (40, 80, 160),
    "axisym-sphere": (40, 80, 160),
    "axisym-ellipsoid": (80, 160, 320),
}


@dataclass(frozen=True)
class RunConfig:
    """One experiment: a surface, one or both methods and a list of grid sizes.

    ``M`` counts cells across the box ``[-2, 2]``; for the axisymmetric
    shapes the half-plane grid has ``M / 2`` cells across ``[0, 2]``.
    """

    surface: str
    method: str = "cacp"
    Ms: tuple[int, ...] = (40, 80, 160)
    out: Path | None = None
    coeff: str = "node"
    condest: bool = False
    timing: bool = True
    allow_large_3d: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.surface not in SURFACES:
            raise ConfigurationError(f"unknown surface {self.surface!r}; choose from {SURFACES}")
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.coeff not in ("node", "face"):
            raise ConfigurationError(f"unknown coefficient variant {self.coeff!r}")
        if not self.Ms:
            raise ConfigurationError("no grid sizes given")
        for M in self.Ms:
            if M < 40 or M % 4:
                raise ConfigurationError(f"M must be >= 40 and a multiple of 4, got {M}")
        if self.surface == "sphere" and max(self.Ms) > MAX_3D_M and not self.allow_large_3d:
            raise ConfigurationError(
                f"3D runs above M={MAX_3D_M} need --allow-large-3d (several GB of memory)")
        if self.surface in AXISYM and self.method != "cacp":
            raise ConfigurationError("axisymmetric shapes support the cacp method only")
        object.__setattr__(self, "Ms", tuple(sorted(set(int(m) for m in self.Ms))))

    @property
    def methods(self) -> tuple[str, ...]:
        return ("cp", "cacp") if self.method == "both" else (self.method,)


@dataclass
class Row:
    M: int
    l2: float = math.nan
    linf: float = math.nan
    ratio2: float = math.nan
    ratioInf: float = math.nan
    nnz: int | None = None
    cond: float | None = None
    seconds: float = math.nan
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ConvergenceReport:
    surface: str
    method: str
    coeff: str
    rows: list[Row] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def fill_ratios(self) -> None:
        """Ratios of consecutive errors; undefined on the first row."""
        for prev, row in zip(self.rows, self.rows[1:]):
            if prev.ok and row.ok:
                row.ratio2 = prev.l2 / row.l2 if row.l2 else math.inf
                row.ratioInf = prev.linf / row.linf if row.linf else math.inf

    def orders(self) -> list[tuple[float, float]]:
        """Observed orders ``log2`` of the ratios (rows 2 onward)."""
        return [(math.log2(r.ratio2), math.log2(r.ratioInf)) for r in self.rows[1:]
                if r.ok and np.isfinite(r.ratio2)]

    def write(self, path, timing: bool = True, dat: bool = False) -> None:
        header = (f"convergence v{SCHEMA_VERSION} surface={self.surface} "
                  f"method={self.method} coeff={self.coeff}")
        body = [[r.M, _fmt(r.l2), _fmt(r.linf), _fmt(r.ratio2), _fmt(r.ratioInf),
                 "" if r.nnz is None else r.nnz, _fmt(r.cond),
                 _fmt(r.seconds) if timing else ""] for r in self.rows]
        _write_table(path, header, CONVERGENCE_COLUMNS, body, dat)


@dataclass
class CompareReport:
    surface: str
    cp: ConvergenceReport
    cacp: ConvergenceReport

    def ratio_rows(self) -> list[tuple[int, float, float, float, float, float, float]]:
        rows = []
        for a, b in zip(self.cp.rows, self.cacp.rows):
            if a.ok and b.ok:
                rows.append((a.M, a.l2, a.linf, b.l2, b.linf, b.l2 / a.l2, b.linf / a.linf))
        return rows

    def finest(self) -> tuple[float, float]:
        """CACP/CP ratios at the finest grid both methods completed."""
        rows = self.ratio_rows()
        if not rows:
            return math.nan, math.nan
        return rows[-1][5], rows[-1][6]

    def asymptotic(self) -> tuple[float, float]:
        """Mean of the ratios at the two largest common grids."""
        rows = self.ratio_rows()[-2:]
        if not rows:
            return math.nan, math.nan
        return (float(np.mean([r[5] for r in rows])), float(np.mean([r[6] for r in rows])))

    def write(self, path, dat: bool = False) -> None:
        header = f"ratios v{SCHEMA_VERSION} surface={self.surface} cacp/cp"
        body = [[r[0], *(_fmt(v) for v in r[1:])] for r in self.ratio_rows()]
        _write_table(path, header, RATIO_COLUMNS, body, dat)


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "nan" if math.isnan(v) else f"{v:.9e}"


def _write_table(path, header, columns, body, dat) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(body)
    if dat:
        with open(path.with_suffix(".dat"), "w") as fh:
            fh.write(f"# {header}\n# {' '.join(columns)}\n")
            for line in body:
                fh.write(" ".join(str(v) if v != "" else "nan" for v in line) + "\n")


# ----------------------------------------------------------------------
# single runs

def _prepare(surface_name: str, M: int):
    from cacp.grid import build_band, build_grid
    from cacp.surface import make_surface

    surface = make_surface(surface_name)
    grid = build_grid(surface.dim, -2.0, 2.0, M)
    return grid, surface, build_band(grid, surface)


def run_one(surface_name: str, method: str, M: int, coeff: str = "node",
            condest: bool = False) -> Row:
    """Assemble, solve and measure one ``(surface, method, M)`` case.

    Library errors are caught and recorded on the row.
    """
    from cacp.assembly import assemble
    from cacp.solver import band_errors, solve

    t0 = time.perf_counter()
    try:
        if surface_name in AXISYM:
            from cacp.axisym import assemble_tension_axisym, axisym_band, HalfPlaneGrid, make_axisym

            shape = make_axisym(surface_name)
            ab = axisym_band(HalfPlaneGrid(M // 2), shape)
            system = assemble_tension_axisym(ab)
            surface = shape
        else:
            grid, surface, band = _prepare(surface_name, M)
            system = assemble(grid, surface, band, method, coeff)
        rep = solve(system, condest=condest)
        l2, linf = band_errors(system, rep.gamma, surface)
    except (CacpError, MemoryError) as exc:
        log.error("%s %s M=%d failed: %s", surface_name, method, M, exc)
        return Row(M, seconds=time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")
    return Row(M, l2, linf, nnz=system.nnz, cond=rep.cond,
               seconds=time.perf_counter() - t0)


def _run_rows(config: RunConfig, method: str) -> list[Row]:
    args = [(config.surface, method, M, config.coeff, config.condest) for M in config.Ms]
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            return list(pool.map(run_one, *zip(*args)))
    return [run_one(*a) for a in args]


def run_convergence(config: RunConfig) -> dict[str, ConvergenceReport]:
    """One :class:`ConvergenceReport` per requested method."""
    reports = {}
    for method in config.methods:
        rep = ConvergenceReport(config.surface, method, config.coeff, _run_rows(config, method))
        rep.fill_ratios()
        reports[method] = rep
    return reports


def compare_methods(config: RunConfig) -> CompareReport:
    """Run CP and CACP on identical bands and form the error ratios."""
    reps = run_convergence(replace(config, method="both"))
    return CompareReport(config.surface, reps["cp"], reps["cacp"])


def fit_nnz_growth(points, degree: int) -> tuple[float, float]:
    """Least-squares fit ``nnz = a M + b`` (degree 1) or ``a M^2 + b`` (degree 2).

    Parameters
    ----------
    points : sequence of (M, nnz)
    degree : {1, 2}

    Returns
    -------
    a, b : float
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if degree not in (1, 2):
        raise ConfigurationError(f"degree must be 1 or 2, got {degree}")
    if len(pts) < 3 or len(np.unique(pts[:, 0])) < 2:
        raise ConfigurationError(f"need at least 3 points with distinct M, got {len(pts)}")
    X = np.column_stack([pts[:, 0] ** degree, np.ones(len(pts))])
    (a, b), *_ = np.linalg.lstsq(X, pts[:, 1], rcond=None)
    return float(a), float(b)


def count_nnz(surface_name: str, method: str, M: int, coeff: str = "node") -> int:
    """Nonzeros of the assembled matrix without solving."""
    from cacp.assembly import assemble

    grid, surface, band = _prepare(surface_name, M)
    return assemble(grid, surface, band, method, coeff).nnz


# ----------------------------------------------------------------------
# command line

def _parse_ms(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid size list {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--surface", required=True, choices=SURFACES)
    common.add_argument("--M", type=_parse_ms, default=None,
                        help="comma separated grid sizes (default depends on the surface)")
    common.add_argument("--out", type=Path, default=Path("bench-out"))
    common.add_argument("--coeff-variant", choices=("node-avg", "face"), default="node-avg")
    common.add_argument("--no-timing", action="store_true",
                        help="leave the seconds column empty so reruns are byte identical")
    common.add_argument("--allow-large-3d", action="store_true",
                        help=f"permit 3D grids above M={MAX_3D_M}")
    common.add_argument("--dat", action="store_true", help="also write gnuplot .dat files")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    c = sub.add_parser("convergence", parents=[common], help="error table with ratios")
    c.add_argument("--method", choices=METHODS, default="cacp")
    c.add_argument("--condest", action="store_true", help="add 1-norm condition estimates")
    sub.add_parser("compare", parents=[common], help="CACP/CP error ratios")
    n = sub.add_parser("nnz", parents=[common], help="nonzero growth fits")
    n.add_argument("--method", choices=METHODS, default="both")
    sub.add_parser("condest", parents=[common], help="condition estimates for both methods")
    return p


def _config(args, **overrides) -> RunConfig:
    kw = dict(surface=args.surface, method=getattr(args, "method", "both"),
              Ms=args.M or DEFAULT_M[args.surface], out=args.out,
              coeff="face" if args.coeff_variant == "face" else "node",
              condest=getattr(args, "condest", False), timing=not args.no_timing,
              allow_large_3d=args.allow_large_3d, jobs=args.jobs)
    kw.update(overrides)
    return RunConfig(**kw)


def _print_report(rep: ConvergenceReport) -> None:
    print(f"{rep.surface} {rep.method}")
    for r in rep.rows:
        if r.ok:
            cond = "" if r.cond is None else f" cond {r.cond:.4e}"
            print(f"  M={r.M:4d} L2 {r.l2:.6e} Linf {r.linf:.6e} "
                  f"ratios {r.ratio2:.3f} {r.ratioInf:.3f} nnz {r.nnz}{cond}")
        else:
            print(f"  M={r.M:4d} FAILED {r.error}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except ConfigurationError as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    out = args.out
    timing = not args.no_timing
    if args.command == "convergence":
        cfg = _config(args)
        reports = run_convergence(cfg)
        for method, rep in reports.items():
            name = "convergence.csv" if len(reports) == 1 else f"convergence-{method}.csv"
            rep.write(out / name, timing, args.dat)
            _print_report(rep)
        return 0 if all(r.ok for r in reports.values()) else 1

    if args.command == "compare":
        cmp_ = compare_methods(_config(args, method="both"))
        cmp_.write(out / "ratios.csv", args.dat)
        for rep in (cmp_.cp, cmp_.cacp):
            rep.write(out / f"convergence-{rep.method}.csv", timing, args.dat)
        for row in cmp_.ratio_rows():
            print(f"M={row[0]:4d} L2 ratio {row[5]:.4f} Linf ratio {row[6]:.4f}")
        a2, ai = cmp_.asymptotic()
        print(f"asymptotic ratio L2 {a2:.4f} Linf {ai:.4f}")
        return 0 if cmp_.cp.ok and cmp_.cacp.ok else 1

    if args.command == "nnz":
        cfg = _config(args)
        if cfg.surface in AXISYM:
            raise ConfigurationError("nnz fits are defined for circle, clover and sphere")
        degree = 2 if cfg.surface == "sphere" else 1
        body, ok = [], True
        for method in cfg.methods:
            pts = []
            for M in cfg.Ms:
                try:
                    pts.append((M, count_nnz(cfg.surface, method, M, cfg.coeff)))
                except (CacpError, MemoryError) as exc:
                    print(f"  {method} M={M} FAILED {exc}")
                    ok = False
            a, b = fit_nnz_growth(pts, degree)
            print(f"{method}: nnz ~ {a:.4f} M^{degree} + {b:.1f} from {pts}")
            body.append([method, degree, _fmt(a), _fmt(b),
                         ";".join(f"{m}:{v}" for m, v in pts)])
        _write_table(out / "nnzfit.csv", f"nnzfit v{SCHEMA_VERSION} surface={cfg.surface}",
                     NNZFIT_COLUMNS, body, args.dat)
        return 0 if ok else 1

    if args.command == "condest":
        reports = run_convergence(_config(args, method="both", condest=True))
        body = []
        for a, b in zip(reports["cp"].rows, reports["cacp"].rows):
            body.append([a.M, _fmt(a.cond), _fmt(b.cond)])
            print(f"M={a.M:4d} cp {_fmt(a.cond)} cacp {_fmt(b.cond)}")
        _write_table(out / "condest.csv", f"condest v{SCHEMA_VERSION} surface={args.surface}",
                     ("M", "cp", "cacp"), body, args.dat)
        return 0 if all(r.ok for r in reports.values()) else 1
    raise ConfigurationError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
