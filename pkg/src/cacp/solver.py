"""Sparse solves, 1-norm condition estimates and error norms."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from cacp.errors import ConfigurationError, SingularMatrixError

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


def nested_dissection(A) -> np.ndarray:
    """Fill-reducing symmetric permutation from METIS on the pattern of A + A^T."""
    import pymetis

    S = (abs(A) + abs(A.T)).tocsr()
    S.setdiag(0)
    S.eliminate_zeros()
    if S.nnz == 0:
        return np.arange(A.shape[0])
    adj = pymetis.CSRAdjacency(S.indptr.astype(np.int64), S.indices.astype(np.int64))
    perm, _ = pymetis.nested_dissection(adj)
    return np.asarray(perm, dtype=np.int64)


DENSE_PIVOT_LIMIT = 4000


def _dense_zero_pivot(A):
    """Row of the first vanishing pivot of a partially pivoted dense LU.

    SuperLU does not say where it broke down, so small matrices are refactored
    densely to locate the pivot. Returns None above ``DENSE_PIVOT_LIMIT``.
    """
    from scipy.linalg import lu_factor

    if A.shape[0] > DENSE_PIVOT_LIMIT:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, _ = lu_factor(A.toarray(), check_finite=False)
    d = np.abs(np.diag(lu))
    small = np.flatnonzero(d <= np.finfo(float).eps * max(d.max(), 1.0) * A.shape[0])
    return int(small[0]) if small.size else None


class Factorization:
    """Sparse LU of a square matrix with solves against ``A`` and ``A^T``.

    Parameters
    ----------
    A : sparse matrix
    ordering : {"nd", "colamd"}
        ``"nd"`` permutes symmetrically with METIS nested dissection and
        factors with diagonal-preferring pivoting; ``"colamd"`` is SuperLU's
        own column ordering.
    """

    def __init__(self, A, ordering: str = "nd"):
        A = sp.csc_matrix(A)
        n, m = A.shape
        if n != m:
            raise ConfigurationError(f"matrix must be square, got {A.shape}")
        self.n = n
        self.ordering = ordering
        if ordering == "nd":
            self.perm = nested_dissection(A)
            Ap = A[self.perm][:, self.perm].tocsc()
            kwargs = dict(permc_spec="NATURAL", diag_pivot_thresh=0.01,
                          options=dict(SymmetricMode=True))
        elif ordering == "colamd":
            self.perm = None
            Ap = A
            kwargs = dict(permc_spec="COLAMD")
        else:
            raise ConfigurationError(f"unknown ordering {ordering!r}")
        try:
            self.lu = spla.splu(Ap, **kwargs)
        except RuntimeError as exc:
            text = str(exc)
            digits = "".join(ch if ch.isdigit() else " " for ch in text).split()
            pivot = int(digits[-1]) if digits else _dense_zero_pivot(A)
            raise SingularMatrixError(f"LU factorization failed: {text}", pivot) from exc
        diag = np.abs(self.lu.U.diagonal())
        if n and (diag == 0).any():
            raise SingularMatrixError("zero pivot in U", int(np.flatnonzero(diag == 0)[0]))

    @property
    def fill(self) -> int:
        return int(self.lu.L.nnz + self.lu.U.nnz)

    def solve(self, b, trans: bool = False) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        t = "T" if trans else "N"
        if self.perm is None:
            return self.lu.solve(b, trans=t)
        x = np.empty_like(b)
        x[self.perm] = self.lu.solve(b[self.perm], trans=t)
        return x


@dataclass
class SolveReport:
    gamma: np.ndarray
    residual: float
    cond: float | None = None
    method: str = "direct"
    iterations: int = 0
    fill: int | None = None


def relative_residual(A, x, b) -> float:
    r = A @ x - b
    nb = np.abs(b).max() if b.size else 0.0
    return float(np.abs(r).max() / nb) if nb > 0 else float(np.abs(r).max(initial=0.0))


def solve(system, method: str = "direct", ordering: str = "nd",
          condest: bool = False, rtol: float = 1e-12, maxiter: int = 2000) -> SolveReport:
    """Solve ``A gamma = b``.

    ``method="direct"`` uses a sparse LU (one step of iterative refinement
    if the residual is above ``1e-10``); ``"iterative"`` runs restarted GMRES
    preconditioned by an incomplete LU.
    """
    A = sp.csr_matrix(system.A)
    b = np.asarray(system.b, dtype=float)
    if A.shape[0] != b.size:
        raise ConfigurationError(f"rhs has {b.size} entries for a {A.shape} matrix")
    if method == "direct":
        fac = Factorization(A, ordering)
        x = fac.solve(b)
        res = relative_residual(A, x, b)
        if res > RESIDUAL_TOL:
            x = x + fac.solve(b - A @ x)
            res = relative_residual(A, x, b)
        if not np.isfinite(res):
            raise SingularMatrixError("solution is not finite", None)
        if res > RESIDUAL_TOL:
            log.warning("direct solve residual %.2e exceeds %.0e", res, RESIDUAL_TOL)
        cond = estimate_cond1(A, fac) if condest else None
        return SolveReport(x, res, cond, "direct", 0, fac.fill)
    if method == "iterative":
        Ac = A.tocsc()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sp.SparseEfficiencyWarning)
            ilu = spla.spilu(Ac, drop_tol=1e-5, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.gmres(A, b, M=M, rtol=rtol, restart=100, maxiter=maxiter,
                             callback=cb, callback_type="pr_norm")
        res = relative_residual(A, x, b)
        if info != 0:
            log.warning("GMRES stopped with info=%d, residual %.2e", info, res)
        cond = estimate_cond1(A) if condest else None
        return SolveReport(x, res, cond, "iterative", count[0], None)
    raise ConfigurationError(f"unknown solve method {method!r}")


def norm1(A) -> float:
    A = sp.csc_matrix(A)
    return float(np.abs(A).sum(axis=0).max()) if A.nnz else 0.0


def estimate_inverse_norm1(solve_fn, solve_t_fn, n: int, itmax: int = 5) -> float:
    """Hager-Higham estimate of ``||A^{-1}||_1``.

    ``solve_fn(v)`` must return ``A^{-1} v`` and ``solve_t_fn(v)`` returns
    ``A^{-T} v``. The result is a lower bound on the true norm.
    """
    if n == 0:
        return 0.0
    x = np.full(n, 1.0 / n)
    est = 0.0
    last_j = -1
    for _ in range(itmax):
        y = solve_fn(x)
        new = float(np.abs(y).sum())
        if new <= est:
            break
        est = new
        xi = np.where(y >= 0, 1.0, -1.0)
        z = solve_t_fn(xi)
        j = int(np.argmax(np.abs(z)))
        if np.abs(z[j]) <= z @ x or j == last_j:
            break
        last_j = j
        x = np.zeros(n)
        x[j] = 1.0
    # alternating-sign probe guards against the classical counterexamples
    alt = (-1.0) ** np.arange(n) * (1.0 + np.arange(n) / max(n - 1, 1))
    est = max(est, 2.0 * float(np.abs(solve_fn(alt)).sum()) / (3.0 * n))
    return est


def estimate_cond1(A, factorization: Factorization | None = None, itmax: int = 5) -> float:
    """Estimate ``||A||_1 ||A^{-1}||_1`` using an LU factorization."""
    A = sp.csc_matrix(A)
    n = A.shape[0]
    if n == 0:
        return 0.0
    fac = factorization or Factorization(A)
    inv = estimate_inverse_norm1(fac.solve, lambda v: fac.solve(v, trans=True), n, itmax)
    return norm1(A) * inv


def error_norms(gamma, exact, kind: str = "rms") -> tuple[float, float]:
    """Discrete ``(L2, Linf)`` errors over the band.

    ``kind="rms"`` is ``sqrt(sum e^2 / n)``; ``kind="outer"`` places the
    ``1/n`` outside the square root.
    """
    e = np.asarray(gamma, dtype=float) - np.asarray(exact, dtype=float)
    n = e.size
    if n == 0:
        return 0.0, 0.0
    s = float(np.sqrt(np.sum(e * e)))
    if kind == "rms":
        l2 = s / np.sqrt(n)
    elif kind == "outer":
        l2 = s / n
    else:
        raise ConfigurationError(f"unknown norm kind {kind!r}")
    return float(l2), float(np.abs(e).max())


def band_errors(system, gamma, surface, kind: str = "rms") -> tuple[float, float]:
    """Errors against ``gamma_exact(cp(x_k))`` for an assembled system."""
    return error_norms(gamma, surface.exact(system.cp), kind)


def side_condition_residual(system, gamma) -> float:
    """``max_k |gamma_k - (E3 gamma)_k|``: how far gamma is from constant along normals."""
    gamma = np.asarray(gamma, dtype=float)
    return float(np.abs(gamma - system.E3 @ gamma).max()) if gamma.size else 0.0
