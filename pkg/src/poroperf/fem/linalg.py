"""Dirichlet elimination and sparse linear solves."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConstraintError, SolverError

log = logging.getLogger(__name__)


def merge_constraints(dofs, values, n=None):
    """Deduplicate constraints; the same dof with two different values is an error."""
    dofs = np.asarray(dofs, dtype=np.int64).ravel()
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape).ravel()
    if n is not None and dofs.size and (dofs.min() < 0 or dofs.max() >= n):
        raise ConstraintError("constrained dof outside the system")
    order = np.argsort(dofs, kind="stable")
    d, v = dofs[order], values[order]
    same = np.r_[False, d[1:] == d[:-1]]
    if np.any(same & (v != np.r_[np.nan, v[:-1]])):
        bad = int(d[np.flatnonzero(same & (v != np.r_[np.nan, v[:-1]]))[0]])
        raise ConstraintError(f"dof {bad} constrained to conflicting values")
    return d[~same], v[~same]


def apply_dirichlet(A, b, dofs, values):
    """Symmetric elimination: move known columns to the rhs, identity rows/cols.

    Returns a new ``(A, b)``; inputs are not modified.
    """
    A = sp.csr_matrix(A, dtype=float)
    n = A.shape[0]
    dofs, values = merge_constraints(dofs, values, n)
    b = np.array(b, dtype=float)
    if dofs.size == 0:
        return A, b
    xk = np.zeros(n)
    xk[dofs] = values
    b -= A @ xk
    keep = np.ones(n)
    keep[dofs] = 0.0
    D = sp.diags(keep)
    A = (D @ A @ D).tocsr()
    A = A + sp.diags(1.0 - keep)
    b[dofs] = values
    return A.tocsr(), b


@dataclass(frozen=True)
class LinearSolverSettings:
    method: str = "auto"        # auto | direct | gmres
    rtol: float = 1e-10
    maxiter: int = 2000
    restart: int = 200
    drop_tol: float = 1e-6
    fill_factor: float = 30.0
    direct_limit: int = 600_000


def _equilibrate(A):
    """Symmetric diagonal scaling ``D A D`` with ``D = |diag A|^(-1/2)``.

    The mixed displacement/pressure blocks differ by many orders of
    magnitude; scaling keeps pivoting and the residual test meaningful.
    """
    d = np.abs(A.diagonal())
    d[d == 0] = 1.0
    return 1.0 / np.sqrt(d)


def linear_solve(A, b, settings: LinearSolverSettings = LinearSolverSettings()):
    """Solve ``A x = b`` and verify the equilibrated residual.

    With ``D`` from :func:`_equilibrate` the check is
    ``|D (A x - b)| <= rtol |D b|``.
    """
    A = sp.csc_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise SolverError("dimension mismatch")
    if np.linalg.norm(b) == 0:
        return np.zeros(n)
    dsc = _equilibrate(A)
    Ds = sp.diags(dsc)
    A = sp.csc_matrix(Ds @ A @ Ds)
    b = dsc * b
    nb = np.linalg.norm(b)
    method = settings.method
    if method == "auto":
        method = "direct" if n <= settings.direct_limit else "gmres"
    if method == "direct":
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}", 0) from None
        x = lu.solve(b)
        its = 1
        # iterative refinement
        for _ in range(3):
            r = b - A @ x
            if not np.all(np.isfinite(r)) or np.linalg.norm(r) <= 1e-2 * settings.rtol * nb:
                break
            x = x + lu.solve(r)
            its += 1
    elif method == "gmres":
        try:
            ilu = spla.spilu(A, drop_tol=settings.drop_tol, fill_factor=settings.fill_factor)
        except RuntimeError as exc:
            raise SolverError(f"incomplete factorization failed: {exc}", 0) from None
        M = spla.LinearOperator((n, n), ilu.solve)
        count = [0]

        def cb(_):
            count[0] += 1
        x, info = spla.gmres(A, b, M=M, rtol=settings.rtol, atol=0.0, restart=settings.restart,
                             maxiter=settings.maxiter, callback=cb, callback_type="pr_norm")
        its = count[0]
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})", its)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = np.linalg.norm(A @ x - b) / nb
    if not np.isfinite(res) or res > settings.rtol:
        raise SolverError(f"relative residual {res:.3e} above {settings.rtol:.1e}", its)
    return dsc * x
