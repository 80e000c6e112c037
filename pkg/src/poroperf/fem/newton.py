"""Monolithic Newton iteration with a backtracking line search."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import InadmissibleStateError, NonlinearSolverError
from .assembly import Assembler, PoroProblem
from .linalg import LinearSolverSettings, apply_dirichlet, linear_solve, merge_constraints

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NewtonSettings:
    atol: float = 1e-9
    rtol: float = 1e-8
    max_iter: int = 50
    max_halvings: int = 30
    linear: LinearSolverSettings = field(default_factory=LinearSolverSettings)


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    history: list       # scaled residual norm per iterate, starting with the initial one
    converged: bool = True


def residual_scales(asm: Assembler, problem: PoroProblem):
    """Momentum rows scale with ``E L^(d-1)``, pressure rows with the total inflow."""
    L = float(np.ptp(asm.mesh.points, axis=0).max())
    su = problem.material.E * L ** (asm.dim - 1)
    q = float(np.sum(np.abs(problem.load)))
    sp_ = q if q > 0 else problem.material.K * L ** (asm.dim - 2)
    return su, sp_


def scaled_norm(R, asm, scales, free):
    su, sp_ = scales
    Rf = np.where(free, R, 0.0)
    ru = np.linalg.norm(Rf[:asm.nU]) / su
    rp = np.linalg.norm(Rf[asm.nU:]) / sp_
    return float(np.hypot(ru, rp))


def newton_solve(problem: PoroProblem, x0=None, settings: NewtonSettings = NewtonSettings(),
                 assembler: Assembler | None = None) -> NewtonResult:
    asm = assembler or Assembler(problem.mesh)
    dofs, vals = merge_constraints(*problem.dirichlet(), n=asm.n)
    x = np.zeros(asm.n) if x0 is None else np.array(x0, dtype=float)
    x[dofs] = vals
    free = np.ones(asm.n, dtype=bool)
    free[dofs] = False
    scales = residual_scales(asm, problem)
    try:
        R = asm.residual(x, problem)
    except InadmissibleStateError as exc:
        raise NonlinearSolverError(f"initial state inadmissible: {exc}") from exc
    r0 = scaled_norm(R, asm, scales, free)
    hist = [r0]
    rn = r0
    it = 0
    while not (rn <= settings.atol or rn <= settings.rtol * r0):
        if it >= settings.max_iter:
            raise NonlinearSolverError(f"no convergence after {it} iterations", hist)
        A = asm.jacobian(x, problem)
        Ad, bd = apply_dirichlet(A, -R, dofs, np.zeros(dofs.size))
        dx = linear_solve(Ad, bd, settings.linear)
        t = 1.0
        for _ in range(settings.max_halvings):
            trial = x + t * dx
            try:
                Rt = asm.residual(trial, problem)
                rt = scaled_norm(Rt, asm, scales, free)
            except InadmissibleStateError:
                rt = np.inf
            if rt < rn or (rt <= settings.atol):
                break
            t *= 0.5
        else:
            raise NonlinearSolverError("line search failed", hist)
        x, R, rn = trial, Rt, rt
        it += 1
        hist.append(rn)
        log.debug("newton %d: |R| = %.3e (step %.3g)", it, rn, t)
    return NewtonResult(x=x, iterations=it, history=hist)
