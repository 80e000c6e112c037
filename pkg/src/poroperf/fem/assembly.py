"""Residual and consistent tangent of the steady finite-strain poroelastic system.

Unknowns: P1 displacement ``u`` (node-major, ``dof = node * dim + comp``)
followed by P2 pressure ``p``. With ``F = 1 + grad u`` and
``P = mu F + (lam ln J - mu - p J) F^-T`` the residual reads::

    R_u[a] = int P : grad N_a + int_outer beta(|u|) u N_a - int b N_a
    R_p[q] = int K grad p . C^-1 grad M_q - int theta M_q

Because ``F`` is constant on a P1 cell the momentum integrals are exact
with the cell mean of ``p``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ..errors import InadmissibleStateError
from ..mesh import Mesh
from .constitutive import Material, SpringBC, spring_stiffness, spring_stiffness_derivative
from .elements import barycentric_gradients, p2_dlam, p2_integrals, p2_values
from .quadrature import simplex_rule

_FACET_LOCAL = {2: np.array([(1, 2), (2, 0), (0, 1)]),
                3: np.array([(1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)])}


@dataclass
class PoroProblem:
    mesh: Mesh
    material: Material
    load: np.ndarray                         # P2 load vector (int theta M_q)
    spring: SpringBC | None = None
    u_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    u_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    p_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    p_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    body_force: Callable | None = None       # b(x) -> (n, dim), reference configuration
    spring_delta: float | None = None        # smoothing of |u| in the spring; default 1e-12 L

    def dirichlet(self):
        """Global constrained dofs and values (pressure dofs offset by the u block)."""
        nU = self.mesh.n_points * self.mesh.dim
        dofs = np.r_[np.asarray(self.u_dofs, dtype=np.int64), nU + np.asarray(self.p_dofs, dtype=np.int64)]
        vals = np.r_[np.broadcast_to(np.asarray(self.u_values, dtype=float), np.shape(self.u_dofs)),
                     np.broadcast_to(np.asarray(self.p_values, dtype=float), np.shape(self.p_dofs))]
        return dofs, vals


class Assembler:
    """Precomputed geometry, quadrature and sparsity for one mesh."""

    def __init__(self, mesh: Mesh, degree: int = 4):
        self.mesh = mesh
        d = self.dim = mesh.dim
        self.nV = mesh.n_points
        self.nU = self.nV * d
        self.nP = mesh.n_p2
        self.n = self.nU + self.nP
        self.G, self.vol = barycentric_gradients(mesh.points, mesh.cells)
        if np.any(self.vol <= 0):
            raise InadmissibleStateError("mesh has non-positive cells", int(np.argmin(self.vol)))
        self.lam_q, self.w_q = simplex_rule(d, degree)
        self.B = p2_dlam(self.lam_q, d)                       # (nq, nloc, d+1)
        self.N2 = p2_values(self.lam_q, d)                     # (nq, nloc)
        self.H = np.einsum("k,kqm,krn->qrmn", self.w_q, self.B, self.B)
        self.I2 = p2_integrals(d)
        self.cells = mesh.cells
        self.cells2 = mesh.cells_p2
        self.nloc = self.cells2.shape[1]
        udofs = (self.cells[:, :, None] * d + np.arange(d)).reshape(len(self.cells), -1)
        self.edofs = np.hstack([udofs, self.nU + self.cells2])
        self.ne = self.edofs.shape[1]
        self._outer = None
        self._pattern = None

    # -- helpers -----------------------------------------------------------
    def split(self, x):
        x = np.asarray(x, dtype=float)
        return x[:self.nU].reshape(self.nV, self.dim), x[self.nU:]

    def join(self, U, P):
        return np.r_[np.asarray(U, dtype=float).ravel(), np.asarray(P, dtype=float)]

    def quadrature_points(self):
        """Reference coordinates of cell quadrature points ``(C, nq, dim)``."""
        x = self.mesh.points[self.cells]
        return np.einsum("km,cmi->cki", self.lam_q, x)

    def kinematics(self, U):
        F = np.eye(self.dim) + np.einsum("cai,caJ->ciJ", U[self.cells], self.G)
        J = np.linalg.det(F)
        bad = np.flatnonzero(~(J > 0))
        if bad.size:
            raise InadmissibleStateError("det F <= 0", int(bad[0]))
        Finv = np.linalg.inv(F)
        FiT = np.swapaxes(Finv, 1, 2)
        Cinv = Finv @ FiT
        return F, J, FiT, Cinv

    def outer_facets(self):
        """Outer-tagged facets: vertices, owner cell, facet measure, outward normal."""
        if self._outer is None:
            m = self.mesh
            idx = m.facets_with_tag("outer")
            fv = m.facets[idx] if idx.size else np.zeros((0, self.dim), dtype=np.int64)
            x = m.points[fv]
            if self.dim == 2:
                meas = np.linalg.norm(x[:, 1] - x[:, 0], axis=1) if idx.size else np.zeros(0)
            else:
                meas = 0.5 * np.linalg.norm(np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), axis=1) \
                    if idx.size else np.zeros(0)
            owner = m.facet_owner()[idx] if idx.size else np.zeros(0, dtype=np.int64)
            # local positions of the facet vertices inside the owner cell
            loc = np.zeros(fv.shape, dtype=np.int64)
            opp = np.zeros(fv.shape[0], dtype=np.int64)
            if idx.size:
                cv = self.cells[owner]
                for j in range(self.dim):
                    loc[:, j] = np.argmax(cv == fv[:, j:j + 1], axis=1)
                opp = (self.dim * (self.dim + 1) // 2) - loc.sum(axis=1)
                nrm = -self.G[owner, opp]
                nrm /= np.linalg.norm(nrm, axis=1)[:, None]
            else:
                nrm = np.zeros((0, self.dim))
            lam_f, w_f = simplex_rule(self.dim - 1, 4)
            self._outer = {"fv": fv, "meas": meas, "owner": owner, "loc": loc, "normal": nrm,
                           "lam": lam_f, "w": w_f}
        return self._outer

    def pattern(self):
        """CSR structure of the Jacobian plus scatter maps for cells and facets."""
        if self._pattern is None:
            n = self.n
            ck = (self.edofs[:, :, None] * n + self.edofs[:, None, :]).ravel()
            fv = self.outer_facets()["fv"]
            d = self.dim
            fdofs = (fv[:, :, None] * d + np.arange(d)).reshape(len(fv), -1)
            fk = (fdofs[:, :, None] * n + fdofs[:, None, :]).ravel()
            keys, inv = np.unique(np.r_[ck, fk], return_inverse=True)
            rows = keys // n
            cols = (keys % n).astype(np.int32)
            indptr = np.r_[0, np.cumsum(np.bincount(rows, minlength=n))].astype(np.int64)
            self._pattern = {"indices": cols, "indptr": indptr, "nnz": keys.size,
                             "cell_map": inv[:ck.size], "facet_map": inv[ck.size:], "fdofs": fdofs}
        return self._pattern

    # -- loads ---------------------------------------------------------------
    def load_from_qp(self, theta_qp):
        """P2 load ``int theta M_q`` from values at cell quadrature points ``(C, nq)``."""
        local = self.vol[:, None] * np.einsum("k,ck,kq->cq", self.w_q, theta_qp, self.N2)
        return np.bincount(self.cells2.ravel(), weights=local.ravel(), minlength=self.nP)

    def p2_mass_lumped_integrals(self):
        """``int M_q`` for every P2 node."""
        local = self.vol[:, None] * self.I2[None, :]
        return np.bincount(self.cells2.ravel(), weights=local.ravel(), minlength=self.nP)

    # -- residual ------------------------------------------------------------
    def residual(self, x, problem: PoroProblem):
        U, P = self.split(x)
        mat = problem.material
        lam, mu, K = mat.lam, mat.mu, mat.K
        F, J, FiT, Cinv = self.kinematics(U)
        Pc = P[self.cells2]
        pint = self.vol * (Pc @ self.I2)
        lnJ = np.log(J)
        Sint = (self.vol[:, None, None] * (mu * F + (lam * lnJ - mu)[:, None, None] * FiT)
                - (pint * J)[:, None, None] * FiT)
        Ru = np.einsum("ciJ,caJ->cai", Sint, self.G)
        if problem.body_force is not None:
            xq = self.quadrature_points()
            b = np.asarray(problem.body_force(xq.reshape(-1, self.dim))).reshape(xq.shape)
            Ru -= self.vol[:, None, None] * np.einsum("k,ka,cki->cai", self.w_q, self.lam_q, b)
        A = self._pressure_stiffness(Cinv)
        Rp = K * np.einsum("cqr,cr->cq", A, Pc)
        R = np.bincount(self.edofs.ravel(), weights=np.hstack([Ru.reshape(len(Ru), -1), Rp]).ravel(),
                        minlength=self.n)
        R[self.nU:] -= problem.load
        if problem.spring is not None:
            R += self._spring(U, problem, tangent=False)
        return R

    def _pressure_stiffness(self, Cinv):
        Gt = np.einsum("cmJ,cJL,cnL->cmn", self.G, Cinv, self.G)
        return self.vol[:, None, None] * np.einsum("qrmn,cmn->cqr", self.H, Gt)

    def _spring(self, U, problem, tangent):
        of = self.outer_facets()
        fv = of["fv"]
        d = self.dim
        if fv.shape[0] == 0:
            return (np.zeros(self.n), np.zeros((0, d * d, d * d))) if tangent else np.zeros(self.n)
        bc = problem.spring
        delta = problem.spring_delta
        if delta is None:
            ext = np.ptp(self.mesh.points, axis=0).max()
            delta = 1e-12 * ext
        lam_f, w_f = of["lam"], of["w"]
        uq = np.einsum("ka,fai->fki", lam_f, U[fv])              # (F, nq, d)
        ms = np.sqrt(np.einsum("fki,fki->fk", uq, uq) + delta * delta)
        beta = spring_stiffness(ms, bc)
        t = beta[..., None] * uq
        wm = of["meas"][:, None] * w_f[None, :]
        Rf = np.einsum("fk,ka,fki->fai", wm, lam_f, t).reshape(len(fv), -1)
        fd = (fv[:, :, None] * d + np.arange(d)).reshape(len(fv), -1)
        R = np.bincount(fd.ravel(), weights=Rf.ravel(), minlength=self.n)
        if not tangent:
            return R
        db = spring_stiffness_derivative(ms, bc)
        T = beta[..., None, None] * np.eye(d) + (db / ms)[..., None, None] * uq[..., :, None] * uq[..., None, :]
        Kf = np.einsum("fk,ka,kb,fkij->faibj", wm, lam_f, lam_f, T).reshape(len(fv), d * d, d * d)
        return R, Kf

    # -- tangent -------------------------------------------------------------
    def jacobian(self, x, problem: PoroProblem) -> sp.csr_matrix:
        U, P = self.split(x)
        mat = problem.material
        lam, mu, K = mat.lam, mat.mu, mat.K
        d, nv = self.dim, self.dim + 1
        F, J, FiT, Cinv = self.kinematics(U)
        Pc = P[self.cells2]
        vol = self.vol
        pbar = Pc @ self.I2
        lnJ = np.log(J)
        a = lam * lnJ - mu - pbar * J
        GF = np.einsum("ciJ,caJ->cai", FiT, self.G)               # F^-T grad N_a
        GG = np.einsum("caJ,cbJ->cab", self.G, self.G)
        C = len(vol)
        Kuu = (mu * GG[:, :, None, :, None] * np.eye(d)[None, None, :, None, :]
               + (lam - pbar * J)[:, None, None, None, None] * GF[:, :, :, None, None] * GF[:, None, None, :, :]
               - a[:, None, None, None, None] * np.einsum("cbi,cak->caibk", GF, GF))
        Kuu *= vol[:, None, None, None, None]
        Kup = -(J * vol)[:, None, None, None] * GF[:, :, :, None] * self.I2[None, None, None, :]
        # pressure gradient in barycentric space at the quadrature points
        gl = np.einsum("kRn,cR->ckn", self.B, Pc)
        Z = np.einsum("k,kqm,ckn->cqmn", self.w_q, self.B, gl)
        W = vol[:, None, None, None] * np.einsum("cmJ,cqmn,cnL->cqJL", self.G, Z, self.G)
        S = W + np.swapaxes(W, 2, 3)
        Kpu = -K * np.einsum("ckJ,cqJL,cLM,cbM->cqbk", FiT, S, Cinv, self.G)
        Kpp = K * self._pressure_stiffness(Cinv)
        nu_ = nv * d
        E = np.empty((C, self.ne, self.ne))
        E[:, :nu_, :nu_] = Kuu.reshape(C, nu_, nu_)
        E[:, :nu_, nu_:] = Kup.reshape(C, nu_, self.nloc)
        E[:, nu_:, :nu_] = Kpu.reshape(C, self.nloc, nu_)
        E[:, nu_:, nu_:] = Kpp
        pat = self.pattern()
        vals = E.ravel()
        if problem.spring is not None and self.outer_facets()["fv"].shape[0]:
            _, Kf = self._spring(U, problem, tangent=True)
            data = np.bincount(np.r_[pat["cell_map"], pat["facet_map"]], weights=np.r_[vals, Kf.ravel()],
                               minlength=pat["nnz"])
        else:
            data = np.bincount(pat["cell_map"], weights=vals, minlength=pat["nnz"])
        return sp.csr_matrix((data, pat["indices"], pat["indptr"]), shape=(self.n, self.n))

    # -- error norms -----------------------------------------------------------
    def l2_error_p2(self, P, exact) -> float:
        """``|p_h - p|_L2`` for a P2 field against a callable ``exact(x)``."""
        xq = self.quadrature_points()
        ph = np.einsum("kq,cq->ck", self.N2, np.asarray(P)[self.cells2])
        pe = np.asarray(exact(xq.reshape(-1, self.dim))).reshape(ph.shape)
        return float(np.sqrt(np.sum(self.vol[:, None] * self.w_q[None, :] * (ph - pe) ** 2)))

    def l2_error_p1(self, U, exact) -> float:
        """``|u_h - u|_L2`` for a vector P1 field."""
        xq = self.quadrature_points()
        uh = np.einsum("ka,cai->cki", self.lam_q, np.asarray(U)[self.cells])
        ue = np.asarray(exact(xq.reshape(-1, self.dim))).reshape(uh.shape)
        return float(np.sqrt(np.sum(self.vol[:, None] * self.w_q[None, :] * np.sum((uh - ue) ** 2, axis=2))))

    # -- post-processing -----------------------------------------------------
    def cell_jacobians(self, U):
        return self.kinematics(U)[1]

    def darcy_velocity(self, x, material: Material):
        """Cell-averaged ``w = -K F^-T grad_0 p`` ``(C, dim)``."""
        U, P = self.split(x)
        _, _, FiT, _ = self.kinematics(U)
        gl = np.einsum("kRn,cR->ckn", self.B, P[self.cells2])
        g = np.einsum("k,ckn,cnJ->cJ", self.w_q, gl, self.G)
        return -material.K * np.einsum("ciJ,cJ->ci", FiT, g)

    def outer_flux(self, x, material: Material):
        """Net outward Darcy flux ``int -K C^-1 grad_0 p . N`` over outer facets."""
        of = self.outer_facets()
        if of["fv"].shape[0] == 0:
            return 0.0
        U, P = self.split(x)
        _, _, _, Cinv = self.kinematics(U)
        owner, loc = of["owner"], of["loc"]
        lam_f, w_f = of["lam"], of["w"]
        nf, nq = len(owner), len(w_f)
        lam_c = np.zeros((nf, nq, self.dim + 1))
        for j in range(self.dim):
            lam_c[np.arange(nf)[:, None], np.arange(nq)[None, :], loc[:, j:j + 1]] = lam_f[None, :, j]
        B = p2_dlam(lam_c.reshape(-1, self.dim + 1), self.dim).reshape(nf, nq, self.nloc, self.dim + 1)
        gl = np.einsum("fkRn,fR->fkn", B, P[self.cells2[owner]])
        g = np.einsum("fkn,fnJ->fkJ", gl, self.G[owner])
        flux = -material.K * np.einsum("fkJ,fJL,fL->fk", g, Cinv[owner], of["normal"])
        return float(np.sum(of["meas"][:, None] * w_f[None, :] * flux))


def assemble_residual(x, problem: PoroProblem, asm: Assembler | None = None) -> np.ndarray:
    """Residual of the coupled system at the stacked state ``x = [u, p]``."""
    return (asm or Assembler(problem.mesh)).residual(x, problem)


def assemble_jacobian(x, problem: PoroProblem, asm: Assembler | None = None):
    return (asm or Assembler(problem.mesh)).jacobian(x, problem)


def darcy_velocity(x, mesh, material: Material, asm: Assembler | None = None) -> np.ndarray:
    """Per-cell Darcy velocity ``w = -K C^-1 grad p`` (reference frame)."""
    return (asm or Assembler(mesh)).darcy_velocity(x, material)
