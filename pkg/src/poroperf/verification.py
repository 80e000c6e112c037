"""Manufactured-solution studies for the discrete Darcy and elasticity blocks."""
from __future__ import annotations

import math

import numpy as np

from .fem.assembly import Assembler, PoroProblem
from .fem.constitutive import Material
from .fem.newton import NewtonSettings, newton_solve
from .mesh import gen_rect_mesh


def observed_orders(h, err) -> np.ndarray:
    h, err = np.asarray(h, dtype=float), np.asarray(err, dtype=float)
    return np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])


def _all_u_dofs(mesh):
    return np.arange(mesh.n_points * mesh.dim)


def _boundary_p2_nodes(mesh):
    return np.unique(mesh.facets_p2())


def solve_darcy_frozen(mesh, exact, source, material: Material = Material()):
    """P2 Darcy solve with ``u = 0`` frozen and ``p = exact`` on the boundary.

    ``source(x)`` is the volumetric inflow ``theta = -K lap p``.
    """
    asm = Assembler(mesh)
    xq = asm.quadrature_points()
    load = asm.load_from_qp(np.asarray(source(xq.reshape(-1, mesh.dim))).reshape(xq.shape[:2]))
    bn = _boundary_p2_nodes(mesh)
    prob = PoroProblem(mesh, material, load, u_dofs=_all_u_dofs(mesh), u_values=0.0,
                       p_dofs=bn, p_values=np.asarray(exact(mesh.points_p2[bn])))
    res = newton_solve(prob, settings=NewtonSettings(atol=1e-13, rtol=1e-14), assembler=asm)
    return asm, res


def darcy_convergence(ns=(4, 8, 16, 32), material: Material = Material()):
    """L2 errors of ``p = sin(pi x) sin(pi y) + exp(x) y`` on the unit square."""
    K = material.K

    def exact(x):
        return np.sin(math.pi * x[:, 0]) * np.sin(math.pi * x[:, 1]) + np.exp(x[:, 0]) * x[:, 1]

    def source(x):
        lap = -2 * math.pi**2 * np.sin(math.pi * x[:, 0]) * np.sin(math.pi * x[:, 1]) + np.exp(x[:, 0]) * x[:, 1]
        return -K * lap

    h, err = [], []
    for n in ns:
        m = gen_rect_mesh(n, n)
        asm, res = solve_darcy_frozen(m, exact, source, material)
        h.append(1.0 / n)
        err.append(asm.l2_error_p2(asm.split(res.x)[1], exact))
    return np.array(h), np.array(err)


def elasticity_convergence(ns=(4, 8, 16, 32), amp=1e-6, material: Material = Material()):
    """L2 errors of a small manufactured displacement with ``p = 0`` pinned.

    The body force is the linear-elastic one; the finite-strain model
    differs from it by ``O(amp^2)``, far below the discretization error.
    """
    lam, mu = material.lam, material.mu
    pi = math.pi

    def exact(x):
        s = np.sin(pi * x[:, 0]) * np.sin(pi * x[:, 1])
        return amp * np.stack([s, s * x[:, 0]], axis=1)

    def body(x):
        X, Y = x[:, 0], x[:, 1]
        sx, cx, sy, cy = np.sin(pi * X), np.cos(pi * X), np.sin(pi * Y), np.cos(pi * Y)
        u1 = sx * sy
        u2 = X * sx * sy
        lap1 = -2 * pi**2 * u1
        lap2 = 2 * pi * cx * sy - 2 * pi**2 * u2
        # div u = pi cx sy + pi X sx cy
        d_dx = -pi**2 * sx * sy + pi * sx * cy + pi**2 * X * cx * cy
        d_dy = pi**2 * cx * cy - pi**2 * X * sx * sy
        b1 = -(mu * lap1 + (lam + mu) * d_dx)
        b2 = -(mu * lap2 + (lam + mu) * d_dy)
        return amp * np.stack([b1, b2], axis=1)

    h, err = [], []
    for n in ns:
        m = gen_rect_mesh(n, n)
        asm = Assembler(m)
        bv = np.unique(m.facets)
        udofs = (bv[:, None] * 2 + np.arange(2)).ravel()
        prob = PoroProblem(m, material, np.zeros(m.n_p2), u_dofs=udofs, u_values=exact(m.points[bv]).ravel(),
                           p_dofs=np.arange(m.n_p2), p_values=0.0, body_force=body)
        res = newton_solve(prob, settings=NewtonSettings(atol=1e-14, rtol=1e-12), assembler=asm)
        h.append(1.0 / n)
        err.append(asm.l2_error_p1(asm.split(res.x)[0], exact))
    return np.array(h), np.array(err)


def quadratic_reproduction(material: Material = Material(), n: int = 3) -> float:
    """Max nodal error when the exact pressure is a full quadratic."""
    K = material.K

    def exact(x):
        X, Y = x[:, 0], x[:, 1]
        return 1.0 + 2 * X - Y + 0.5 * X * X + 0.75 * X * Y - 1.25 * Y * Y

    def source(x):
        return -K * (1.0 - 2.5) * np.ones(x.shape[0])

    m = gen_rect_mesh(n, n)
    asm, res = solve_darcy_frozen(m, exact, source, material)
    P = asm.split(res.x)[1]
    return float(np.max(np.abs(P - exact(m.points_p2))))


def jacobian_fd_errors(asm: Assembler, problem: PoroProblem, x, directions, h=1e-6):
    """Relative errors ``|J d - (R(x + e d) - R(x - e d)) / 2e| / |J d|`` per direction.

    ``e`` is ``h`` times the ratio of state and direction norms.
    """
    A = asm.jacobian(x, problem)
    out = []
    for d in directions:
        eps = h * max(np.linalg.norm(x), 1e-300) / np.linalg.norm(d)
        fd = (asm.residual(x + eps * d, problem) - asm.residual(x - eps * d, problem)) / (2 * eps)
        jd = A @ d
        out.append(float(np.linalg.norm(jd - fd) / np.linalg.norm(jd)))
    return np.array(out)


def random_admissible_state(asm: Assembler, rng, u_scale, p_scale):
    """Smooth random displacement (small gradients) and a random pressure field."""
    x = asm.mesh.points
    L = float(np.ptp(x, axis=0).max())
    U = np.zeros((asm.nV, asm.dim))
    for i in range(asm.dim):
        k = rng.normal(size=asm.dim) * 2 * math.pi / L
        U[:, i] = u_scale * L * np.sin(x @ k + rng.uniform(0, 2 * math.pi))
    P = p_scale * rng.normal(size=asm.nP)
    return asm.join(U, P)
