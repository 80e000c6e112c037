"""Lagrange P1/P2 shape functions in barycentric coordinates."""
from __future__ import annotations

import numpy as np

from ..mesh import LOCAL_EDGES


def p1_values(lam):
    return np.asarray(lam, dtype=float)


def p2_values(lam, dim):
    """P2 basis at barycentric points: vertex functions then edge functions."""
    lam = np.atleast_2d(lam)
    edges = LOCAL_EDGES[dim]
    vert = lam * (2.0 * lam - 1.0)
    edge = 4.0 * lam[:, edges[:, 0]] * lam[:, edges[:, 1]]
    return np.hstack([vert, edge])


def p2_dlam(lam, dim):
    """Derivatives ``dN_q / d lambda_m`` with shape ``(nq, nloc, dim+1)``."""
    lam = np.atleast_2d(lam)
    nq = lam.shape[0]
    edges = LOCAL_EDGES[dim]
    nv = dim + 1
    out = np.zeros((nq, nv + edges.shape[0], nv))
    for i in range(nv):
        out[:, i, i] = 4.0 * lam[:, i] - 1.0
    for e, (i, j) in enumerate(edges):
        out[:, nv + e, i] = 4.0 * lam[:, j]
        out[:, nv + e, j] = 4.0 * lam[:, i]
    return out


def barycentric_gradients(points, cells):
    """Constant gradients of the P1 basis ``(C, dim+1, dim)`` and signed measures."""
    x = points[cells]
    dim = points.shape[1]
    D = x[:, 1:] - x[:, :1]                  # rows are edge vectors
    Dinv = np.linalg.inv(D)                  # columns are grad lambda_1..d
    G = np.empty((cells.shape[0], dim + 1, dim))
    G[:, 1:] = np.swapaxes(Dinv, 1, 2)
    G[:, 0] = -G[:, 1:].sum(axis=1)
    fact = 2.0 if dim == 2 else 6.0
    return G, np.linalg.det(D) / fact


def p2_integrals(dim):
    """Integrals of the P2 basis over a simplex of unit measure."""
    if dim == 2:
        return np.r_[np.zeros(3), np.full(3, 1.0 / 3.0)]
    return np.r_[np.full(4, -1.0 / 20.0), np.full(6, 1.0 / 5.0)]
