"""Collapsed-coordinate (conical product) Gauss rules on simplices.

Rules are returned in barycentric form with weights summing to one, so
``integral = measure * sum(w * f(lambda))``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


def _gauss_jacobi01(n, alpha):
    """n-point rule on [0, 1] for the weight (1 - s)**alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int = 4):
    """Barycentric points ``(nq, dim+1)`` and weights ``(nq,)`` exact to ``degree``."""
    if dim == 1:
        n = degree // 2 + 1
        s, w = _gauss_jacobi01(n, 0.0)
        lam = np.column_stack([1.0 - s, s])
        return lam, w / w.sum()
    n = degree // 2 + 1
    if dim == 2:
        s, ws = _gauss_jacobi01(n, 1.0)
        t, wt = _gauss_jacobi01(n, 0.0)
        S, T = np.meshgrid(s, t, indexing="ij")
        W = np.outer(ws, wt)
        x = S.ravel()
        y = (T * (1.0 - S)).ravel()
        lam = np.column_stack([1.0 - x - y, x, y])
    elif dim == 3:
        s, ws = _gauss_jacobi01(n, 2.0)
        t, wt = _gauss_jacobi01(n, 1.0)
        r, wr = _gauss_jacobi01(n, 0.0)
        S, T, R = np.meshgrid(s, t, r, indexing="ij")
        W = ws[:, None, None] * wt[None, :, None] * wr[None, None, :]
        x = S.ravel()
        y = (T * (1.0 - S)).ravel()
        z = (R * (1.0 - S) * (1.0 - T)).ravel()
        lam = np.column_stack([1.0 - x - y - z, x, y, z])
    else:
        raise ValueError("dim must be 1, 2 or 3")
    W = W.ravel()
    return lam, W / W.sum()
