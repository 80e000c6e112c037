"""Compiled inner loops for the annealing search.

Each kernel has a pure numpy/Python twin; ``HAVE_NUMBA`` tells which one
is active. Tests compare the two routes directly.
"""
from __future__ import annotations

import math

import numpy as np

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False


def _seg_dist_scalar(p1, q1, p2, q2):
    # closest points of two segments (Ericson), coordinates as 1D arrays
    dim = p1.shape[0]
    a = e = f = c = b = 0.0
    for k in range(dim):
        d1 = q1[k] - p1[k]
        d2 = q2[k] - p2[k]
        r = p1[k] - p2[k]
        a += d1 * d1
        e += d2 * d2
        f += d2 * r
        c += d1 * r
        b += d1 * d2
    s = 0.0
    t = 0.0
    if a <= 1e-300 and e <= 1e-300:
        s = 0.0
        t = 0.0
    elif a <= 1e-300:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    elif e <= 1e-300:
        t = 0.0
        s = min(max(-c / a, 0.0), 1.0)
    else:
        denom = a * e - b * b
        if denom > 1e-14 * a * e:
            s = min(max((b * f - c * e) / denom, 0.0), 1.0)
        t = (b * s + f) / e
        if t < 0.0:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        elif t > 1.0:
            t = 1.0
            s = min(max((b - c) / a, 0.0), 1.0)
    acc = 0.0
    for k in range(dim):
        d = (p1[k] + s * (q1[k] - p1[k])) - (p2[k] + t * (q2[k] - p2[k]))
        acc += d * d
    return math.sqrt(acc)


def _net_close_pairs(a0, a1, ra, sign, b0, b1, rb):
    """``sum_i sign_i * #{j : dist(A_i, B_j) < ra_i + rb_j}``."""
    na = a0.shape[0]
    nb = b0.shape[0]
    dim = a0.shape[1]
    total = 0
    for i in range(na):
        for j in range(nb):
            pad = ra[i] + rb[j]
            ok = True
            for k in range(dim):
                alo = min(a0[i, k], a1[i, k])
                ahi = max(a0[i, k], a1[i, k])
                blo = min(b0[j, k], b1[j, k])
                bhi = max(b0[j, k], b1[j, k])
                if alo - pad > bhi or blo - pad > ahi:
                    ok = False
                    break
            if ok and _seg_dist_scalar(a0[i], a1[i], b0[j], b1[j]) < pad:
                total += sign[i]
    return total


def _weber3(pts, w, eps, iters, rtol):
    """Weighted Fermat point of the rows of ``pts`` (Weiszfeld, smoothed).

    A vertex satisfying the optimality test ``|sum_j w_j u_ij| <= w_i``
    (``u_ij`` unit vectors towards the others) is returned directly;
    Weiszfeld converges only sublinearly towards such points.
    """
    n, dim = pts.shape
    g = np.zeros(dim)
    for i in range(n):
        for k in range(dim):
            g[k] = 0.0
        for j in range(n):
            if j == i:
                continue
            d = 0.0
            for k in range(dim):
                d += (pts[j, k] - pts[i, k]) ** 2
            d = math.sqrt(d)
            if d == 0.0:
                continue
            for k in range(dim):
                g[k] += w[j] * (pts[j, k] - pts[i, k]) / d
        gn = 0.0
        for k in range(dim):
            gn += g[k] * g[k]
        if math.sqrt(gn) <= w[i]:
            out = np.empty(dim)
            for k in range(dim):
                out[k] = pts[i, k]
            return out
    y = np.zeros(dim)
    tot = 0.0
    for i in range(n):
        tot += w[i]
        for k in range(dim):
            y[k] += w[i] * pts[i, k]
    for k in range(dim):
        y[k] /= tot
    scale = eps
    for i in range(n):
        for j in range(i + 1, n):
            d = 0.0
            for k in range(dim):
                d += (pts[i, k] - pts[j, k]) ** 2
            scale = max(scale, math.sqrt(d))
    e2 = eps * eps
    ny = np.zeros(dim)
    for _ in range(iters):
        s = 0.0
        for k in range(dim):
            ny[k] = 0.0
        for i in range(n):
            d = 0.0
            for k in range(dim):
                d += (y[k] - pts[i, k]) ** 2
            kk = w[i] / math.sqrt(d + e2)
            s += kk
            for k in range(dim):
                ny[k] += kk * pts[i, k]
        step = 0.0
        for k in range(dim):
            ny[k] /= s
            step += (ny[k] - y[k]) ** 2
            y[k] = ny[k]
        if math.sqrt(step) < rtol * scale:
            break
    return y


def np_net_close_pairs(a0, a1, ra, sign, b0, b1, rb):
    """Vectorised route of :func:`net_close_pairs` built on ``count_close_pairs``."""
    from .geometry import count_close_pairs
    _, pairs = count_close_pairs(a0, a1, ra, b0, b1, rb, 1.0, return_pairs=True)
    return int(np.sum(np.asarray(sign)[pairs[:, 0]]))


py_weber3 = _weber3

if HAVE_NUMBA:
    _seg_dist_scalar = numba.njit(cache=True)(_seg_dist_scalar)
    net_close_pairs = numba.njit(cache=True)(_net_close_pairs)
    weber_point = numba.njit(cache=True)(_weber3)
else:  # pragma: no cover
    net_close_pairs = np_net_close_pairs
    weber_point = _weber3
