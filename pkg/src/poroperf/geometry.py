"""Vectorised geometric predicates on segments and half-spaces."""
from __future__ import annotations

import numpy as np


def _to3(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 3:
        return x
    pad = np.zeros(x.shape[:-1] + (3 - x.shape[-1],))
    return np.concatenate([x, pad], axis=-1)


def segment_distance(p1, q1, p2, q2, eps=1e-300):
    """Exact minimum distance between segments ``[p1, q1]`` and ``[p2, q2]``.

    All arguments broadcast against each other with a trailing coordinate
    axis of length 2 or 3. Degenerate (point) segments are handled.
    """
    p1, q1, p2, q2 = (_to3(a) for a in (p1, q1, p2, q2))
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("...i,...i->...", d1, d1)
    e = np.einsum("...i,...i->...", d2, d2)
    f = np.einsum("...i,...i->...", d2, r)
    c = np.einsum("...i,...i->...", d1, r)
    b = np.einsum("...i,...i->...", d1, d2)
    a, e, f, c, b = np.broadcast_arrays(a, e, f, c, b)
    deg1 = a <= eps
    deg2 = e <= eps
    safe_a = np.where(deg1, 1.0, a)
    safe_e = np.where(deg2, 1.0, e)
    denom = a * e - b * b
    nonpar = denom > 1e-14 * a * e
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(nonpar, (b * f - c * e) / np.where(nonpar, denom, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    t = (b * s + f) / safe_e
    lo = t < 0.0
    hi = t > 1.0
    s = np.where(lo, np.clip(-c / safe_a, 0.0, 1.0), s)
    s = np.where(hi, np.clip((b - c) / safe_a, 0.0, 1.0), s)
    t = np.clip(t, 0.0, 1.0)
    # one or both segments degenerate
    s = np.where(deg1, 0.0, s)
    t = np.where(deg1 & ~deg2, np.clip(f / safe_e, 0.0, 1.0), t)
    s = np.where(~deg1 & deg2, np.clip(-c / safe_a, 0.0, 1.0), s)
    t = np.where(deg2, 0.0, t)
    c1 = p1 + d1 * s[..., None]
    c2 = p2 + d2 * t[..., None]
    return np.linalg.norm(c1 - c2, axis=-1)


def count_close_pairs(a0, a1, ra, b0, b1, rb, clearance=1.0, return_pairs=False):
    """Count pairs (i, j) with ``dist(A_i, B_j) < clearance * (ra_i + rb_j)``.

    A bounding-box prefilter keeps the exact distance evaluation sparse.
    """
    a0, a1, b0, b1 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (a0, a1, b0, b1))
    ra = np.atleast_1d(np.asarray(ra, dtype=float))
    rb = np.atleast_1d(np.asarray(rb, dtype=float))
    if a0.shape[0] == 0 or b0.shape[0] == 0:
        return (0, np.zeros((0, 2), dtype=np.int64)) if return_pairs else 0
    pad_a = clearance * ra[:, None]
    pad_b = clearance * rb[None, :]
    alo, ahi = np.minimum(a0, a1), np.maximum(a0, a1)
    blo, bhi = np.minimum(b0, b1), np.maximum(b0, b1)
    hit = np.ones((a0.shape[0], b0.shape[0]), dtype=bool)
    for k in range(a0.shape[1]):
        hit &= (alo[:, None, k] - pad_a - pad_b <= bhi[None, :, k])
        hit &= (blo[None, :, k] <= ahi[:, None, k] + pad_a + pad_b)
    i, j = np.nonzero(hit)
    if i.size == 0:
        return (0, np.zeros((0, 2), dtype=np.int64)) if return_pairs else 0
    d = segment_distance(a0[i], a1[i], b0[j], b1[j])
    close = d < clearance * (ra[i] + rb[j])
    if return_pairs:
        return int(np.count_nonzero(close)), np.stack([i[close], j[close]], axis=1)
    return int(np.count_nonzero(close))


def signed_plane_distance(x, point, normal):
    """``(x - point) . normal``; positive values lie on the removed side."""
    x = np.asarray(x, dtype=float)
    return (x - np.asarray(point, dtype=float)) @ np.asarray(normal, dtype=float)


def in_removed_region(x, planes) -> np.ndarray:
    """True where ``x`` lies strictly on the removed side of *every* plane.

    ``planes`` is a sequence of ``(point, unit_normal)``; the removed region
    is the intersection of the open half-spaces ``(x - point) . normal > 0``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.ones(x.shape[0], dtype=bool)
    for point, normal in planes:
        out &= signed_plane_distance(x, point, normal) > 0.0
    return out


def segment_hits_region(x0, x1, planes) -> np.ndarray:
    """True where segment ``[x0, x1]`` meets the (open, convex) removed region.

    Clips the parameter interval against each half-space (Cyrus-Beck).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    tlo = np.zeros(x0.shape[0])
    thi = np.ones(x0.shape[0])
    empty = np.zeros(x0.shape[0], dtype=bool)
    for point, normal in planes:
        f0 = signed_plane_distance(x0, point, normal)
        f1 = signed_plane_distance(x1, point, normal)
        df = f1 - f0
        # need f0 + t*df > 0
        par = df == 0
        empty |= par & (f0 <= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            tc = -f0 / df
        inc = df > 0
        dec = df < 0
        tlo = np.where(inc, np.maximum(tlo, tc), tlo)
        thi = np.where(dec, np.minimum(thi, tc), thi)
    # open region: the admissible interval must have positive length or an interior endpoint
    hit = ~empty & ((thi > tlo) | ((thi >= tlo) & in_removed_region(x0 + (x1 - x0) * tlo[:, None], planes)))
    return hit
