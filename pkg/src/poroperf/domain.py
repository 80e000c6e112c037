"""Perfusion domains: inside/outside predicates and bounding boxes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError


class PerfusionDomain:
    dim: int

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True)
class Disk(PerfusionDomain):
    center: tuple = (0.0, 0.0)
    radius: float = 0.01
    dim = 2

    def __post_init__(self):
        if not self.radius > 0:
            raise DegeneracyError("disk radius must be positive")

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.sum((x - np.asarray(self.center)) ** 2, axis=1) < self.radius**2

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class Sphere(PerfusionDomain):
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.05
    dim = 3

    def __post_init__(self):
        if not self.radius > 0:
            raise DegeneracyError("sphere radius must be positive")

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.sum((x - np.asarray(self.center)) ** 2, axis=1) < self.radius**2

    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class Polygon(PerfusionDomain):
    """Simple polygon, even-odd rule."""

    vertices: tuple
    dim = 2

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        area = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if v.shape[0] < 3 or abs(area) <= 0:
            raise DegeneracyError("polygon needs positive area")

    def contains(self, x):
        x = np.atleast_2d(x)
        v = np.asarray(self.vertices, dtype=float)
        a, b = v, np.roll(v, -1, axis=0)
        px, py = x[:, 0:1], x[:, 1:2]
        cond = (a[:, 1] > py) != (b[:, 1] > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a[:, 0] + (py - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
        hits = cond & (px < xint)
        return (np.count_nonzero(hits, axis=1) % 2) == 1

    def bounds(self):
        v = np.asarray(self.vertices, dtype=float)
        return v.min(axis=0), v.max(axis=0)


@dataclass(frozen=True, eq=False)
class SurfaceMeshDomain(PerfusionDomain):
    """Closed, consistently oriented triangle surface; inside by winding number."""

    vertices: np.ndarray
    triangles: np.ndarray
    dim = 3

    def contains(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.asarray(self.vertices, dtype=float)
        tri = np.asarray(self.triangles)
        out = np.empty(x.shape[0], dtype=bool)
        for start in range(0, x.shape[0], 256):
            xs = x[start:start + 256]
            a = v[tri[:, 0]][None] - xs[:, None]
            b = v[tri[:, 1]][None] - xs[:, None]
            c = v[tri[:, 2]][None] - xs[:, None]
            la, lb, lc = (np.linalg.norm(q, axis=2) for q in (a, b, c))
            det = np.einsum("pij,pij->pi", a, np.cross(b, c))
            den = (la * lb * lc + np.einsum("pij,pij->pi", a, b) * lc
                   + np.einsum("pij,pij->pi", b, c) * la + np.einsum("pij,pij->pi", c, a) * lb)
            omega = 2.0 * np.arctan2(det, den).sum(axis=1)
            out[start:start + 256] = np.abs(omega) > 2.0 * np.pi
        return out

    def bounds(self):
        v = np.asarray(self.vertices, dtype=float)
        return v.min(axis=0), v.max(axis=0)


def sample_terminals(domain: PerfusionDomain, n: int, seed=0, max_batches: int = 10_000) -> np.ndarray:
    """Uniform rejection sampling of ``n`` points strictly inside ``domain``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise ValueError("need at least one terminal")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo, hi = (np.asarray(b, dtype=float) for b in domain.bounds())
    out = []
    have = tried = 0
    batch = max(64, 2 * n)
    for _ in range(max_batches):
        cand = lo + (hi - lo) * rng.random((batch, lo.size))
        ok = cand[domain.contains(cand)]
        tried += batch
        out.append(ok)
        have += ok.shape[0]
        if have >= n:
            break
        if tried >= 100_000 and have / tried < 1e-3:
            raise DegeneracyError(f"rejection acceptance ratio {have / tried:.2e} below 1e-3")
    else:
        raise DegeneracyError("could not sample enough interior points")
    return np.vstack(out)[:n]
