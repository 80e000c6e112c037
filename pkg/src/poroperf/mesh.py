"""Simplicial meshes with tagged boundary facets and P2 node numbering.

File format (ASCII, LF endings)::

    pmesh 1 <dim>
    <V> <C> <F>
    x y [z]                 (V lines)
    i j k [l]               (C lines, 0-based)
    i j [k] <tag>           (F lines, tag = outer | outflow:<id>)
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, MeshParseError, MeshResourceError

log = logging.getLogger(__name__)

#: local vertex pairs of the P2 edge nodes
LOCAL_EDGES = {
    2: np.array([(0, 1), (1, 2), (2, 0)]),
    3: np.array([(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)]),
}
#: local vertex lists of the facets opposite each vertex
_LOCAL_FACETS = {
    2: np.array([(1, 2), (2, 0), (0, 1)]),
    3: np.array([(1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)]),
}
_TAG = re.compile(r"^(outer|outflow:\d+)$")
MAX_CELLS = 5_000_000


@dataclass(frozen=True, eq=False)
class Mesh:
    points: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    facet_tags: tuple
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        dim = pts.shape[1]
        cells = np.array(self.cells, dtype=np.int64).reshape(-1, dim + 1)
        facets = np.array(self.facets, dtype=np.int64).reshape(-1, dim)
        tags = tuple(str(t) for t in self.facet_tags)
        if len(tags) != facets.shape[0]:
            raise DomainError("one tag per facet required")
        for name, arr in (("points", pts), ("cells", cells), ("facets", facets)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "facet_tags", tags)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    # -- geometry --------------------------------------------------------
    def signed_measures(self) -> np.ndarray:
        return self._cached("measure", lambda: _signed_measures(self.points, self.cells))

    def centroids(self) -> np.ndarray:
        return self.points[self.cells].mean(axis=1)

    def measure(self) -> float:
        return float(np.sum(self.signed_measures()))

    # -- topology --------------------------------------------------------
    @property
    def edges(self) -> np.ndarray:
        """Unique vertex pairs ``(i < j)`` in lexicographic order."""
        return self._p2()[0]

    @property
    def cell_edges(self) -> np.ndarray:
        return self._p2()[1]

    def _p2(self):
        def build():
            loc = LOCAL_EDGES[self.dim]
            e = self.cells[:, loc]                      # (C, ne, 2)
            e = np.sort(e, axis=2).reshape(-1, 2)
            uniq, inv = np.unique(e, axis=0, return_inverse=True)
            return uniq, inv.reshape(self.n_cells, loc.shape[0])
        return self._cached("p2", build)

    def edge_index(self, pairs) -> np.ndarray:
        """Edge ids of vertex pairs (any order); -1 where absent."""
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        keys = self.edges[:, 0] * self.n_points + self.edges[:, 1]
        q = pairs[:, 0] * self.n_points + pairs[:, 1]
        pos = np.searchsorted(keys, q)
        pos = np.minimum(pos, keys.size - 1)
        return np.where(keys[pos] == q, pos, -1)

    def boundary_facets(self):
        """Topological boundary by incidence counting: ``(facets, owner cell, local id)``."""
        def build():
            loc = _LOCAL_FACETS[self.dim]
            f = self.cells[:, loc].reshape(-1, self.dim)
            key = np.sort(f, axis=1)
            _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
            inv = inv.reshape(-1)
            once = cnt[inv] == 1
            idx = np.flatnonzero(once)
            return f[idx], idx // loc.shape[0], idx % loc.shape[0]
        return self._cached("bnd", build)

    def facet_owner(self) -> np.ndarray:
        """Cell adjacent to each tagged facet (-1 if the facet is not on the boundary)."""
        def build():
            bf, owner, _ = self.boundary_facets()
            n = self.n_points
            keys = _facet_keys(bf, n)
            order = np.argsort(keys)
            q = _facet_keys(self.facets, n)
            pos = np.searchsorted(keys[order], q)
            pos = np.minimum(pos, max(keys.size - 1, 0))
            ok = keys.size > 0
            found = ok & (keys[order][pos] == q) if keys.size else np.zeros(q.size, bool)
            return np.where(found, owner[order][pos], -1)
        return self._cached("owner", build)

    def facets_with_tag(self, prefix: str) -> np.ndarray:
        return np.array([i for i, t in enumerate(self.facet_tags) if t.startswith(prefix)], dtype=np.int64)

    # -- quadratic enrichment -------------------------------------------
    @property
    def n_p2(self) -> int:
        return self.n_points + self.edges.shape[0]

    @property
    def cells_p2(self) -> np.ndarray:
        """Per-cell P2 connectivity: vertices then edge nodes (offset by V)."""
        return self._cached("cells_p2", lambda: np.hstack([self.cells, self.n_points + self.cell_edges]))

    @property
    def points_p2(self) -> np.ndarray:
        def build():
            mid = 0.5 * (self.points[self.edges[:, 0]] + self.points[self.edges[:, 1]])
            return np.vstack([self.points, mid])
        return self._cached("points_p2", build)

    def facets_p2(self, facets=None) -> np.ndarray:
        """P2 connectivity of boundary facets (vertices then facet edge nodes)."""
        facets = self.facets if facets is None else np.asarray(facets)
        if self.dim == 2:
            pairs = facets[:, [0, 1]]
            return np.hstack([facets, self.n_points + self.edge_index(pairs)[:, None]])
        loc = np.array([(0, 1), (1, 2), (2, 0)])
        e = np.stack([self.edge_index(facets[:, p]) for p in loc], axis=1)
        return np.hstack([facets, self.n_points + e])


def p2_enrich(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic node coordinates and per-cell P2 connectivity.

    Nodes ``0..V-1`` are the vertices; node ``V + e`` is the midpoint of
    edge ``e`` of ``mesh.edges``.
    """
    return mesh.points_p2, mesh.cells_p2


def _facet_keys(f, n):
    f = np.sort(np.asarray(f, dtype=np.int64), axis=1)
    key = np.zeros(f.shape[0], dtype=np.int64)
    for k in range(f.shape[1]):
        key = key * n + f[:, k]
    return key


def _signed_measures(points, cells):
    x = points[cells]
    d = x[:, 1:] - x[:, :1]
    dim = points.shape[1]
    return np.linalg.det(d) / math.factorial(dim)


def _orient(points, cells):
    cells = cells.copy()
    neg = _signed_measures(points, cells) < 0
    cells[neg, 0], cells[neg, 1] = cells[neg, 1].copy(), cells[neg, 0].copy()
    return cells


def from_cells(points, cells, tag_fn=None) -> Mesh:
    """Build a mesh, orienting cells and tagging the topological boundary.

    ``tag_fn(facet_midpoints) -> list[str]`` overrides the default ``outer`` tag.
    """
    points = np.asarray(points, dtype=float)
    cells = _orient(points, np.asarray(cells, dtype=np.int64))
    tmp = Mesh(points, cells, np.zeros((0, points.shape[1]), dtype=np.int64), ())
    bf, _, _ = tmp.boundary_facets()
    tags = ["outer"] * bf.shape[0] if tag_fn is None else list(tag_fn(points[bf].mean(axis=1)))
    return Mesh(points, cells, bf, tuple(tags))


def submesh(mesh: Mesh, keep_cells) -> Mesh:
    """Restrict to a cell subset; surviving tagged facets keep their tag, new ones are ``outer``."""
    keep_cells = np.asarray(keep_cells)
    if keep_cells.dtype == bool:
        keep_cells = np.flatnonzero(keep_cells)
    cells = mesh.cells[keep_cells]
    used = np.unique(cells)
    remap = np.full(mesh.n_points, -1, dtype=np.int64)
    remap[used] = np.arange(used.size)
    pts = mesh.points[used]
    cells = remap[cells]
    tmp = Mesh(pts, cells, np.zeros((0, mesh.dim), dtype=np.int64), ())
    bf, _, _ = tmp.boundary_facets()
    old = {tuple(sorted(remap[f])): t for f, t in zip(mesh.facets.tolist(), mesh.facet_tags)
           if np.all(remap[f] >= 0)}
    tags = tuple(old.get(tuple(sorted(f)), "outer") for f in bf.tolist())
    return Mesh(pts, cells, bf, tags)


# ---------------------------------------------------------------------------
# generators

def _blend(x):
    """Map the cube ``[-1, 1]^d`` onto the unit ball, smoothly in the interior."""
    inf = np.max(np.abs(x), axis=1)
    two = np.linalg.norm(x, axis=1)
    ratio = np.divide(inf, two, out=np.ones_like(inf), where=two > 0)
    t = inf
    return x * ((1.0 - t) + t * ratio)[:, None]


def _check_budget(n_cells, max_cells):
    if n_cells > max_cells:
        raise MeshResourceError(f"mesh would have {n_cells} cells (limit {max_cells}); increase h")


def gen_disk_mesh(radius: float = 0.01, h: float = 1.5e-4, center=(0.0, 0.0), max_cells=MAX_CELLS) -> Mesh:
    """Mapped-square triangulation of a disk with ``8 n^2`` triangles, ``n = ceil(radius/h)``."""
    if not 0 < h < radius:
        raise DomainError("need 0 < h < radius")
    n = int(math.ceil(radius / h - 1e-9))
    _check_budget(8 * n * n, max_cells)
    m = 2 * n + 1
    g = np.linspace(-1.0, 1.0, m)
    X, Y = np.meshgrid(g, g, indexing="ij")
    ref = np.column_stack([X.ravel(), Y.ravel()])
    pts = radius * _blend(ref) + np.asarray(center, dtype=float)
    i, j = np.meshgrid(np.arange(m - 1), np.arange(m - 1), indexing="ij")
    i, j = i.ravel(), j.ravel()
    v00 = i * m + j
    v10 = (i + 1) * m + j
    v01 = i * m + j + 1
    v11 = (i + 1) * m + j + 1
    # Delaunay choice of the quad diagonal: split along 00-11 unless the
    # opposite angles at 10 and 01 sum to more than pi
    ang = _angle(pts[v10], pts[v00], pts[v11]) + _angle(pts[v01], pts[v00], pts[v11])
    diag = ang <= math.pi
    t1 = np.where(diag[:, None], np.stack([v00, v10, v11], 1), np.stack([v00, v10, v01], 1))
    t2 = np.where(diag[:, None], np.stack([v00, v11, v01], 1), np.stack([v10, v11, v01], 1))
    return from_cells(pts, np.vstack([t1, t2]))


def _angle(apex, a, b):
    u = a - apex
    v = b - apex
    c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
    return np.arccos(np.clip(c, -1.0, 1.0))


_KUHN = [(0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7), (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7)]


def gen_ball_mesh(radius: float = 0.05, h: float = 5e-3, center=(0.0, 0.0, 0.0), max_cells=MAX_CELLS) -> Mesh:
    """Mapped-cube tetrahedral mesh of a ball (``48 n^3`` tets).

    Each octant is a mirrored copy of a Kuhn-split grid so that neighbouring
    octants share conforming face diagonals.
    """
    if not 0 < h < radius:
        raise DomainError("need 0 < h < radius")
    n = int(math.ceil(radius / h - 1e-9))
    _check_budget(48 * n ** 3, max_cells)
    m = 2 * n + 1
    g = np.linspace(-1.0, 1.0, m)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    ref = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    pts = radius * _blend(ref) + np.asarray(center, dtype=float)

    def vid(i, j, k):
        return (i * m + j) * m + k

    a = np.arange(n)
    I, J, K = (q.ravel() for q in np.meshgrid(a, a, a, indexing="ij"))
    cells = []
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                # mirrored local coordinates: start at the centre index n
                corners = []
                for c in range(8):
                    dx, dy, dz = (c >> 0) & 1, (c >> 1) & 1, (c >> 2) & 1
                    corners.append(vid(n + sx * (I + dx), n + sy * (J + dy), n + sz * (K + dz)))
                corners = np.stack(corners, axis=1)
                for tet in _KUHN:
                    cells.append(corners[:, tet])
    return from_cells(pts, np.vstack(cells))


def gen_rect_mesh(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0, origin=(0.0, 0.0)) -> Mesh:
    """Structured right-triangle mesh of a rectangle (``2 nx ny`` cells)."""
    if nx < 1 or ny < 1:
        raise DomainError("need at least one cell per direction")
    x = np.linspace(0.0, lx, nx + 1) + origin[0]
    y = np.linspace(0.0, ly, ny + 1) + origin[1]
    X, Y = np.meshgrid(x, y, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = (q.ravel() for q in np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij"))
    v00 = i * (ny + 1) + j
    v10 = v00 + ny + 1
    v01 = v00 + 1
    v11 = v10 + 1
    cells = np.vstack([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])
    return from_cells(pts, cells)


def gen_box_mesh(n: int, lengths=(1.0, 1.0, 1.0)) -> Mesh:
    """Kuhn-split cube grid (``6 n^3`` tets)."""
    m = n + 1
    g = [np.linspace(0.0, L, m) for L in lengths]
    X, Y, Z = np.meshgrid(*g, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    a = np.arange(n)
    I, J, K = (q.ravel() for q in np.meshgrid(a, a, a, indexing="ij"))
    corners = np.stack([((I + (c & 1)) * m + J + ((c >> 1) & 1)) * m + K + ((c >> 2) & 1)
                        for c in range(8)], axis=1)
    return from_cells(pts, np.vstack([corners[:, t] for t in _KUHN]))


# ---------------------------------------------------------------------------
# quality and validation

def quality(mesh: Mesh) -> np.ndarray:
    """Normalised radius ratio ``d * r_in / R_circ`` (1 for the regular simplex)."""
    x = mesh.points[mesh.cells]
    vol = np.abs(mesh.signed_measures())
    if mesh.dim == 2:
        a = np.linalg.norm(x[:, 1] - x[:, 2], axis=1)
        b = np.linalg.norm(x[:, 2] - x[:, 0], axis=1)
        c = np.linalg.norm(x[:, 0] - x[:, 1], axis=1)
        r_in = 2.0 * vol / (a + b + c)
        r_out = a * b * c / (4.0 * vol)
        return 2.0 * r_in / r_out
    faces = _LOCAL_FACETS[3]
    area = np.zeros(mesh.n_cells)
    for f in faces:
        area += 0.5 * np.linalg.norm(np.cross(x[:, f[1]] - x[:, f[0]], x[:, f[2]] - x[:, f[0]]), axis=1)
    r_in = 3.0 * vol / area
    # circumradius from the edge-length product formula
    d = lambda i, j: np.linalg.norm(x[:, i] - x[:, j], axis=1)  # noqa: E731
    p = d(0, 1) * d(2, 3)
    q = d(0, 2) * d(1, 3)
    r = d(0, 3) * d(1, 2)
    s = np.sqrt(np.maximum((p + q + r) * (p + q - r) * (p - q + r) * (-p + q + r), 0.0))
    r_out = s / (24.0 * vol)
    return 3.0 * r_in / r_out


@dataclass
class MeshReport:
    orientation: list = field(default_factory=list)
    duplicates: list = field(default_factory=list)
    untagged: list = field(default_factory=list)
    bad_facets: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.orientation or self.duplicates or self.untagged or self.bad_facets)

    def findings(self) -> list[str]:
        out = [f"cell {c}: non-positive orientation" for c in self.orientation]
        out += [f"vertices {i} and {j} coincide" for i, j in self.duplicates]
        out += [f"boundary facet {tuple(f)} untagged" for f in self.untagged]
        out += [f"tagged facet {i} is not on the boundary" for i in self.bad_facets]
        return out


def validate_mesh(mesh: Mesh, tol: float = 1e-12) -> MeshReport:
    rep = MeshReport()
    rep.orientation = np.flatnonzero(mesh.signed_measures() <= 0).tolist()
    pairs = cKDTree(mesh.points).query_pairs(tol, output_type="ndarray")
    rep.duplicates = sorted(map(tuple, pairs.tolist()))
    bf, _, _ = mesh.boundary_facets()
    n = mesh.n_points
    tagged = set(_facet_keys(mesh.facets, n).tolist())
    bkeys = _facet_keys(bf, n)
    rep.untagged = [bf[i].tolist() for i in np.flatnonzero([k not in tagged for k in bkeys.tolist()])]
    bset = set(bkeys.tolist())
    rep.bad_facets = [i for i, k in enumerate(_facet_keys(mesh.facets, n).tolist()) if k not in bset]
    return rep


# ---------------------------------------------------------------------------
# I/O

def dumps_mesh(mesh: Mesh) -> str:
    lines = [f"pmesh 1 {mesh.dim}", f"{mesh.n_points} {mesh.n_cells} {mesh.facets.shape[0]}"]
    lines += [" ".join(repr(float(c)) for c in p) for p in mesh.points.tolist()]
    lines += [" ".join(str(i) for i in c) for c in mesh.cells.tolist()]
    lines += [" ".join(str(i) for i in f) + " " + t for f, t in zip(mesh.facets.tolist(), mesh.facet_tags)]
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_mesh(mesh))


def loads_mesh(text: str) -> Mesh:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    def get(i):
        if i >= len(lines):
            raise MeshParseError("unexpected end of file", i + 1)
        return lines[i].split()

    head = get(0)
    if len(head) != 3 or head[0] != "pmesh" or head[1] != "1" or head[2] not in ("2", "3"):
        raise MeshParseError("bad header, expected 'pmesh 1 <2|3>'", 1)
    dim = int(head[2])
    try:
        nv, nc, nf = (int(t) for t in get(1))
    except ValueError:
        raise MeshParseError("expected '<V> <C> <F>'", 2) from None
    if min(nv, nc, nf) < 0:
        raise MeshParseError("negative count", 2)
    pts = np.empty((nv, dim))
    ln = 2
    for i in range(nv):
        tok = get(ln)
        if len(tok) != dim:
            raise MeshParseError(f"expected {dim} coordinates", ln + 1)
        try:
            pts[i] = [float(t) for t in tok]
        except ValueError:
            raise MeshParseError("bad coordinate", ln + 1) from None
        ln += 1

    def idx_row(tok, k):
        if len(tok) != k:
            raise MeshParseError(f"expected {k} indices", ln + 1)
        try:
            row = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError("bad index", ln + 1) from None
        if min(row) < 0 or max(row) >= nv:
            raise MeshParseError(f"vertex index out of range 0..{nv - 1}", ln + 1)
        return row

    cells = np.empty((nc, dim + 1), dtype=np.int64)
    for i in range(nc):
        cells[i] = idx_row(get(ln), dim + 1)
        ln += 1
    facets = np.empty((nf, dim), dtype=np.int64)
    tags = []
    for i in range(nf):
        tok = get(ln)
        if not tok or not _TAG.match(tok[-1]):
            raise MeshParseError("facet tag must be 'outer' or 'outflow:<id>'", ln + 1)
        facets[i] = idx_row(tok[:-1], dim)
        tags.append(tok[-1])
        ln += 1
    if ln != len(lines):
        raise MeshParseError("trailing content", ln + 1)
    used = np.zeros(nv, dtype=bool)
    used[cells.ravel()] = True
    if not used.all():
        raise MeshParseError(f"vertex {int(np.argmin(used))} is not referenced by any cell", 3 + int(np.argmin(used)))
    return Mesh(pts, cells, facets, tuple(tags))


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        return loads_mesh(fh.read())
