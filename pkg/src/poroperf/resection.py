"""Half-space resection of mesh and trees, flow redistribution and orphans.

A cut is a list of planes; the removed region is the intersection of the
open half-spaces ``(x - point) . normal > 0``. A single plane removes a
half-space, two planes a wedge or slab.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import vascular as vm
from .errors import BindingError, FullResectionError, NoOutletError, NoSupplyError, RootResectedError
from .fem.constitutive import Material
from .fem.newton import NewtonSettings
from .geometry import in_removed_region, segment_hits_region
from .mesh import Mesh, submesh, validate_mesh
from .pipeline import CaseResult, CouplingSettings, solve_case
from .vascular import VascularTree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CutPlane:
    point: tuple
    normal: tuple

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("cut-plane normal must have unit length")
        if len(self.point) != n.size:
            raise ValueError("point and normal dimensions differ")

    @classmethod
    def through(cls, point, direction):
        d = np.asarray(direction, dtype=float)
        return cls(tuple(map(float, point)), tuple((d / np.linalg.norm(d)).tolist()))

    def as_pair(self):
        return np.asarray(self.point, dtype=float), np.asarray(self.normal, dtype=float)


def _pairs(planes):
    if isinstance(planes, CutPlane):
        planes = [planes]
    return [p.as_pair() if isinstance(p, CutPlane) else (np.asarray(p[0], float), np.asarray(p[1], float))
            for p in planes]


def removed(x, planes) -> np.ndarray:
    pl = _pairs(planes)
    if not pl:
        return np.zeros(np.atleast_2d(x).shape[0], dtype=bool)
    return in_removed_region(x, pl)


def clip_mesh(mesh: Mesh, planes) -> Mesh:
    """Keep cells whose centroid is outside the removed region."""
    pl = _pairs(planes)
    if not pl:
        return mesh
    keep = ~in_removed_region(mesh.centroids(), pl)
    if not keep.any():
        raise FullResectionError("the cut removes the whole mesh")
    if keep.all():
        return mesh
    out = submesh(mesh, keep)
    sizes = component_sizes(out)
    if sizes.size > 1:
        log.warning("resected mesh has %d disconnected parts with %s cells", sizes.size, sizes.tolist())
    rep = validate_mesh(out)
    if not rep.ok:
        log.warning("clipped mesh: %s", "; ".join(rep.findings()[:5]))
    return out


def component_sizes(mesh: Mesh) -> np.ndarray:
    """Cell counts of the face-connected components (largest first)."""
    d = mesh.dim
    from .mesh import _LOCAL_FACETS
    f = np.sort(mesh.cells[:, _LOCAL_FACETS[d]].reshape(-1, d), axis=1)
    owner = np.repeat(np.arange(mesh.n_cells), d + 1)
    _, inv = np.unique(f, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    order = np.argsort(inv, kind="stable")
    s = inv[order]
    same = np.flatnonzero(s[1:] == s[:-1])
    a, b = owner[order][same], owner[order][same + 1]
    g = coo_matrix((np.ones(a.size), (a, b)), shape=(mesh.n_cells, mesh.n_cells))
    _, lab = connected_components(g, directed=False)
    return np.sort(np.bincount(lab))[::-1]


@dataclass
class PruneResult:
    tree: VascularTree
    orphans: list            # original ids of kept-side leaves cut off from the root
    removed_leaves: int      # original leaves no longer supplied (orphans included)
    node_map: np.ndarray     # original node id -> new id (-1 if removed)


def prune_tree(tree: VascularTree, planes) -> PruneResult:
    """Close every segment that meets the removed region, with its subtree."""
    pl = _pairs(planes)
    root = tree.root
    if pl and in_removed_region(tree.points[root][None], pl)[0]:
        raise RootResectedError("the tree root lies in the removed region")
    n = tree.n_nodes
    alive = np.ones(n, dtype=bool)
    if pl and tree.n_segments:
        hit = segment_hits_region(tree.points[tree.tail], tree.points[tree.head], pl)
        for s in tree.topological_order:
            h = int(tree.head[s])
            if hit[s] or not alive[int(tree.tail[s])]:
                alive[h] = False
    leaves = tree.leaves
    lost = leaves[~alive[leaves]]
    kept_side = ~in_removed_region(tree.points[lost], pl) if (pl and lost.size) else np.zeros(lost.size, bool)
    orphans = sorted(int(v) for v in lost[kept_side])
    # drop stubs: former branching nodes that lost every child
    was_leaf = np.zeros(n, dtype=bool)
    was_leaf[leaves] = True
    changed = True
    while changed:
        changed = False
        for s in tree.topological_order[::-1]:
            h = int(tree.head[s])
            if not alive[h] or was_leaf[h]:
                continue
            if not any(alive[int(tree.head[c])] for c in tree.children[h]):
                alive[h] = False
                changed = True
    node_map = np.full(n, -1, dtype=np.int64)
    node_map[alive] = np.arange(int(alive.sum()))
    seg = np.flatnonzero(alive[tree.head])
    pruned = VascularTree(points=tree.points[alive], tail=node_map[tree.tail[seg]], head=node_map[tree.head[seg]],
                          radius=tree.radius[seg], flow=tree.flow[seg], role=tree.role, q_perf=tree.q_perf)
    vm.validate_tree(pruned)
    return PruneResult(pruned, orphans, int(lost.size), node_map)


def redistribute_flow(tree: VascularTree, q_perf: float | None = None) -> VascularTree:
    """Spread ``q_perf`` evenly over the remaining leaves; radii stay fixed."""
    q_perf = tree.q_perf if q_perf is None else q_perf
    if tree.n_leaves == 0:
        raise NoSupplyError("no terminal remains after the cut")
    out = tree.with_(q_perf=q_perf)
    return out.with_(flow=vm._flows_from_leaf_flows(out, q_perf / tree.n_leaves))


@dataclass
class ResectionScenario:
    mesh: Mesh
    supplying: VascularTree
    draining: VascularTree
    material: Material
    planes: list = field(default_factory=list)
    coupling: CouplingSettings = field(default_factory=CouplingSettings)
    newton: NewtonSettings = field(default_factory=NewtonSettings)


@dataclass
class ResectionResult:
    pre: CaseResult
    post: CaseResult
    mesh: Mesh
    supplying: PruneResult
    draining: PruneResult
    q_term_pre: float
    q_term_post: float
    pre_leaves: tuple = (0, 0)   # (supplying, draining) leaf counts before the cut

    def comparison(self) -> list[dict]:
        a, b = self.pre.summary(), self.post.summary()
        rows = [{"quantity": k, "pre": a[k], "post": b[k]} for k in a]
        rows += [
            {"quantity": "supplying_leaves", "pre": self.pre_leaves[0], "post": self.supplying.tree.n_leaves},
            {"quantity": "draining_ports", "pre": len(self.pre.ports), "post": len(self.post.ports)},
            {"quantity": "orphans_supplying", "pre": 0, "post": len(self.supplying.orphans)},
            {"quantity": "orphans_draining", "pre": 0, "post": len(self.draining.orphans)},
            {"quantity": "q_term", "pre": self.q_term_pre, "post": self.q_term_post},
        ]
        return rows


def _kept_leaf_tree(tree: VascularTree, planes) -> VascularTree:
    """Fan of the draining leaves that survive on the kept side.

    Outlet ports only need leaf positions and radii; orphaned draining
    leaves keep draining passively, so every kept-side leaf stays.
    """
    leaves = tree.leaves
    keep = ~removed(tree.points[leaves], planes)
    if not keep.any():
        raise NoOutletError("every draining terminal lies in the removed region")
    segs = tree.leaf_segments()[keep]
    pts = np.vstack([tree.points[tree.root], tree.points[leaves[keep]]])
    m = int(keep.sum())
    return VascularTree(points=pts, tail=np.zeros(m, dtype=np.int64), head=np.arange(1, m + 1),
                        radius=tree.radius[segs], flow=tree.flow[segs], role=tree.role, q_perf=tree.q_perf)


def run_resection_case(sc: ResectionScenario) -> ResectionResult:
    """Solve before and after the cut at the same total perfusion."""
    pre = solve_case(sc.mesh, sc.supplying, sc.draining, sc.material, sc.coupling, sc.newton)
    mesh = clip_mesh(sc.mesh, sc.planes)
    ps = prune_tree(sc.supplying, sc.planes)
    pd = prune_tree(sc.draining, sc.planes)
    sup = redistribute_flow(ps.tree, sc.supplying.q_perf)
    dra_ports = _kept_leaf_tree(sc.draining, sc.planes)
    settings = sc.coupling
    if sc.planes:
        # ports cut in half by the plane may lose every node
        settings = replace(settings, allow_empty_ports=True)
    try:
        post = solve_case(mesh, sup, dra_ports, sc.material, settings, sc.newton)
    except BindingError as exc:
        raise NoOutletError(str(exc)) from exc
    return ResectionResult(pre, post, mesh, ps, pd, sc.supplying.q_term, sup.q_term,
                           (sc.supplying.n_leaves, sc.draining.n_leaves))


def orphan_fraction(result: ResectionResult) -> float:
    n = result.pre_leaves[0]
    return len(result.supplying.orphans) / n if n else math.nan
