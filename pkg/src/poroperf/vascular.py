"""Vascular tree graph and its steady Poiseuille hemodynamics.

A tree is stored as flat arrays (node coordinates, segment tail/head indices,
per-segment radius and flow). All functions are pure: they return new
:class:`VascularTree` instances and never mutate their input.

Units are SI throughout (m, m^3/s, Pa, Pa s, W/m^3).
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, TreeStateError, TreeStructureError

log = logging.getLogger(__name__)

#: 3.6 cP in Pa s
BLOOD_VISCOSITY = 3.6e-3
#: 0.6 uW/mm^3 in W/m^3
METABOLIC_DEMAND = 600.0


@dataclass(frozen=True)
class HemoParams:
    viscosity: float = BLOOD_VISCOSITY
    metabolic_demand: float = METABOLIC_DEMAND

    def __post_init__(self):
        if not self.viscosity > 0:
            raise DomainError(f"viscosity must be positive, got {self.viscosity}")
        if not self.metabolic_demand > 0:
            raise DomainError(f"metabolic demand must be positive, got {self.metabolic_demand}")


@dataclass(frozen=True)
class VesselNode:
    id: int
    position: np.ndarray
    kind: str  # root | branching | leaf


@dataclass(frozen=True)
class VesselSegment:
    tail: int
    head: int
    length: float
    radius: float
    flow: float


@dataclass(frozen=True, eq=False)
class VascularTree:
    """Rooted arborescence of straight cylindrical segments.

    ``radius`` and ``flow`` hold NaN until :func:`propagate_flows` and
    :func:`assign_radii` have been applied.
    """

    points: np.ndarray
    tail: np.ndarray
    head: np.ndarray
    radius: np.ndarray = None
    flow: np.ndarray = None
    role: str = "supplying"
    q_perf: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise TreeStructureError("points must be an (n, 2) or (n, 3) array")
        tail = np.asarray(self.tail, dtype=np.int64).reshape(-1)
        head = np.asarray(self.head, dtype=np.int64).reshape(-1)
        if tail.shape != head.shape:
            raise TreeStructureError("tail/head size mismatch")
        m = tail.size
        radius = np.full(m, np.nan) if self.radius is None else np.array(self.radius, dtype=float)
        flow = np.full(m, np.nan) if self.flow is None else np.array(self.flow, dtype=float)
        if radius.shape != (m,) or flow.shape != (m,):
            raise TreeStructureError("radius/flow must have one entry per segment")
        if self.role not in ("supplying", "draining"):
            raise TreeStructureError(f"unknown tree role {self.role!r}")
        for name, arr in (("points", pts), ("tail", tail), ("head", head),
                          ("radius", radius), ("flow", flow)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- structure -----------------------------------------------------
    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.points.shape[0]

    @property
    def n_segments(self) -> int:
        return self.tail.size

    def _structure(self):
        if "structure" not in self._cache:
            self._cache["structure"] = _check_arborescence(self.n_nodes, self.tail, self.head)
        return self._cache["structure"]

    @property
    def root(self) -> int:
        return self._structure()["root"]

    @property
    def leaves(self) -> np.ndarray:
        """Node ids with out-degree zero (excluding a lone root)."""
        return self._structure()["leaves"]

    @property
    def n_leaves(self) -> int:
        return int(self.leaves.size)

    @property
    def q_term(self) -> float:
        return self.q_perf / self.n_leaves

    @property
    def parent_segment(self) -> np.ndarray:
        """Index of the segment ending at each node (-1 for the root)."""
        return self._structure()["inseg"]

    @property
    def children(self) -> list[list[int]]:
        """Child segment indices of every node."""
        return self._structure()["children"]

    @property
    def topological_order(self) -> np.ndarray:
        """Segment indices ordered root-first (parents before children)."""
        return self._structure()["order"]

    @property
    def lengths(self) -> np.ndarray:
        d = self.points[self.head] - self.points[self.tail]
        return np.sqrt(np.einsum("ij,ij->i", d, d))

    def kinds(self) -> list[str]:
        out = ["branching"] * self.n_nodes
        for v in self.leaves:
            out[v] = "leaf"
        out[self.root] = "root"
        return out

    @property
    def nodes(self) -> list[VesselNode]:
        kinds = self.kinds()
        return [VesselNode(i, self.points[i], kinds[i]) for i in range(self.n_nodes)]

    @property
    def segments(self) -> list[VesselSegment]:
        lengths = self.lengths
        return [VesselSegment(int(t), int(h), float(l), float(r), float(q))
                for t, h, l, r, q in zip(self.tail, self.head, lengths, self.radius, self.flow)]

    def leaf_segments(self) -> np.ndarray:
        return self.parent_segment[self.leaves]

    def with_(self, **changes) -> "VascularTree":
        return replace(self, _cache={}, **changes)

    def __iter__(self) -> Iterator[VesselSegment]:
        return iter(self.segments)


def _check_arborescence(n_nodes, tail, head):
    m = tail.size
    if m and (tail.min() < 0 or head.min() < 0 or tail.max() >= n_nodes or head.max() >= n_nodes):
        raise TreeStructureError("segment references a node outside the node list")
    if m != n_nodes - 1:
        raise TreeStructureError(
            f"arborescence needs |segments| = |nodes| - 1, got {m} and {n_nodes}")
    indeg = np.bincount(head, minlength=n_nodes)
    if np.any(indeg > 1):
        raise TreeStructureError(f"node {int(np.argmax(indeg > 1))} has more than one parent")
    roots = np.flatnonzero(indeg == 0)
    if roots.size != 1:
        raise TreeStructureError(f"expected exactly one root, found {roots.size}")
    root = int(roots[0])
    inseg = np.full(n_nodes, -1, dtype=np.int64)
    inseg[head] = np.arange(m)
    children: list[list[int]] = [[] for _ in range(n_nodes)]
    for s, t in enumerate(tail.tolist()):
        children[t].append(s)
    order = []
    stack = [root]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for s in reversed(children[v]):
            order.append(s)
            stack.append(int(head[s]))
    if seen != n_nodes:
        raise TreeStructureError("segments contain a cycle or a disconnected node")
    outdeg = np.array([len(c) for c in children])
    leaves = np.flatnonzero(outdeg == 0)
    leaves = leaves[leaves != root]
    return {"root": root, "inseg": inseg, "children": children,
            "order": np.array(order, dtype=np.int64), "leaves": leaves}


def validate_tree(tree: VascularTree) -> None:
    """Raise :class:`TreeStructureError` unless the tree is an arborescence."""
    tree._cache.pop("structure", None)
    tree._structure()


# -- elementary laws ---------------------------------------------------------

def segment_resistance(length, radius, viscosity=BLOOD_VISCOSITY):
    """Poiseuille resistance ``8 eta l / (pi r^4)`` in Pa s/m^3."""
    length = np.asarray(length, dtype=float)
    radius = np.asarray(radius, dtype=float)
    if np.any(~(length > 0)) or np.any(~(radius > 0)) or not viscosity > 0:
        raise DomainError("length, radius and viscosity must be positive")
    out = 8.0 * viscosity * length / (math.pi * radius**4)
    return float(out) if out.ndim == 0 else out


def segment_pressure_drop(resistance, flow):
    resistance = np.asarray(resistance, dtype=float)
    flow = np.asarray(flow, dtype=float)
    if np.any(~(resistance >= 0)) or np.any(~(flow >= 0)):
        raise DomainError("resistance and flow must be non-negative")
    out = resistance * flow
    return float(out) if out.ndim == 0 else out


def mean_velocity(flow, radius):
    """Cross-section averaged velocity Q / (pi r^2)."""
    flow = np.asarray(flow, dtype=float)
    radius = np.asarray(radius, dtype=float)
    if np.any(~(radius > 0)):
        raise DomainError("radius must be positive")
    out = flow / (math.pi * radius**2)
    return float(out) if out.ndim == 0 else out


def cost_per_length(radius, flow, params: HemoParams = HemoParams()):
    """Volumetric plus viscous power per unit vessel length [W/m]."""
    radius = np.asarray(radius, dtype=float)
    flow = np.asarray(flow, dtype=float)
    vol = params.metabolic_demand * math.pi * radius**2
    vis = 8.0 * params.viscosity * flow**2 / (math.pi * radius**4)
    return vol + vis


def optimal_radius(flow, params: HemoParams = HemoParams()):
    """Radius minimising :func:`cost_per_length` for a given flow.

    Setting the radial derivative ``2 m_b pi r - 32 eta Q^2 / (pi r^5)`` to
    zero gives ``r^6 = 16 eta Q^2 / (pi^2 m_b)``.
    """
    flow = np.asarray(flow, dtype=float)
    if np.any(~(flow > 0)):
        raise DomainError("flow must be positive")
    out = (16.0 * params.viscosity * flow**2 / (math.pi**2 * params.metabolic_demand)) ** (1.0 / 6.0)
    return float(out) if out.ndim == 0 else out


# -- tree-level operations ---------------------------------------------------

def propagate_flows(tree: VascularTree) -> VascularTree:
    """Set leaf flows to ``q_perf / N`` and sum them upstream (Kirchhoff)."""
    tree._structure()
    if tree.n_leaves == 0:
        raise TreeStructureError("tree has no leaves")
    order = tree.topological_order
    leaf_count = np.zeros(tree.n_nodes, dtype=np.int64)
    leaf_count[tree.leaves] = 1
    for s in order[::-1]:
        leaf_count[tree.tail[s]] += leaf_count[tree.head[s]]
    flow = leaf_count[tree.head] * tree.q_term
    return tree.with_(flow=flow)


def _flows_from_leaf_flows(tree: VascularTree, leaf_flow: float) -> np.ndarray:
    acc = np.zeros(tree.n_nodes)
    acc[tree.leaves] = leaf_flow
    for s in tree.topological_order[::-1]:
        acc[tree.tail[s]] += acc[tree.head[s]]
    return acc[tree.head]


def assign_radii(tree: VascularTree, params: HemoParams = HemoParams(),
                 r_bounds: tuple[float, float] = (0.0, math.inf)) -> VascularTree:
    """Give every segment the cost-optimal radius for its flow.

    Because ``r^3`` is proportional to ``Q`` and flows obey Kirchhoff's law,
    the radii satisfy Murray's law at every junction. Radii outside
    ``r_bounds`` are clamped (which breaks Murray's law locally) and logged.
    """
    if tree.n_segments and not np.all(np.isfinite(tree.flow)):
        raise TreeStateError("flows must be propagated before assigning radii")
    radius = optimal_radius(tree.flow, params) if tree.n_segments else np.zeros(0)
    radius = np.atleast_1d(np.asarray(radius, dtype=float))
    lo, hi = r_bounds
    clamped = np.clip(radius, lo, hi)
    n_bad = int(np.count_nonzero(clamped != radius))
    if n_bad:
        log.warning("%d radii clamped to [%g, %g]", n_bad, lo, hi)
    return tree.with_(radius=clamped)


def cost_terms(tree: VascularTree, params: HemoParams = HemoParams()) -> tuple[float, float]:
    """Return ``(P_vol, P_vis)`` summed over all segments."""
    if tree.n_segments == 0:
        return 0.0, 0.0
    if not (np.all(np.isfinite(tree.radius)) and np.all(np.isfinite(tree.flow))):
        raise TreeStateError("radii and flows must be set")
    ell = tree.lengths
    r = tree.radius
    p_vol = float(np.sum(params.metabolic_demand * math.pi * ell * r**2))
    p_vis = float(np.sum(8.0 * params.viscosity / math.pi * ell / r**4 * tree.flow**2))
    return p_vol, p_vis


def tree_cost(tree: VascularTree, params: HemoParams = HemoParams()) -> float:
    p_vol, p_vis = cost_terms(tree, params)
    return p_vol + p_vis


def build_tree(points, tail, head, role="supplying", q_perf=1.0,
               params: HemoParams | None = HemoParams()) -> VascularTree:
    """Construct a tree and, unless ``params`` is None, set flows and radii."""
    tree = VascularTree(points=points, tail=tail, head=head, role=role, q_perf=q_perf)
    validate_tree(tree)
    if params is None:
        return tree
    return assign_radii(propagate_flows(tree), params)


def kirchhoff_residuals(tree: VascularTree) -> np.ndarray:
    """Relative flow imbalance ``|Q_in - sum Q_out| / Q_in`` at interior nodes."""
    out = []
    for v, segs in enumerate(tree.children):
        s_in = tree.parent_segment[v]
        if s_in < 0 or not segs:
            continue
        q_in = tree.flow[s_in]
        out.append(abs(q_in - tree.flow[segs].sum()) / q_in)
    return np.array(out)


def murray_residuals(tree: VascularTree) -> np.ndarray:
    """Relative Murray defect ``|r_p^3 - sum r_c^3| / r_p^3`` at interior nodes."""
    out = []
    for v, segs in enumerate(tree.children):
        s_in = tree.parent_segment[v]
        if s_in < 0 or not segs:
            continue
        rp3 = tree.radius[s_in] ** 3
        out.append(abs(rp3 - np.sum(tree.radius[segs] ** 3)) / rp3)
    return np.array(out)


def segment_table(tree: VascularTree, params: HemoParams = HemoParams()) -> dict[str, np.ndarray]:
    """Per-segment length, radius, flow, pressure drop and mean velocity."""
    ell = tree.lengths
    res = 8.0 * params.viscosity * ell / (math.pi * tree.radius**4)
    return {
        "tail": tree.tail, "head": tree.head, "l": ell, "r": tree.radius, "q": tree.flow,
        "dp": res * tree.flow, "v": tree.flow / (math.pi * tree.radius**2),
    }


def bound_violations(tree: VascularTree, l_bounds=(0.0, math.inf),
                     r_bounds=(0.0, math.inf)) -> dict[str, int]:
    ell = tree.lengths
    return {
        "length_below": int(np.count_nonzero(ell < l_bounds[0])),
        "length_above": int(np.count_nonzero(ell > l_bounds[1])),
        "radius_below": int(np.count_nonzero(tree.radius < r_bounds[0])),
        "radius_above": int(np.count_nonzero(tree.radius > r_bounds[1])),
    }


# -- serialization -----------------------------------------------------------

def _num(x: float):
    x = float(x)
    return None if not math.isfinite(x) else x


def tree_to_dict(tree: VascularTree) -> dict:
    kinds = tree.kinds()
    ell = tree.lengths
    return {
        "role": tree.role,
        "q_perf": tree.q_perf,
        "nodes": [{"id": i, "x": [float(c) for c in tree.points[i]], "kind": kinds[i]}
                  for i in range(tree.n_nodes)],
        "segments": [{"tail": int(t), "head": int(h), "l": float(l), "r": _num(r), "q": _num(q)}
                     for t, h, l, r, q in zip(tree.tail, tree.head, ell, tree.radius, tree.flow)],
    }


def tree_from_dict(data: dict) -> VascularTree:
    nodes = sorted(data["nodes"], key=lambda n: n["id"])
    if [n["id"] for n in nodes] != list(range(len(nodes))):
        raise TreeStructureError("node ids must be 0..n-1")
    segs = data["segments"]
    nan = float("nan")
    tree = VascularTree(
        points=np.array([n["x"] for n in nodes], dtype=float),
        tail=[s["tail"] for s in segs], head=[s["head"] for s in segs],
        radius=[nan if s.get("r") is None else s["r"] for s in segs],
        flow=[nan if s.get("q") is None else s["q"] for s in segs],
        role=data.get("role", "supplying"), q_perf=float(data["q_perf"]),
    )
    validate_tree(tree)
    return tree


def dumps_tree(tree: VascularTree) -> str:
    return json.dumps(tree_to_dict(tree), indent=1, sort_keys=True) + "\n"


def save_tree(tree: VascularTree, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_tree(tree))


def load_tree(path) -> VascularTree:
    with open(path) as fh:
        return tree_from_dict(json.load(fh))


def write_segment_csv(tree: VascularTree, path, params: HemoParams = HemoParams()) -> None:
    table = segment_table(tree, params)
    keys = ["tail", "head", "l", "r", "q", "dp", "v"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for row in zip(*(table[k] for k in keys)):
            w.writerow([int(row[0]), int(row[1])] + [repr(float(x)) for x in row[2:]])


def subtree_nodes(tree: VascularTree, node: int) -> list[int]:
    """All nodes downstream of ``node`` (inclusive)."""
    out = [node]
    stack = [node]
    while stack:
        v = stack.pop()
        for s in tree.children[v]:
            h = int(tree.head[s])
            out.append(h)
            stack.append(h)
    return out


def fan_tree(root: Sequence[float], terminals, role="supplying", q_perf=1.0,
             params: HemoParams = HemoParams()) -> VascularTree:
    """Star-shaped tree connecting ``root`` directly to every terminal."""
    term = np.atleast_2d(np.asarray(terminals, dtype=float))
    root = np.asarray(root, dtype=float).reshape(1, -1)
    n = term.shape[0]
    pts = np.vstack([root, term])
    return build_tree(pts, np.zeros(n, dtype=np.int64), np.arange(1, n + 1), role, q_perf, params)
