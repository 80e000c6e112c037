"""Supplying/draining tree synthesis by swap-based simulated annealing.

Pipeline per tree: uniform terminal sampling, fan initialisation, then
temperature levels of random swaps (detach a subtree, re-attach it by
splitting another segment with a new branching node). A candidate's cost
change is evaluated with the new branching node at its weighted Fermat
point; after every level the positions of all branching nodes are
re-optimised globally (L-BFGS over node coordinates).

With radii at their closed-form optimum the per-segment cost is
``w(Q) * length``, so geometry optimisation is a weighted Steiner problem
and Murray's law holds by construction.
"""
from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import vascular as vm
from .domain import PerfusionDomain, sample_terminals
from .errors import DegeneracyError, DomainError, OptimizerError
from ._kernels import net_close_pairs, weber_point
from .geometry import count_close_pairs
from .vascular import HemoParams, VascularTree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnealingSchedule:
    t0_factor: float = 0.1       # T0 = t0_factor * |initial cost|
    cooling: float = 0.95
    proposals_per_terminal: int = 2
    patience: int = 3            # levels without accepted improvement before stopping
    max_levels: int = 400

    def __post_init__(self):
        if not self.t0_factor > 0:
            raise ValueError("T0 must be positive")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling factor must lie in (0, 1)")


@dataclass(frozen=True)
class SynthesisConfig:
    n_terminals: int = 50
    seed: int = 0
    q_perf: float = 800e-9
    schedule: AnnealingSchedule = field(default_factory=AnnealingSchedule)
    geom_max_iter: int = 3000
    geom_level_iter: int = 60    # cheaper per-level geometry pass during annealing
    geom_gtol: float = 1e-9
    eps: float = 1e-9            # [m] smoothing of |x_u - x_v| near 0
    clearance: float = 1.0
    l_bounds: tuple = (0.0, math.inf)
    r_bounds: tuple = (0.0, math.inf)
    hemo: HemoParams = field(default_factory=HemoParams)
    polish_rounds: int = 5

    def __post_init__(self):
        if self.n_terminals < 1:
            raise ValueError("n_terminals must be >= 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


@dataclass
class SynthesisResult:
    supplying: VascularTree
    draining: VascularTree
    log: list[dict]
    converged: bool
    intersections: int
    fan_costs: tuple[float, float]
    violations: dict


# ---------------------------------------------------------------------------
# simulated annealing acceptance

def sa_accept(delta: float, temperature: float, rng) -> bool:
    """Metropolis rule: always take improvements, else ``exp(-delta/T)``."""
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    if delta <= 0:
        return True
    if temperature == 0:
        return False
    return rng.random() < math.exp(-delta / temperature)


# ---------------------------------------------------------------------------
# mutable working representation

def _weight_table(n_leaves, q_term, params, r_bounds):
    k = np.arange(n_leaves + 1, dtype=float)
    q = k * q_term
    r = np.zeros_like(q)
    r[1:] = np.clip(vm.optimal_radius(q[1:], params), *r_bounds)
    w = np.zeros_like(q)
    w[1:] = vm.cost_per_length(r[1:], q[1:], params)
    return w.tolist(), r.tolist()


class _WorkTree:
    """Slot-based mutable tree used inside the annealing loop.

    Slot 0 is the root; slots 1..N are the terminals; further slots hold
    branching nodes. ``parent[u] == -2`` marks a free slot.
    """

    def __init__(self, points, parent, n_leaves, wtab, rtab, eps):
        cap = 2 * n_leaves + 2
        d = len(points[0])
        self.dim = d
        self.n_leaves = n_leaves
        self.eps = eps
        self.wtab = wtab
        self.rtab = rtab
        self.xy = [tuple(map(float, p)) for p in points] + [None] * (cap - len(points))
        self.P = np.zeros((cap, d))
        self.P[:len(points)] = points
        self.parent = list(parent) + [-2] * (cap - len(points))
        self.children = [[] for _ in range(cap)]
        for u, p in enumerate(self.parent):
            if p >= 0:
                self.children[p].append(u)
        self.is_leaf = [False] * cap
        for u in range(1, n_leaves + 1):
            self.is_leaf[u] = True
        self.nl = [0] * cap
        self._recount()
        self.free = [u for u in range(cap) if self.parent[u] == -2]
        self.free.reverse()
        self.movable = [u for u in range(1, cap) if self.parent[u] >= 0]
        self.where = {u: i for i, u in enumerate(self.movable)}
        self.version = 0
        self._geom = None

    def _recount(self):
        order = self.preorder()
        for u in reversed(order):
            self.nl[u] = 1 if self.is_leaf[u] else sum(self.nl[c] for c in self.children[u])

    def preorder(self):
        out, stack = [], [0]
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(reversed(self.children[u]))
        return out

    def active(self):
        return [u for u in range(len(self.parent)) if self.parent[u] >= 0]

    def cost(self):
        xy, par, w, nl = self.xy, self.parent, self.wtab, self.nl
        return sum(w[nl[u]] * math.dist(xy[par[u]], xy[u]) for u in self.movable)

    def _add_movable(self, u):
        self.where[u] = len(self.movable)
        self.movable.append(u)

    def _remove_movable(self, u):
        i = self.where.pop(u)
        last = self.movable.pop()
        if last != u:
            self.movable[i] = last
            self.where[last] = i

    def is_descendant(self, b, v):
        par = self.parent
        while b > 0:
            if b == v:
                return True
            b = par[b]
        return b == v

    # -- swap evaluation ---------------------------------------------------
    def evaluate(self, v, b):
        """Cost change of moving subtree ``v`` onto segment ``parent(b) -> b``.

        Returns ``None`` for an invalid move, else ``(delta, move)``.
        """
        par, ch, nl, xy, w = self.parent, self.children, self.nl, self.xy, self.wtab
        p = par[v]
        if b == v or b == 0 or par[b] < 0 or p < 0:
            return None
        if p == 0 and len(ch[0]) == 1:
            return None
        dissolve = p != 0 and len(ch[p]) == 2
        s = g = -1
        if dissolve:
            s = ch[p][0] if ch[p][1] == v else ch[p][1]
            g = par[p]
            if b == p or b == s:
                return None
        if self.is_descendant(b, v):
            return None
        nv = nl[v]
        dist = math.dist
        delta = -w[nv] * dist(xy[p], xy[v])
        lost = {}
        u = p
        while u != 0:
            lost[u] = nl[u] - nv
            delta += (w[nl[u] - nv] - w[nl[u]]) * dist(xy[par[u]], xy[u])
            u = par[u]
        if dissolve:
            delta += w[nl[s]] * (dist(xy[g], xy[s]) - dist(xy[g], xy[p]) - dist(xy[p], xy[s]))

        def parent2(x):
            return g if (dissolve and x == s) else par[x]

        a = parent2(b)
        kb = lost.get(b, nl[b])
        w_in, w_b, w_v = w[kb + nv], w[kb], w[nv]
        y = _weber3(xy[a], xy[b], xy[v], w_in, w_b, w_v, self.eps)
        delta += (w_in * dist(xy[a], y) + w_b * dist(y, xy[b]) + w_v * dist(y, xy[v])
                  - w_b * dist(xy[a], xy[b]))
        gained = []
        u = a
        while u != 0:
            k = lost.get(u, nl[u])
            pu = parent2(u)
            delta += (w[k + nv] - w[k]) * dist(xy[pu], xy[u])
            gained.append((pu, u, k + nv, k))
            u = pu
        move = {"v": v, "b": b, "p": p, "a": a, "y": y, "dissolve": dissolve, "s": s, "g": g,
                "kb": kb, "nv": nv, "gained": gained}
        return delta, move

    def new_segments(self, move):
        """Segments (x0, x1, radius) created or thickened by ``move``."""
        xy, r = self.xy, self.rtab
        a, b, v, y = move["a"], move["b"], move["v"], move["y"]
        kb, nv = move["kb"], move["nv"]
        after = [(xy[a], y, r[kb + nv]), (y, xy[b], r[kb]), (y, xy[v], r[nv])]
        before = [(xy[a], xy[b], r[self.nl[b]]), (xy[move["p"]], xy[v], r[nv])]
        if move["dissolve"]:
            g, p, s = move["g"], move["p"], move["s"]
            after.append((xy[g], xy[s], r[self.nl[s]]))
            before.append((xy[g], xy[p], r[self.nl[p]]))
            before.append((xy[p], xy[s], r[self.nl[s]]))
        for pu, u, k_new, k_old in move["gained"]:
            if u == b:
                continue
            after.append((xy[pu], xy[u], r[k_new]))
            before.append((xy[pu], xy[u], r[self.nl[u]]))
        return before, after

    def new_lengths(self, move):
        xy = self.xy
        out = [math.dist(xy[move["a"]], move["y"]), math.dist(move["y"], xy[move["b"]]),
               math.dist(move["y"], xy[move["v"]])]
        if move["dissolve"]:
            out.append(math.dist(xy[move["g"]], xy[move["s"]]))
        return out

    def apply(self, move):
        par, ch, nl = self.parent, self.children, self.nl
        v, b, p, a, nv = move["v"], move["b"], move["p"], move["a"], move["nv"]
        ch[p].remove(v)
        u = p
        while u != -1:
            nl[u] -= nv
            u = par[u]
        if move["dissolve"]:
            g, s = move["g"], move["s"]
            ch[g][ch[g].index(p)] = s
            par[s] = g
            ch[p] = []
            n = p  # reuse the slot
        else:
            n = self.free.pop()
            self._add_movable(n)
        ch[a][ch[a].index(b)] = n
        par[n] = a
        par[b] = n
        par[v] = n
        ch[n] = [b, v]
        nl[n] = nl[b] + nv
        u = a
        while u != -1:
            nl[u] += nv
            u = par[u]
        self.set_pos(n, move["y"])
        return n

    def set_pos(self, u, y):
        self.xy[u] = tuple(y)
        self.P[u] = y
        self.version += 1

    # -- vector views --------------------------------------------------------
    def segment_arrays(self):
        idx = np.array(self.movable, dtype=np.int64)
        idx.sort()
        par = np.array([self.parent[u] for u in idx], dtype=np.int64)
        k = np.array([self.nl[u] for u in idx], dtype=np.int64)
        return idx, par, k

    def segment_geometry(self):
        if self._geom is None or self._geom[0] != self.version:
            idx, par, k = self.segment_arrays()
            r = np.asarray(self.rtab)[k]
            x0, x1 = self.P[par], self.P[idx]
            self._geom = (self.version, (x0, x1, r, np.minimum(x0, x1) - r[:, None],
                                         np.maximum(x0, x1) + r[:, None]))
        return self._geom[1][:3]

    def padded_boxes(self):
        self.segment_geometry()
        return self._geom[1]

    def branching_slots(self):
        return sorted(u for u in self.movable if not self.is_leaf[u])

    def global_optimize(self, max_iter, gtol, other=None, clearance=1.0):
        """Optimise all branching node positions; never increases cost.

        With ``other`` given, the result is accepted only if it does not
        increase the number of close pairs against that tree (the step is
        halved until it does not).
        """
        free = self.branching_slots()
        if not free:
            return 0.0
        idx, par, k = self.segment_arrays()
        w = np.asarray(self.wtab)[k]
        x_new, f_old, f_new = _optimize_positions(self.P, free, par, idx, w, self.eps, max_iter, gtol)
        if not f_new < f_old:
            return 0.0
        x_old = self.P[free].copy()
        if other is not None:
            before = self.count_against(other, clearance)
            step = 1.0
            while step > 1e-3:
                trial = x_old + step * (x_new - x_old)
                self.P[free] = trial
                self.version += 1
                if self.count_against(other, clearance) <= before:
                    break
                step *= 0.5
            else:
                self.P[free] = x_old
                self.version += 1
                return 0.0
        else:
            self.P[free] = x_new
        for u in free:
            self.xy[u] = tuple(self.P[u].tolist())
        self.version += 1
        return f_old - self.cost()

    def count_against(self, other, clearance):
        a0, a1, ra = self.segment_geometry()
        b0, b1, rb = other.segment_geometry()
        sign = np.ones(ra.size, dtype=np.int64)
        return int(net_close_pairs(a0, a1, ra * clearance, sign, b0, b1, rb * clearance))

    def to_tree(self, role, q_perf, params, r_bounds) -> VascularTree:
        order = self.preorder()
        new_id = {u: i for i, u in enumerate(order)}
        pts = self.P[order]
        tail = [new_id[self.parent[u]] for u in order[1:]]
        head = list(range(1, len(order)))
        tree = VascularTree(points=pts, tail=tail, head=head, role=role, q_perf=q_perf)
        return vm.assign_radii(vm.propagate_flows(tree), params, r_bounds)


def _weber3(a, b, c, wa, wb, wc, eps, iters=40, rtol=1e-8):
    """Weighted Fermat point of three points by smoothed Weiszfeld iteration."""
    y = weber_point(np.array((a, b, c)), np.array((wa, wb, wc)), eps, iters, rtol)
    return tuple(y.tolist())


def _optimize_positions(P, free, par, idx, w, eps, max_iter, gtol):
    """Minimise ``sum w_a sqrt(|x_head - x_tail|^2 + eps^2)`` over ``P[free]``."""
    free = np.asarray(free, dtype=np.int64)
    dim = P.shape[1]
    lo, hi = P[idx].min(axis=0), P[idx].max(axis=0)
    center = 0.5 * (lo + hi)
    L = float(max(np.max(hi - lo), eps))
    X = P.copy()

    def seg_cost(Y):
        d = Y[idx] - Y[par]
        ln = np.sqrt(np.einsum("ij,ij->i", d, d) + eps * eps)
        return d, ln

    _, ln0 = seg_cost(X)
    f0 = float(np.sum(w * ln0))
    if not np.isfinite(f0):
        raise OptimizerError("non-finite tree cost")
    fscale = f0 if f0 > 0 else 1.0
    slot_of = np.full(P.shape[0], -1, dtype=np.int64)
    slot_of[free] = np.arange(free.size)

    def fun(z):
        X[free] = center + L * z.reshape(-1, dim)
        d, ln = seg_cost(X)
        f = float(np.sum(w * ln))
        gseg = (w / ln)[:, None] * d
        g = np.zeros((free.size, dim))
        h = slot_of[idx]
        t = slot_of[par]
        mh = h >= 0
        mt = t >= 0
        for k in range(dim):
            g[:, k] += np.bincount(h[mh], weights=gseg[mh, k], minlength=free.size)
            g[:, k] -= np.bincount(t[mt], weights=gseg[mt, k], minlength=free.size)
        return f / fscale, (g * L / fscale).ravel()

    z0 = ((P[free] - center) / L).ravel()
    res = minimize(fun, z0, jac=True, method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": gtol, "ftol": 1e-15, "maxcor": 20})
    f1 = float(res.fun) * fscale
    if not np.isfinite(f1):
        raise OptimizerError("geometry optimiser produced a non-finite cost")
    x = center + L * res.x.reshape(-1, dim)
    return x, f0, f1


# ---------------------------------------------------------------------------
# public tree-level operations

def init_fan(root, terminals, role="supplying", q_perf=800e-9, params: HemoParams = HemoParams()) -> VascularTree:
    """Connect ``root`` directly to every terminal."""
    term = np.atleast_2d(np.asarray(terminals, dtype=float))
    root = np.asarray(root, dtype=float)
    if np.any(np.all(np.isclose(term, root, rtol=0, atol=1e-15), axis=1)):
        raise DegeneracyError("root coincides with a terminal")
    return vm.fan_tree(root, term, role=role, q_perf=q_perf, params=params)


def _work_from_tree(tree: VascularTree, params, r_bounds, eps):
    """Relabel so the root is slot 0 and leaves are slots 1..N."""
    leaves = list(tree.leaves)
    others = [u for u in range(tree.n_nodes) if u != tree.root and u not in set(leaves)]
    order = [tree.root] + leaves + others
    slot = {u: i for i, u in enumerate(order)}
    parent = [-1] * len(order)
    for t, h in zip(tree.tail, tree.head):
        parent[slot[int(h)]] = slot[int(t)]
    wtab, rtab = _weight_table(len(leaves), tree.q_term, params, r_bounds)
    wt = _WorkTree(tree.points[order], parent, len(leaves), wtab, rtab, eps)
    return wt, order


def _pick_move(wt: _WorkTree, rng, tries=20):
    mov = wt.movable
    for _ in range(tries):
        v = mov[int(rng.random() * len(mov))]
        b = mov[int(rng.random() * len(mov))]
        res = wt.evaluate(v, b)
        if res is not None:
            return res
    return None


def propose_swap(tree: VascularTree, rng, params: HemoParams = HemoParams(), return_move=False):
    """Random swap candidate of ``tree``; leaf positions are unchanged.

    The moved subtree root ``v`` and target segment (identified by its head
    node ``b``) are drawn uniformly; invalid pairs (target inside the moved
    subtree) are resampled.
    """
    if tree.n_segments < 2:
        raise DegeneracyError("a swap needs at least two segments")
    wt, order = _work_from_tree(tree, params, (0.0, math.inf), 1e-9)
    res = _pick_move(wt, rng, tries=1000)
    if res is None:
        raise DegeneracyError("no valid swap target found")
    _, move = res
    wt.apply(move)
    cand = wt.to_tree(tree.role, tree.q_perf, params, (0.0, math.inf))
    if return_move:
        return cand, (order[move["v"]], order[move["b"]])
    return cand


def apply_swap(tree: VascularTree, node: int, target_head: int, params: HemoParams = HemoParams()) -> VascularTree:
    """Detach ``node`` and attach it to the segment ending at ``target_head``."""
    wt, order = _work_from_tree(tree, params, (0.0, math.inf), 1e-9)
    slot = {u: i for i, u in enumerate(order)}
    res = wt.evaluate(slot[node], slot[target_head])
    if res is None:
        raise DegeneracyError(f"swap of node {node} onto segment ->{target_head} is invalid")
    wt.apply(res[1])
    return wt.to_tree(tree.role, tree.q_perf, params, (0.0, math.inf))


def valid_swaps(tree: VascularTree) -> list[tuple[int, int]]:
    """All (node, target_head) pairs accepted by the swap move."""
    wt, order = _work_from_tree(tree, HemoParams(), (0.0, math.inf), 1e-9)
    out = []
    for v in wt.movable:
        for b in wt.movable:
            if wt.evaluate(v, b) is not None:
                out.append((order[v], order[b]))
    return sorted(out)


def geometry_optimize(tree: VascularTree, config: SynthesisConfig = SynthesisConfig()) -> VascularTree:
    """Move branching nodes to minimise total cost; root and leaves stay fixed."""
    free = [u for u in range(tree.n_nodes) if u != tree.root and u not in set(tree.leaves.tolist())]
    if not free:
        return tree
    w = vm.cost_per_length(tree.radius, tree.flow, config.hemo)
    x, f0, f1 = _optimize_positions(tree.points.copy(), free, tree.tail, tree.head, w,
                                    config.eps, config.geom_max_iter, config.geom_gtol)
    if not f1 < f0:
        return tree
    pts = tree.points.copy()
    pts[free] = x
    out = tree.with_(points=pts)
    if vm.tree_cost(out, config.hemo) > vm.tree_cost(tree, config.hemo):
        return tree
    return out


def trees_intersect(a: VascularTree, b: VascularTree, clearance: float = 1.0) -> bool:
    return count_intersections(a, b, clearance) > 0


def count_intersections(a: VascularTree, b: VascularTree, clearance: float = 1.0) -> int:
    """Number of segment pairs closer than ``clearance * (r_a + r_b)``."""
    if a.dim != b.dim:
        raise ValueError("trees live in different dimensions")
    return count_close_pairs(a.points[a.tail], a.points[a.head], a.radius,
                             b.points[b.tail], b.points[b.head], b.radius, clearance)


# ---------------------------------------------------------------------------
# the annealing driver

class _Annealer:
    def __init__(self, trees: Sequence[_WorkTree], config: SynthesisConfig, rng: random.Random):
        self.trees = list(trees)
        self.cfg = config
        self.rng = rng
        self.log: list[dict] = []

    def _propose(self, i, temperature):
        wt = self.trees[i]
        other = self.trees[1 - i] if len(self.trees) == 2 else None
        res = _pick_move(wt, self.rng)
        if res is None:
            return 0, 0
        delta, move = res
        if not sa_accept(delta, temperature, self.rng):
            return 0, 0
        lmin = self.cfg.l_bounds[0]
        if lmin > 0 and min(wt.new_lengths(move)) < lmin:
            return 0, 0
        if other is not None:
            before, after = wt.new_segments(move)
            if self._net_hits(before, after, other) > 0:
                return 0, 0
        wt.apply(move)
        return 1, int(delta < -1e-9 * abs(self.cost_scale[i]))

    def _net_hits(self, before, after, other):
        """(close pairs of ``after``) - (close pairs of ``before``) against ``other``."""
        segs = before + after
        sign = np.r_[-np.ones(len(before), dtype=np.int64), np.ones(len(after), dtype=np.int64)]
        a0 = np.array([s[0] for s in segs])
        a1 = np.array([s[1] for s in segs])
        cl = self.cfg.clearance
        ra = np.array([s[2] for s in segs]) * cl
        b0, b1, rb = other.segment_geometry()
        return int(net_close_pairs(a0, a1, ra, sign, b0, b1, rb * cl))

    def _sweep(self, temps, n_props):
        acc = [0] * len(self.trees)
        imp = [0] * len(self.trees)
        for _ in range(n_props):
            for i in range(len(self.trees)):
                if self.trees[i].n_leaves < 2:
                    continue
                a, g = self._propose(i, temps[i])
                acc[i] += a
                imp[i] += g
        return acc, imp

    def _global(self, max_iter):
        for i, wt in enumerate(self.trees):
            other = self.trees[1 - i] if len(self.trees) == 2 else None
            wt.global_optimize(max_iter, self.cfg.geom_gtol, other, self.cfg.clearance)

    def run(self):
        cfg, sched = self.cfg, self.cfg.schedule
        costs = [wt.cost() for wt in self.trees]
        self.cost_scale = costs
        temps = [sched.t0_factor * abs(c) for c in costs]
        n_props = sched.proposals_per_terminal * max(wt.n_leaves for wt in self.trees)
        quiet = [0] * len(self.trees)
        converged = False
        for level in range(sched.max_levels):
            acc, imp = self._sweep(temps, n_props)
            self._global(cfg.geom_level_iter)
            for i, wt in enumerate(self.trees):
                quiet[i] = 0 if imp[i] else quiet[i] + 1
                self.log.append({"level": level, "tree": i, "temperature": temps[i], "cost": wt.cost(),
                                 "accepted": acc[i], "improved": imp[i], "proposals": n_props})
            if all(q >= sched.patience or wt.n_leaves < 2 for q, wt in zip(quiet, self.trees)):
                converged = True
                break
            temps = [t * sched.cooling for t in temps]
        # greedy polishing at T = 0
        for rnd in range(cfg.polish_rounds):
            acc, imp = self._sweep([0.0] * len(self.trees), n_props)
            self._global(cfg.geom_max_iter)
            for i, wt in enumerate(self.trees):
                self.log.append({"level": f"polish{rnd}", "tree": i, "temperature": 0.0, "cost": wt.cost(),
                                 "accepted": acc[i], "improved": imp[i], "proposals": n_props})
            if not any(imp):
                break
        return converged


def default_roots(domain: PerfusionDomain):
    """Supplying and draining roots diametrically opposite on the boundary."""
    lo, hi = (np.asarray(b, dtype=float) for b in domain.bounds())
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi[0] - lo[0])
    e = np.zeros_like(c)
    e[0] = half
    return c - e, c + e


def synthesize_tree(domain: PerfusionDomain, root, config: SynthesisConfig = SynthesisConfig(),
                    role="supplying", terminals=None) -> VascularTree:
    """Single-tree synthesis (no intersection constraint)."""
    rng = np.random.default_rng(config.seed)
    if terminals is None:
        terminals = sample_terminals(domain, config.n_terminals, rng)
    fan = init_fan(root, terminals, role, config.q_perf, config.hemo)
    wt, _ = _work_from_tree(fan, config.hemo, config.r_bounds, config.eps)
    ann = _Annealer([wt], config, random.Random(config.seed))
    ann.run()
    return wt.to_tree(role, config.q_perf, config.hemo, config.r_bounds)


def _on_or_inside(domain: PerfusionDomain, x, rel_tol=1e-9) -> bool:
    """Inside, or within ``rel_tol * diameter`` of an interior point along an axis."""
    x = np.asarray(x, dtype=float)
    lo, hi = domain.bounds()
    if x.shape != lo.shape:
        return False
    step = rel_tol * float(np.linalg.norm(hi - lo))
    probes = np.vstack([x, x + step * np.eye(x.size), x - step * np.eye(x.size)])
    return bool(domain.contains(probes).any())


def synthesize_pair(domain: PerfusionDomain, roots=None, config: SynthesisConfig = SynthesisConfig()) -> SynthesisResult:
    """Generate one supplying and one draining tree inside ``domain``.

    Swaps that increase the number of supplying/draining segment pairs
    closer than ``clearance * (r_a + r_b)`` are always rejected. The
    returned result carries a ``converged`` flag (False when the level
    budget ran out) and the final intersection count.
    """
    if roots is None:
        roots = default_roots(domain)
    root_s, root_d = (np.asarray(r, dtype=float) for r in roots)
    for name, r in (("supplying", root_s), ("draining", root_d)):
        if not _on_or_inside(domain, r):
            raise DomainError(f"{name} root {tuple(r)} lies outside the perfusion domain")
    ss = np.random.SeedSequence(config.seed)
    rs, rd, rsa = (np.random.default_rng(s) for s in ss.spawn(3))
    term_s = sample_terminals(domain, config.n_terminals, rs)
    term_d = sample_terminals(domain, config.n_terminals, rd)
    fans = [init_fan(root_s, term_s, "supplying", config.q_perf, config.hemo),
            init_fan(root_d, term_d, "draining", config.q_perf, config.hemo)]
    fan_costs = tuple(vm.tree_cost(f, config.hemo) for f in fans)
    works = [_work_from_tree(f, config.hemo, config.r_bounds, config.eps)[0] for f in fans]
    ann = _Annealer(works, config, random.Random(int(rsa.integers(2**63))))
    converged = ann.run()
    if not converged:
        log.warning("annealing stopped at the level budget; returning best-so-far trees")
    sup = works[0].to_tree("supplying", config.q_perf, config.hemo, config.r_bounds)
    dra = works[1].to_tree("draining", config.q_perf, config.hemo, config.r_bounds)
    n_int = count_intersections(sup, dra, config.clearance)
    if n_int:
        log.warning("%d supplying/draining segment pairs violate the clearance", n_int)
    viol = {role: vm.bound_violations(t, config.l_bounds, config.r_bounds)
            for role, t in (("supplying", sup), ("draining", dra))}
    return SynthesisResult(sup, dra, ann.log, converged, n_int, fan_costs, viol)


def write_synthesis_log(rows: list[dict], path) -> None:
    keys = ["level", "tree", "temperature", "cost", "accepted", "improved", "proposals"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in keys})
