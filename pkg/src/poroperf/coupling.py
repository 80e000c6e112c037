"""Tree terminals as continuum data: bell-shaped sources and outlet ports."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import BindingError, SourcePlacementError, TreeStateError
from .fem.assembly import Assembler, PoroProblem
from .vascular import VascularTree

log = logging.getLogger(__name__)

#: bell tails beyond exp(-CUTOFF2) are dropped in field evaluation
CUTOFF2 = 40.0


@dataclass(frozen=True)
class InletSource:
    center: tuple
    radius: float
    flow: float
    b: float
    gamma: float

    @property
    def width(self) -> float:
        return self.b * self.radius


@dataclass(frozen=True)
class OutletPort:
    center: tuple
    radius: float
    s: float
    dofs: tuple


def source_amplitude(flow, radius, b, dim):
    """Peak value making the whole-space integral of the bell equal ``flow``."""
    base = math.pi * b * b * radius * radius
    return flow / (base if dim == 2 else base ** 1.5)


def build_sources(tree: VascularTree, b: float = 3.0) -> list[InletSource]:
    """One source per leaf of a supplying tree."""
    if not b > 0:
        raise ValueError("b must be positive")
    seg = tree.leaf_segments()
    r, q = tree.radius[seg], tree.flow[seg]
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(q))):
        raise TreeStateError("leaf segments need radii and flows")
    return [InletSource(tuple(map(float, tree.points[v])), float(ri), float(qi), float(b),
                        source_amplitude(qi, ri, b, tree.dim))
            for v, ri, qi in zip(tree.leaves, r, q)]


def source_field(sources, x) -> np.ndarray:
    """``theta(x) = sum_i gamma_i exp(-|x - x_i|^2 / (b r_i)^2)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape[0])
    for s in sources:
        d2 = np.sum((x - np.asarray(s.center)) ** 2, axis=1)
        out += s.gamma * np.exp(-d2 / s.width ** 2)
    return out


def _source_qp(sources, asm: Assembler):
    """Sparse per-source bell values at cell quadrature points (unit amplitude)."""
    xq = asm.quadrature_points().reshape(-1, asm.dim)
    tree = cKDTree(xq)
    out = []
    for s in sources:
        idx = np.asarray(tree.query_ball_point(s.center, math.sqrt(CUTOFF2) * s.width), dtype=np.int64)
        idx.sort()
        d2 = np.sum((xq[idx] - np.asarray(s.center)) ** 2, axis=1)
        out.append((idx, np.exp(-d2 / s.width ** 2)))
    return out


def _qp_weights(asm: Assembler):
    return (asm.vol[:, None] * asm.w_q[None, :]).ravel()


def discrete_integrals(sources, asm: Assembler) -> np.ndarray:
    """Mesh-quadrature integral of every bell."""
    wq = _qp_weights(asm)
    return np.array([s.gamma * np.sum(wq[i] * v) for s, (i, v) in zip(sources, _source_qp(sources, asm))])


def normalize_sources(sources, asm: Assembler) -> list[InletSource]:
    """Rescale amplitudes so each discrete integral equals its vessel flow."""
    ints = discrete_integrals(sources, asm)
    out = []
    for s, I in zip(sources, ints):
        if not I >= 1e-6 * s.flow:
            raise SourcePlacementError(f"source at {s.center} lies (almost) outside the mesh")
        out.append(replace(s, gamma=s.gamma * s.flow / I))
    return out


def source_load(sources, asm: Assembler) -> np.ndarray:
    """P2 load vector ``int theta M_q``."""
    theta = np.zeros(asm.vol.size * asm.w_q.size)
    for s, (i, v) in zip(sources, _source_qp(sources, asm)):
        np.add.at(theta, i, s.gamma * v)
    return asm.load_from_qp(theta.reshape(asm.vol.size, -1))


def bind_outlets(tree: VascularTree, mesh, s: float = 3.0, use_facets: bool = True,
                 allow_empty: bool = False) -> list[OutletPort]:
    """Pressure ports at the draining leaves.

    Captures every P2 node within ``s * r_i`` of leaf ``i``; a node claimed
    by several ports goes to the nearest centre. Meshes that carry
    ``outflow:<id>`` facets bind port ``id`` to the nodes of those facets.
    With ``allow_empty`` ports that capture nothing are dropped instead of
    raising.
    """
    seg = tree.leaf_segments()
    centers = tree.points[tree.leaves]
    radii = tree.radius[seg]
    if use_facets:
        tagged = mesh.facets_with_tag("outflow:")
        if tagged.size:
            return _ports_from_facets(mesh, tagged, centers, radii, s)
    pts = mesh.points_p2
    kd = cKDTree(pts)
    owner = np.full(pts.shape[0], -1, dtype=np.int64)
    best = np.full(pts.shape[0], np.inf)
    for i, (c, r) in enumerate(zip(centers, radii)):
        idx = np.asarray(kd.query_ball_point(c, s * r), dtype=np.int64)
        if idx.size == 0:
            continue
        d = np.linalg.norm(pts[idx] - c, axis=1)
        # ties go to the lower port index (strict comparison)
        win = d < best[idx]
        owner[idx[win]] = i
        best[idx[win]] = d[win]
    ports = []
    for i, (c, r) in enumerate(zip(centers, radii)):
        dofs = np.flatnonzero(owner == i)
        if dofs.size == 0 and allow_empty:
            log.warning("outlet %d captured no pressure nodes; dropped", i)
            continue
        if dofs.size == 0:
            raise BindingError(f"outlet {i} at {tuple(c)} captured no pressure nodes; "
                               "refine the mesh or increase the capture factor s")
        ports.append(OutletPort(tuple(map(float, c)), float(r), float(s), tuple(int(k) for k in dofs)))
    return ports


def _ports_from_facets(mesh, tagged, centers, radii, s):
    fp2 = mesh.facets_p2(mesh.facets[tagged])
    ids = np.array([int(mesh.facet_tags[t].split(":")[1]) for t in tagged])
    ports = []
    for i, (c, r) in enumerate(zip(centers, radii)):
        dofs = np.unique(fp2[ids == i])
        if dofs.size == 0:
            raise BindingError(f"outlet {i} has no outflow:{i} facets")
        ports.append(OutletPort(tuple(map(float, c)), float(r), float(s), tuple(int(k) for k in dofs)))
    return ports


def port_dofs(ports) -> np.ndarray:
    if not ports:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate([np.asarray(p.dofs, dtype=np.int64) for p in ports]))


@dataclass
class MassBalance:
    inflow: float
    outflow: float
    leakage: float
    imbalance: float          # |inflow - outflow| / inflow
    leakage_rel: float        # |leakage| / inflow
    max_port_pressure: float

    def as_dict(self):
        return asdict(self)


def mass_balance_report(x, problem: PoroProblem, ports, asm: Assembler | None = None) -> MassBalance:
    asm = asm or Assembler(problem.mesh)
    inflow = float(np.sum(problem.load))
    R = asm.residual(x, problem)
    pd = port_dofs(ports)
    outflow = float(-np.sum(R[asm.nU + pd]))
    leak = asm.outer_flux(x, problem.material)
    _, P = asm.split(x)
    pmax = float(np.max(np.abs(P[pd]))) if pd.size else 0.0
    if inflow == 0:
        return MassBalance(0.0, outflow, leak, 0.0, 0.0, pmax)
    return MassBalance(inflow, outflow, leak, abs(inflow - outflow) / inflow, abs(leak) / inflow, pmax)


def write_mass_balance_csv(mb: MassBalance, path) -> None:
    d = mb.as_dict()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(d))
        w.writerow([repr(float(v)) for v in d.values()])


def export_coupling(sources, ports, path) -> None:
    data = {"sources": [asdict(s) for s in sources],
            "ports": [{**asdict(p), "dofs": list(p.dofs)} for p in ports]}
    with open(path, "w", newline="\n") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")
