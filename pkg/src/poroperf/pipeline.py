"""Solve one perfusion case: trees + mesh + material -> fields and reports."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from . import coupling as cp
from .errors import BindingError
from .fem.assembly import Assembler, PoroProblem
from .fem.constitutive import Material, SpringBC, porosity_from_pressure
from .fem.newton import NewtonResult, NewtonSettings, newton_solve
from .fem.vtk import write_vtk
from .mesh import Mesh
from .vascular import VascularTree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CouplingSettings:
    b: float = 3.0                 # bell width factor
    s: float = 3.0                 # outlet capture factor
    normalize: bool = True         # rescale bells to their discrete integral
    contact: str = "fixed"         # fixed | spring
    spring: SpringBC = field(default_factory=SpringBC)
    allow_empty_ports: bool = False

    def __post_init__(self):
        if self.contact not in ("fixed", "spring"):
            raise ValueError(f"unknown contact mode {self.contact!r}")


@dataclass
class CaseResult:
    mesh: Mesh
    assembler: Assembler
    problem: PoroProblem
    sources: list
    ports: list
    newton: NewtonResult
    mass_balance: cp.MassBalance

    @property
    def x(self):
        return self.newton.x

    @property
    def displacement(self):
        return self.assembler.split(self.x)[0]

    @property
    def pressure(self):
        return self.assembler.split(self.x)[1]

    @property
    def max_pressure(self) -> float:
        return float(np.max(self.pressure))

    def darcy_velocity(self):
        return self.assembler.darcy_velocity(self.x, self.problem.material)

    def vertex_jacobian(self):
        """Volume-weighted average of the cell ``det F`` at each vertex."""
        asm = self.assembler
        J = asm.cell_jacobians(self.displacement)
        w = np.repeat(asm.vol, asm.dim + 1)
        num = np.bincount(asm.cells.ravel(), weights=np.repeat(J * asm.vol, asm.dim + 1), minlength=asm.nV)
        den = np.bincount(asm.cells.ravel(), weights=w, minlength=asm.nV)
        return num / den

    def porosity(self):
        """Porosity at the mesh vertices."""
        p = self.pressure[:self.assembler.nV]
        return porosity_from_pressure(p, self.vertex_jacobian(), self.problem.material)

    def summary(self) -> dict:
        w = self.darcy_velocity()
        phi = self.porosity()
        return {
            "newton_iterations": self.newton.iterations,
            "max_pressure": self.max_pressure,
            "min_pressure": float(np.min(self.pressure)),
            "max_displacement": float(np.max(np.linalg.norm(self.displacement, axis=1))),
            "max_velocity": float(np.max(np.linalg.norm(w, axis=1))),
            "velocity_l2": float(np.sqrt(np.sum(self.assembler.vol * np.sum(w * w, axis=1)))),
            "porosity_mean": float(np.mean(phi)),
            "porosity_min": float(np.min(phi)),
            "porosity_max": float(np.max(phi)),
            **{f"mb_{k}": v for k, v in self.mass_balance.as_dict().items()},
        }

    def write(self, outdir, stem="fields"):
        w = self.darcy_velocity()
        write_vtk(outdir / f"{stem}.vtk", self.mesh,
                  point_data={"u": self.displacement, "p": self.pressure[:self.assembler.nV],
                              "phi": self.porosity()},
                  cell_data={"w": w})
        cp.write_mass_balance_csv(self.mass_balance, outdir / f"{stem}_mass_balance.csv")
        with open(outdir / f"{stem}_newton.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["iteration", "scaled_residual"])
            for i, r in enumerate(self.newton.history):
                wr.writerow([i, repr(float(r))])
        cp.export_coupling(self.sources, self.ports, outdir / f"{stem}_coupling.json")


def outer_vertex_dofs(mesh: Mesh) -> np.ndarray:
    idx = mesh.facets_with_tag("outer")
    verts = np.unique(mesh.facets[idx]) if idx.size else np.zeros(0, dtype=np.int64)
    return (verts[:, None] * mesh.dim + np.arange(mesh.dim)).ravel()


def build_problem(mesh: Mesh, supplying: VascularTree, draining: VascularTree, material: Material,
                  settings: CouplingSettings = CouplingSettings(), asm: Assembler | None = None):
    asm = asm or Assembler(mesh)
    sources = cp.build_sources(supplying, settings.b) if supplying.n_leaves else []
    if settings.normalize and sources:
        sources = cp.normalize_sources(sources, asm)
    ports = cp.bind_outlets(draining, mesh, settings.s, allow_empty=settings.allow_empty_ports)
    if not ports:
        raise BindingError("no outlet port captured any pressure node")
    load = cp.source_load(sources, asm) if sources else np.zeros(asm.nP)
    if settings.contact == "fixed":
        udofs, spring = outer_vertex_dofs(mesh), None
    else:
        udofs, spring = np.zeros(0, dtype=np.int64), settings.spring
    problem = PoroProblem(mesh, material, load, spring=spring, u_dofs=udofs, u_values=0.0,
                          p_dofs=cp.port_dofs(ports), p_values=0.0)
    return asm, problem, sources, ports


def solve_case(mesh: Mesh, supplying: VascularTree, draining: VascularTree, material: Material,
               settings: CouplingSettings = CouplingSettings(),
               newton: NewtonSettings = NewtonSettings()) -> CaseResult:
    asm, problem, sources, ports = build_problem(mesh, supplying, draining, material, settings)
    res = newton_solve(problem, settings=newton, assembler=asm)
    mb = cp.mass_balance_report(res.x, problem, ports, asm)
    return CaseResult(mesh, asm, problem, sources, ports, res, mb)


def relative_l2(asm: Assembler, a, b) -> float:
    """``|a - b|_L2 / |b|_L2`` for P1 vector fields on the same mesh."""
    m = _p1_mass(asm)
    da = np.asarray(a) - np.asarray(b)
    num = np.sum(da * (m @ da))
    den = np.sum(np.asarray(b) * (m @ np.asarray(b)))
    return float(np.sqrt(num / den)) if den > 0 else float("inf")


def _p1_mass(asm: Assembler):
    import scipy.sparse as sp
    d = asm.dim
    loc = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    vals = asm.vol[:, None, None] * loc[None]
    rows = np.repeat(asm.cells, d + 1, axis=1).ravel()
    cols = np.tile(asm.cells, (1, d + 1)).ravel()
    return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(asm.nV, asm.nV))
