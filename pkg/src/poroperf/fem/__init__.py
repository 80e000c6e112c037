"""Finite-strain poroelastic finite elements (P1 displacement, P2 pressure)."""
from .assembly import Assembler, PoroProblem, assemble_jacobian, assemble_residual, darcy_velocity
from .constitutive import (Material, SpringBC, neo_hookean_pk2, porosity_from_pressure,
                           spring_stiffness, total_pk2)
from .linalg import LinearSolverSettings, apply_dirichlet, linear_solve
from .newton import NewtonResult, NewtonSettings, newton_solve

__all__ = [
    "Assembler", "PoroProblem", "assemble_residual", "assemble_jacobian", "darcy_velocity", "Material", "SpringBC", "neo_hookean_pk2", "porosity_from_pressure",
    "spring_stiffness", "total_pk2", "LinearSolverSettings", "apply_dirichlet", "linear_solve",
    "NewtonResult", "NewtonSettings", "newton_solve",
]
