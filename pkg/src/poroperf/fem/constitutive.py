"""Skeleton and pore-fluid constitutive laws.

Stored energy of the skeleton (Neo-Hookean with logarithmic volumetric part)::

    Psi(C) = lam/8 ln(I3)^2 + mu/2 (I1 - 3 - ln I3)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, InadmissibleStateError


@dataclass(frozen=True)
class Material:
    E: float = 1.0              # Young's modulus [Pa]
    nu: float = 0.3             # Poisson's ratio
    phi0: float = 0.5           # reference porosity
    k: float = 3.6e-3           # intrinsic permeability [m^2]
    eta: float = 3.6e-3         # fluid viscosity [Pa s]

    def __post_init__(self):
        if not self.E > 0:
            raise DomainError("E must be positive")
        if not 0 < self.nu < 0.5:
            raise DomainError("Poisson's ratio must lie in (0, 0.5)")
        if not 0 < self.phi0 < 1:
            raise DomainError("phi0 must lie in (0, 1)")
        if not (self.k > 0 and self.eta > 0):
            raise DomainError("permeability and viscosity must be positive")

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))

    @property
    def mu(self) -> float:
        return self.E / (2 * (1 + self.nu))

    @property
    def kappa(self) -> float:
        return self.E / (3 * (1 - 2 * self.nu))

    @property
    def K(self) -> float:
        """Mobility k / eta."""
        return self.k / self.eta


@dataclass(frozen=True)
class SpringBC:
    alpha: float = 5e2          # saturation stiffness [Pa/m]
    c: float = 15.0             # steepness [1/m]

    def __post_init__(self):
        if not self.alpha >= 0:
            raise DomainError("alpha must be non-negative")
        if not self.c > 0:
            raise DomainError("c must be positive")


def skeleton_energy(C, lam, mu):
    C = np.asarray(C, dtype=float)
    I3 = np.linalg.det(C)
    if np.any(I3 <= 0):
        raise InadmissibleStateError("det C <= 0")
    I1 = np.trace(C, axis1=-2, axis2=-1)
    n = C.shape[-1]
    ln3 = np.log(I3)
    return lam / 8.0 * ln3**2 + mu / 2.0 * (I1 - n - ln3)


def neo_hookean_pk2(C, lam, mu):
    """``2 dPsi/dC = lam/2 ln(I3) C^-1 + mu (1 - C^-1)``; broadcasts over leading axes."""
    C = np.asarray(C, dtype=float)
    I3 = np.linalg.det(C)
    if np.any(I3 <= 0):
        raise InadmissibleStateError("det C <= 0")
    Ci = np.linalg.inv(C)
    eye = np.eye(C.shape[-1])
    return 0.5 * lam * np.log(I3)[..., None, None] * Ci + mu * (eye - Ci)


def total_pk2(C, p, lam, mu):
    """Effective stress minus the pore-pressure part ``p J C^-1``."""
    C = np.asarray(C, dtype=float)
    J = np.sqrt(np.linalg.det(C))
    return neo_hookean_pk2(C, lam, mu) - (np.asarray(p) * J)[..., None, None] * np.linalg.inv(C)


def cauchy_stress(F, S):
    F = np.asarray(F, dtype=float)
    J = np.linalg.det(F)
    return np.einsum("...iJ,...JK,...kK->...ik", F, S, F) / J[..., None, None]


def solid_jacobian(p, material: Material):
    """``J^s`` from the pressure relation ``p = kappa (1/J^s - 1/(1 - phi0))``."""
    p = np.asarray(p, dtype=float)
    denom = p / material.kappa + 1.0 / (1.0 - material.phi0)
    if np.any(denom <= 0):
        raise InadmissibleStateError("pressure below -kappa/(1 - phi0)")
    return 1.0 / denom


def porosity_from_pressure(p, J, material: Material):
    """Porosity ``1 - J^s / J``."""
    return 1.0 - solid_jacobian(p, material) / np.asarray(J, dtype=float)


def pressure_from_porosity(phi, J, material: Material):
    Js = (1.0 - np.asarray(phi, dtype=float)) * np.asarray(J, dtype=float)
    return material.kappa * (1.0 / Js - 1.0 / (1.0 - material.phi0))


def spring_stiffness(u_mag, bc: SpringBC):
    """Sigmoid stiffness ``2 alpha / (1 + exp(-c |u|)) - alpha``."""
    u_mag = np.asarray(u_mag, dtype=float)
    if np.any(u_mag < 0):
        raise DomainError("displacement magnitude must be non-negative")
    # tanh form avoids overflow: 2/(1+e^-x) - 1 = tanh(x/2)
    out = bc.alpha * np.tanh(0.5 * bc.c * u_mag)
    return float(out) if out.ndim == 0 else out


def spring_stiffness_derivative(u_mag, bc: SpringBC):
    t = np.tanh(0.5 * bc.c * np.asarray(u_mag, dtype=float))
    return 0.5 * bc.alpha * bc.c * (1.0 - t * t)


def lame_from(E, nu):
    return E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))


__all__ = [
    "Material", "SpringBC", "skeleton_energy", "neo_hookean_pk2", "total_pk2", "cauchy_stress",
    "solid_jacobian", "porosity_from_pressure", "pressure_from_porosity", "spring_stiffness",
    "spring_stiffness_derivative", "lame_from",
]
