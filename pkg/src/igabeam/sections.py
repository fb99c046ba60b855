"""Cross-section and material data for shear-deformable beams.

Axis convention: the beam axis is the *second* material direction, so the
axial stiffness EA sits in the middle slot of the force elasticity diagonal
and the torsional stiffness GJ in the middle slot of the moment diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Saint-Venant torsion constant of a square, as a multiple of side**4
SQUARE_TORSION_FACTOR = 0.1406


@dataclass(frozen=True)
class SectionProperties:
    """Mass and elasticity constants per unit reference length.

    ``c_n`` = diag(GA1, EA, GA3), ``c_m`` = diag(EJ1, GJ, EJ3), ``inertia`` =
    diagonal of the material rotary inertia (kg*m^2/m). Only the diagonals
    are stored; all of the paper-scale benchmarks use diagonal tensors.
    """

    mu: float
    c_n: np.ndarray
    c_m: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c_n", np.asarray(self.c_n, dtype=float))
        object.__setattr__(self, "c_m", np.asarray(self.c_m, dtype=float))
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        for name in ("c_n", "c_m", "inertia"):
            v = getattr(self, name)
            if v.shape != (3,) or np.any(v <= 0):
                raise ValueError(f"{name} must be 3 positive diagonal entries")
        if self.mu <= 0:
            raise ValueError("mass per unit length must be positive")


def shear_modulus(E: float, nu: float) -> float:
    return E / (2.0 * (1.0 + nu))


def square_section(side: float, E: float, nu: float, rho: float,
                   torsion: str | float = "polar",
                   shear_correction: float = 1.0) -> SectionProperties:
    """Square cross-section of the given side length.

    ``torsion`` selects the torsional stiffness model: ``"polar"`` uses the
    polar moment J1+J3, ``"saint-venant"`` the 0.1406*side^4 constant, or pass
    the torsion constant (m^4) directly.
    """
    A = side**2
    I1 = I3 = side**4 / 12.0
    J0 = I1 + I3
    return _build_section(A, I1, I3, J0, E, nu, rho, torsion, shear_correction,
                          saint_venant=SQUARE_TORSION_FACTOR * side**4)


def circle_section(diameter: float, E: float, nu: float, rho: float,
                   torsion: str | float = "polar",
                   shear_correction: float = 1.0) -> SectionProperties:
    """Solid circular cross-section; the polar moment is the exact torsion
    constant here."""
    A = np.pi * diameter**2 / 4.0
    I1 = I3 = np.pi * diameter**4 / 64.0
    J0 = I1 + I3
    return _build_section(A, I1, I3, J0, E, nu, rho, torsion, shear_correction,
                          saint_venant=J0)


def _build_section(A, I1, I3, J0, E, nu, rho, torsion, shear_correction,
                   saint_venant):
    G = shear_modulus(E, nu)
    if torsion == "polar":
        Jt = J0
    elif torsion == "saint-venant":
        Jt = saint_venant
    else:
        Jt = float(torsion)
    k = shear_correction
    return SectionProperties(
        mu=rho * A,
        c_n=np.array([k * G * A, E * A, k * G * A]),
        c_m=np.array([E * I1, G * Jt, E * I3]),
        inertia=rho * np.array([I1, J0, I3]),
    )


def direct_section(mu: float, c_n, c_m, inertia) -> SectionProperties:
    """Section from explicitly given stiffness/inertia diagonals (used by the
    flying-beam benchmark, which specifies them instead of E and geometry)."""
    return SectionProperties(mu=mu, c_n=c_n, c_m=c_m, inertia=inertia)
