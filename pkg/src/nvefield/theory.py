"""Molecular-orbital estimates of NV electric-field susceptibilities.

Orbital expectation values are inputs (in angstrom), not computed here. The
ionic (piezoelectric) contribution is not included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import CONSTANTS, PhysicalConstants

ANGSTROM_CM = 1e-8


@dataclass(frozen=True)
class OrbitalInputs:
    lambda_mix: float = 0.7
    x1_expectation: float = 1.34  # angstrom, chosen so that d_perp = 0.67 e*angstrom
    # (<sigma_1|z|sigma_1>, <sigma_N|z|sigma_N>) in angstrom, chosen so that d_par = 0.26 e*angstrom
    zN_z1_offsets: tuple = (0.26 * (3 + 0.49) / 0.49, 0.0)
    nu0: float = 1.9  # eV
    d_perp_input: float = 0.67  # e*angstrom
    d_par_input: float = 0.26
    d_perp_prime_input: float = 0.88

    def __post_init__(self):
        if not 0 < self.lambda_mix <= 1:
            raise ValueError("lambda_mix must lie in (0, 1]")
        if not self.nu0 > 0:
            raise ValueError("nu0 must be positive")
        for name in ("x1_expectation", "d_perp_input", "d_par_input", "d_perp_prime_input"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if len(self.zN_z1_offsets) != 2:
            raise ValueError("zN_z1_offsets needs two entries")


def dipole_to_susceptibility(d: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Permanent dipole (e*angstrom) to Stark susceptibility in MHz/(V/cm)."""
    return constants.elementary_charge * d * ANGSTROM_CM / constants.planck_h * 1e-6


@dataclass(frozen=True)
class ExcitedDipoles:
    d_perp: float  # e*angstrom
    d_par: float
    d_perp_prime: float  # ground-to-excited transverse transition dipole


def excited_dipoles_from_orbitals(inp: OrbitalInputs = OrbitalInputs()) -> ExcitedDipoles:
    """Non-overlapping-orbital reductions of the excited-state dipoles.

    The longitudinal transition dipole vanishes by symmetry, so it has no field here.
    """
    lam2 = inp.lambda_mix**2
    z1, zn = inp.zN_z1_offsets
    x1 = inp.x1_expectation
    return ExcitedDipoles(
        d_perp=0.5 * x1,
        d_par=lam2 / (3 + lam2) * (z1 - zn),
        d_perp_prime=3 * x1 / math.sqrt(6 * (3 + lam2)),
    )


def spin_spin_coupling(inp: OrbitalInputs = OrbitalInputs(), constants: PhysicalConstants = CONSTANTS) -> float:
    """D_E in Hz from the semiclassical two-particle integrals."""
    c = constants
    x = inp.x1_expectation * 1e-10
    pref = c.vacuum_permeability * c.bohr_magneton**2 * c.electron_g_factor**2 / (8 * math.pi * c.planck_h)
    return pref / math.sqrt(2 * (3 + inp.lambda_mix**2)) / x**3


def ground_state_spin_spin(inp: OrbitalInputs = OrbitalInputs(), constants: PhysicalConstants = CONSTANTS,
                           derive_transition_dipole: bool = True) -> float:
    """Transverse ground-state susceptibility in Hz/(V/cm).

    A field E mixes in the excited orbital with amplitude d'E/nu0, and the
    spin-spin term converts that into a splitting 2 (d'E/nu0) D_E.
    """
    d_prime = (excited_dipoles_from_orbitals(inp).d_perp_prime if derive_transition_dipole
               else inp.d_perp_prime_input)
    # e*d'[angstrom]*E[V/cm] in eV is d' * 1e-8 * E
    return 2.0 * d_prime * ANGSTROM_CM * spin_spin_coupling(inp, constants) / inp.nu0


MEASURED = {
    "excited_perp": 1.4e6,  # Hz/(V/cm)
    "excited_par": 0.7e6,
    "ground_perp": 17.0,
    "ground_par": 0.35,
}


def comparison_table(inp: OrbitalInputs = OrbitalInputs()) -> list[dict]:
    """Measured vs. estimated susceptibilities, all in Hz/(V/cm)."""
    return [
        {"row": "excited state, measured", "chi_perp": MEASURED["excited_perp"], "chi_par": MEASURED["excited_par"]},
        {"row": "excited state, electronic effect",
         "chi_perp": dipole_to_susceptibility(inp.d_perp_input) * 1e6,
         "chi_par": dipole_to_susceptibility(inp.d_par_input) * 1e6},
        {"row": "ground state, measured", "chi_perp": MEASURED["ground_perp"], "chi_par": MEASURED["ground_par"]},
        {"row": "ground state, spin-spin effect", "chi_perp": ground_state_spin_spin(inp), "chi_par": 0.0},
    ]


def comparison_markdown(rows: list[dict]) -> str:
    lines = ["| | chi_perp [Hz/(V/cm)] | chi_par [Hz/(V/cm)] |", "|---|---|---|"]
    for r in rows:
        lines.append(f"| {r['row']} | {r['chi_perp']:.4g} | {r['chi_par']:.4g} |")
    return "\n".join(lines) + "\n"
