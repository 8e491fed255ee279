from dataclasses import dataclass, fields

import scipy.constants as sc


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants plus the two diamond-specific numbers the models need."""

    vacuum_permittivity: float = sc.epsilon_0
    relative_permittivity_diamond: float = 5.7
    elementary_charge: float = sc.e
    planck_h: float = sc.h
    bohr_magneton: float = sc.physical_constants["Bohr magneton"][0]
    vacuum_permeability: float = sc.mu_0
    electron_g_factor: float = 2.0
    diamond_atom_density: float = 1.76e23  # carbon sites per cm^3

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be strictly positive")

    @property
    def coulomb_prefactor(self) -> float:
        """e / (4 pi eps0 eps_r) in V*m."""
        return self.elementary_charge / (
            4 * sc.pi * self.vacuum_permittivity * self.relative_permittivity_diamond
        )


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class ChargeDensity:
    """A defect density quoted in ppm of lattice sites."""

    value_ppm: float
    constants: PhysicalConstants = CONSTANTS

    def __post_init__(self):
        if self.value_ppm < 0:
            raise ValueError("charge density must be non-negative")

    @property
    def value_volumetric(self) -> float:
        """Density in cm^-3."""
        return self.value_ppm * 1e-6 * self.constants.diamond_atom_density

    @property
    def value_si(self) -> float:
        """Density in m^-3."""
        return self.value_volumetric * 1e6

    def scaled(self, factor: float) -> "ChargeDensity":
        return ChargeDensity(self.value_ppm * factor, self.constants)


def as_density(rho) -> ChargeDensity:
    if isinstance(rho, ChargeDensity):
        return rho
    return ChargeDensity(float(rho))
