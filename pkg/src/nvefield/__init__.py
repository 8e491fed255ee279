"""Ensemble NV electrometry toolkit.

Random-charge electric-field statistics, resonant/off-resonant ODMR spectrum
synthesis, excited-state susceptibility fitting and DC sensitivity budgets.
"""

__version__ = "0.1.0"

from .constants import CONSTANTS, ChargeDensity, PhysicalConstants
from .errors import ConfigError, DataError, NumericalError, PeaksUnresolvedError
from .field import (
    FieldDistribution,
    FieldVector,
    calibrate_rho_eff,
    e_ref,
    most_probable_field,
    pdf_field_magnitude,
    sample_field_mc,
)

__all__ = [
    "__version__",
    "CONSTANTS",
    "ChargeDensity",
    "PhysicalConstants",
    "ConfigError",
    "DataError",
    "NumericalError",
    "PeaksUnresolvedError",
    "FieldDistribution",
    "FieldVector",
    "calibrate_rho_eff",
    "e_ref",
    "most_probable_field",
    "pdf_field_magnitude",
    "sample_field_mc",
]
