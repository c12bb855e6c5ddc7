"""Two-photon amplitudes and EPR-type uncertainties for SPDC in a walk-off crystal."""

from .biphoton import BiphotonField, PumpBeam, bbo_field, nu_from_wavelengths
from .crystal import BBO, CrystalParams, Sellmeier, solve_phase_match, walk_off_length
from .moments import GridConfig, UncertaintyResult, uncertainties

__all__ = [
    "BBO",
    "BiphotonField",
    "CrystalParams",
    "GridConfig",
    "PumpBeam",
    "Sellmeier",
    "UncertaintyResult",
    "bbo_field",
    "nu_from_wavelengths",
    "solve_phase_match",
    "uncertainties",
    "walk_off_length",
]

__version__ = "0.1.0"
