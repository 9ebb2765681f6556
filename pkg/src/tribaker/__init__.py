"""Open quantum tribaker maps: resonance spectra, fractal Weyl counting and
short periodic orbit reconstruction."""

from .maps import Family, MapSpec, closed_tribaker, fourier_gn, open_map, parity_operator
from .spectra import ResonanceSpectrum, count_longlived, decay_factors, eig_full, eigenvalues, fwl_fit
from .symbolic import SymbolicOrbit, canonical_orbit, enumerate_orbits, orbit_points, survival_probability
from .scars import coherent_state, scar_mode, scar_modes
from .shortpo import build_basis, performance, performance_sweep, shortpo_spectrum
from .phasespace import field_distance, h_field, q_field

__version__ = "0.1.0"

__all__ = [
    "Family", "MapSpec", "closed_tribaker", "fourier_gn", "open_map", "parity_operator",
    "ResonanceSpectrum", "count_longlived", "decay_factors", "eig_full", "eigenvalues", "fwl_fit",
    "SymbolicOrbit", "canonical_orbit", "enumerate_orbits", "orbit_points", "survival_probability",
    "coherent_state", "scar_mode", "scar_modes",
    "build_basis", "performance", "performance_sweep", "shortpo_spectrum",
    "field_distance", "h_field", "q_field",
]
