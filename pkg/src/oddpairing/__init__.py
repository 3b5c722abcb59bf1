"""Odd index pairings from the spectral localizer."""

__version__ = "0.1.0"

from .clifford import CliffordRep, build_clifford
from .inertia import InertiaResult, half_signature, inertia
from .lattice import LatticeOperator, SiteBox, ball_projection, build_dirac, from_hoppings, hardy_projection
from .localizer import RegimeReport, check_regime, kappa0, localize, sweep
from .models import NormData, chiral_3d_model, get_model, identity_model, perturb, shift_model
from .specflow import HermitianPath, index_via_sf, proof_chain_check, sf_by_signature, spectral_flow
from .toeplitz import IndexReport, consensus, kernel_count_index

__all__ = [
    "CliffordRep", "HermitianPath", "IndexReport", "InertiaResult", "LatticeOperator", "NormData", "RegimeReport",
    "SiteBox", "ball_projection", "build_clifford", "build_dirac", "check_regime", "chiral_3d_model", "consensus",
    "from_hoppings", "get_model", "half_signature", "hardy_projection", "identity_model", "index_via_sf", "inertia",
    "kappa0", "kernel_count_index", "localize", "perturb", "proof_chain_check", "sf_by_signature", "shift_model",
    "spectral_flow", "sweep",
]
