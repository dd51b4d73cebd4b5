"""Local-to-normal mode transition of two coupled Morse oscillators."""
from .parameterization import CO2, WATER, MoleculeParams, PathSpec, default_path, params_at
from .morse_basis import MorseWell, morse_tables
from .quantum_hamiltonian import build_basis, build_hamiltonian, diagonalize, find_avoided_crossings, scan
from .observables import components, diagnose_scan, entanglement_entropy, fidelity
from .classical_dynamics import PhaseState, SectionSpec, lyapunov_grid, poincare_section

__version__ = "0.1.0"

__all__ = [
    "CO2", "WATER", "MoleculeParams", "PathSpec", "default_path", "params_at",
    "MorseWell", "morse_tables",
    "build_basis", "build_hamiltonian", "diagonalize", "find_avoided_crossings", "scan",
    "components", "diagnose_scan", "entanglement_entropy", "fidelity",
    "PhaseState", "SectionSpec", "lyapunov_grid", "poincare_section",
]
