"""Spectral gaps, DeSEV traces and adiabatic running times for MIS Hamiltonians."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (AqcGapError, ConvergenceError, CouplingConditionError, DegenerateGapError,
                     EnumerationLimitError, InputError)
from .graph import (CkParams, VertexPartition, WeightedGraph, brute_force_mis, ck_generate, load_graph,
                    max_pseudo_boolean, pseudo_boolean_y, save_graph, verify_theorem_5_1)
from .hamiltonian import (AnnealSystem, IsingModel, apply, max_spectral_norm, minus_energy_label, mis_to_ising,
                          spectral_norm)
from .spectra import (EigenSolution, GapScan, dense_oracle_spectrum, gap, lowest_eigenpairs, refine_min_gap,
                      scan_gap)
from .desev import DesevSeries, EnergyLevels, desev_trace, format_state_label, gamma, group_levels
from .art import ArtReport, MatrixElementPolicy, compute_art, matrix_element, sweep_report, verify_bitflip_identity

__all__ = [
    "AqcGapError", "ConvergenceError", "CouplingConditionError", "DegenerateGapError", "EnumerationLimitError",
    "InputError", "CkParams", "VertexPartition", "WeightedGraph", "brute_force_mis", "ck_generate", "load_graph",
    "max_pseudo_boolean", "pseudo_boolean_y", "save_graph", "verify_theorem_5_1", "AnnealSystem", "IsingModel",
    "apply", "max_spectral_norm", "minus_energy_label", "mis_to_ising", "spectral_norm", "EigenSolution",
    "GapScan", "dense_oracle_spectrum", "gap", "lowest_eigenpairs", "refine_min_gap", "scan_gap", "DesevSeries",
    "EnergyLevels", "desev_trace", "format_state_label", "gamma", "group_levels", "ArtReport",
    "MatrixElementPolicy", "compute_art", "matrix_element", "sweep_report", "verify_bitflip_identity",
]
