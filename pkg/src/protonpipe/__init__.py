"""Quantum-circuit workflow for proton-transfer barriers in the
nuclear-electronic orbital picture: Hamiltonians, exact and ADAPT-VQE
ground states, approximate compiling, noisy simulation with ZNE, and
rate/density analysis."""

from __future__ import annotations

from .errors import (AlignmentError, ConditioningError, ConfigurationError, DimensionError, ParseError,
                     ProtonPipeError, ResourceLimitError, RoutingError, SectorError, StageError, SymmetryError,
                     ValidationError)
from .fermion import ModeLayout
from .hamiltonian import TRAJECTORY, LmrWeights, NeoIntegrals, assemble, interpolate, parse_integrals
from .pauli import PauliString, PauliSum
from .pipeline import PipelineConfig, run_pipeline

__all__ = [
    "AlignmentError", "ConditioningError", "ConfigurationError", "DimensionError", "ParseError",
    "ProtonPipeError", "ResourceLimitError", "RoutingError", "SectorError", "StageError", "SymmetryError",
    "ValidationError", "ModeLayout", "TRAJECTORY", "LmrWeights", "NeoIntegrals", "assemble", "interpolate",
    "parse_integrals", "PauliString", "PauliSum", "PipelineConfig", "run_pipeline",
]
