"""
Quantum Module
==============
Few-qubit state vectors, H/CNOT gates, projective measurement and the
role-split random streams that drive it.
"""

from src.quantum.rng import RandomStream, StreamId, derive_seed, fresh_seed
from src.quantum.state import (
    Amplitude,
    Basis,
    StateVector,
    add_qubit,
    apply_cnot,
    apply_hadamard,
    basis_state,
    make_bell_pair,
    make_ghz_probe,
    measure,
    probabilities,
    project,
)

__all__ = [
    "Amplitude",
    "Basis",
    "RandomStream",
    "StateVector",
    "StreamId",
    "add_qubit",
    "apply_cnot",
    "apply_hadamard",
    "basis_state",
    "derive_seed",
    "fresh_seed",
    "make_bell_pair",
    "make_ghz_probe",
    "measure",
    "probabilities",
    "project",
]
