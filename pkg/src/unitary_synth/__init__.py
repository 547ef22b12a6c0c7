"""Decompose n-qubit unitaries into U3 rotations and two-qubit entanglers.

Qubits are disentangled one at a time by optimizing layered gate structures
against a block-proportionality cost, with an optional hardware topology.
"""

from .cost import circuit_matrix, f_sub, fidelity_cost, f_sub_gradient
from .decomposer import DecompositionConfig, DecompositionResult, StageResult, decompose, extract_subunitary, verify
from .gates import Gate, GateKind, u3_matrix, u3_params_from_2x2
from .kernels import BACKEND
from .numerics import haar_random_unitary, make_rng, read_umat, spectral_error, write_umat
from .optimizer import OptimizerConfig, bfgs_minimize, optimize_block, sequential_sweep
from .qasm import export_qasm, parse_qasm, qasm_matrix
from .structure import GateStructure, Topology, assemble_structure, cnot_lower_bound, load_topology, validate_structure

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DecompositionConfig",
    "DecompositionResult",
    "Gate",
    "GateKind",
    "GateStructure",
    "OptimizerConfig",
    "StageResult",
    "Topology",
    "assemble_structure",
    "bfgs_minimize",
    "circuit_matrix",
    "cnot_lower_bound",
    "decompose",
    "export_qasm",
    "extract_subunitary",
    "f_sub",
    "f_sub_gradient",
    "fidelity_cost",
    "haar_random_unitary",
    "load_topology",
    "make_rng",
    "optimize_block",
    "parse_qasm",
    "qasm_matrix",
    "read_umat",
    "sequential_sweep",
    "spectral_error",
    "u3_matrix",
    "u3_params_from_2x2",
    "validate_structure",
    "verify",
    "write_umat",
]
