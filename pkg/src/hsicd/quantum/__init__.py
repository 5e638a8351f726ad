"""Dense statevector simulation of the trainable feature circuit."""
from .backend import BACKEND, available, get_kernels
from .circuit import (
    QuantumLayerParams,
    QueenCircuit,
    angle_embed,
    block_unitary,
    circuit_forward,
    circuit_gradients,
    complexity_model,
    coupling_pairs,
    dense_forward,
    entangle_and_measure,
    fe_block,
    measured_wires,
)
from .gates import GateOp, QuantumState, apply_gate, gate_matrix

__all__ = [
    "BACKEND",
    "GateOp",
    "QuantumLayerParams",
    "QuantumState",
    "QueenCircuit",
    "angle_embed",
    "apply_gate",
    "available",
    "block_unitary",
    "circuit_forward",
    "circuit_gradients",
    "complexity_model",
    "coupling_pairs",
    "dense_forward",
    "entangle_and_measure",
    "fe_block",
    "gate_matrix",
    "get_kernels",
    "measured_wires",
]
