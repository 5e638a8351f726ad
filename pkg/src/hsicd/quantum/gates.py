"""Gate set, single-instance statevector and gate application.

Basis ordering is big-endian: wire 0 is the most significant bit, so the
three-wire Toffoli on (control, anti-control, target) is exactly the block
matrix DIAG(I4, X, I2).
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

KINDS = ("RY", "RX", "XX", "Toffoli", "NOT", "PauliZ")
_ARITY = {"RY": 1, "RX": 1, "XX": 2, "Toffoli": 3, "NOT": 1, "PauliZ": 1}
PARAMETRIC = ("RY", "RX", "XX")

PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
NOT_MATRIX = np.array([[0, 1], [1, 0]], dtype=complex)


class OpCounter:
    """Counts complex multiplications issued by the single-instance simulator."""

    def __init__(self):
        self.mults = 0
        self.enabled = False

    def reset(self):
        self.mults = 0

    def add(self, n):
        if self.enabled:
            self.mults += int(n)


counter = OpCounter()


def rx(theta):
    d, g = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[d, -1j * g], [-1j * g, d]], dtype=complex)


def ry(theta):
    d, g = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[d, -g], [g, d]], dtype=complex)


def xx(theta):
    d, g = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [
            [d, 0, 0, -1j * g],
            [0, d, -1j * g, 0],
            [0, -1j * g, d, 0],
            [-1j * g, 0, 0, d],
        ],
        dtype=complex,
    )


def toffoli():
    u = np.eye(8, dtype=complex)
    u[4:6, 4:6] = NOT_MATRIX
    return u


def gate_matrix(kind, theta=None):
    if kind == "RY":
        return ry(theta)
    if kind == "RX":
        return rx(theta)
    if kind == "XX":
        return xx(theta)
    if kind == "Toffoli":
        return toffoli()
    if kind == "NOT":
        return NOT_MATRIX.copy()
    if kind == "PauliZ":
        return PAULI_Z.copy()
    raise ValueError(f"unknown gate kind {kind!r}")


@dataclass(frozen=True)
class GateOp:
    kind: str
    wires: Tuple[int, ...]
    angle: Optional[float] = None
    param_slot: Optional[int] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.wires) != _ARITY[self.kind]:
            raise ValueError(f"{self.kind} acts on {_ARITY[self.kind]} wire(s), got {self.wires}")
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"wires must be distinct, got {self.wires}")
        if self.kind in PARAMETRIC and self.angle is None:
            raise ValueError(f"{self.kind} needs an angle")

    def matrix(self):
        return gate_matrix(self.kind, self.angle)


class QuantumState:
    """Dense statevector of ``q`` qubits."""

    def __init__(self, q, amps=None):
        if q < 1:
            raise ValueError("need at least one qubit")
        self.q = q
        if amps is None:
            amps = np.zeros(2 ** q, dtype=complex)
            amps[0] = 1.0
        amps = np.asarray(amps, dtype=complex)
        if amps.shape != (2 ** q,):
            raise ValueError(f"expected {2 ** q} amplitudes, got {amps.shape}")
        self.amps = amps

    @classmethod
    def basis(cls, bits):
        q = len(bits)
        amps = np.zeros(2 ** q, dtype=complex)
        amps[int("".join(str(int(b)) for b in bits), 2)] = 1.0
        return cls(q, amps)

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def copy(self):
        return QuantumState(self.q, self.amps.copy())

    def expval_z(self, wire):
        self._check_wires((wire,))
        p = (np.abs(self.amps) ** 2).reshape((2,) * self.q)
        p = np.moveaxis(p, wire, 0).reshape(2, -1).sum(axis=1)
        counter.add(2 ** self.q)
        return float(p[0] - p[1])

    def _check_wires(self, wires):
        for w in wires:
            if not 0 <= w < self.q:
                raise ValueError(f"wire {w} out of range for {self.q} qubits")

    def __repr__(self):
        return f"QuantumState(q={self.q})"


def apply_matrix(state, u, wires):
    """Return ``u`` embedded on ``wires`` applied to ``state`` (new state)."""
    state._check_wires(wires)
    k = len(wires)
    psi = state.amps.reshape((2,) * state.q)
    psi = np.moveaxis(psi, wires, range(k)).reshape(2 ** k, -1)
    psi = u @ psi
    counter.add(u.shape[0] * u.shape[1] * psi.shape[1])
    psi = np.moveaxis(psi.reshape((2,) * state.q), range(k), wires)
    return QuantumState(state.q, psi.reshape(-1))


def apply_gate(state, gate):
    if gate.kind == "PauliZ":
        raise ValueError("PauliZ is a measurement; use QuantumState.expval_z")
    return apply_matrix(state, gate.matrix(), list(gate.wires))
