import itertools

import numpy as np
import pytest

from hsicd.quantum import (
    GateOp,
    QuantumLayerParams,
    QuantumState,
    QueenCircuit,
    apply_gate,
    available,
    block_unitary,
    circuit_forward,
    circuit_gradients,
    complexity_model,
    dense_forward,
    gate_matrix,
    get_kernels,
    measured_wires,
)
from hsicd.quantum import gates
from hsicd.quantum.circuit import _block_ops, toffoli_triples

BACKENDS = ["python"] + (["cython"] if available() else [])


def explicit(kind, theta=0.0):
    """Gate matrices written out entry by entry."""
    d, g = np.cos(theta / 2), np.sin(theta / 2)
    if kind == "RY":
        return np.array([[d, -g], [g, d]])
    if kind == "RX":
        return np.array([[d, -1j * g], [-1j * g, d]])
    if kind == "XX":
        m = np.zeros((4, 4), dtype=complex)
        for i in range(4):
            m[i, i] = d
            m[i, 3 - i] = -1j * g
        return m
    if kind == "Toffoli":
        m = np.eye(8, dtype=complex)
        m[4:6, 4:6] = [[0, 1], [1, 0]]
        return m
    raise KeyError(kind)


@pytest.mark.parametrize("kind,arity", [("RY", 1), ("RX", 1), ("XX", 2), ("Toffoli", 3)])
@pytest.mark.parametrize("theta", [0.0, 0.3, np.pi / 2, 2.7, -1.1])
def test_gate_on_every_basis_state(kind, arity, theta):
    ref = explicit(kind, theta)
    angle = None if kind == "Toffoli" else theta
    for bits in itertools.product((0, 1), repeat=arity):
        out = apply_gate(QuantumState.basis(bits), GateOp(kind, tuple(range(arity)), angle))
        col = int("".join(map(str, bits)), 2)
        assert np.max(np.abs(out.amps - ref[:, col])) < 1e-12


def test_table_examples():
    assert np.allclose(gate_matrix("RY", np.pi), [[0, -1], [1, 0]], atol=1e-15)
    assert np.allclose(gate_matrix("RX", 0.0), np.eye(2))
    # Toffoli on wires (control, anti-control, target) flips only |10x>
    for bits in itertools.product((0, 1), repeat=3):
        out = apply_gate(QuantumState.basis(bits), GateOp("Toffoli", (0, 1, 2)))
        expect = list(bits)
        if bits[0] == 1 and bits[1] == 0:
            expect[2] ^= 1
        assert np.allclose(out.amps, QuantumState.basis(expect).amps)


def test_gate_on_non_adjacent_wires():
    psi = QuantumState.basis((1, 0, 0, 0))
    out = apply_gate(psi, GateOp("Toffoli", (0, 3, 1)))
    assert np.allclose(out.amps, QuantumState.basis((1, 1, 0, 0)).amps)


@pytest.mark.parametrize("kind", ["RY", "RX", "XX"])
def test_unitary(kind):
    for theta in np.linspace(-7, 7, 11):
        u = gate_matrix(kind, theta)
        assert np.allclose(u.conj().T @ u, np.eye(len(u)), atol=1e-14)


def test_norm_preserved_over_random_sequences():
    rng = np.random.default_rng(0)
    q = 4
    worst = 0.0
    psi = QuantumState(q)
    for _ in range(10_000):
        kind = rng.choice(["RY", "RX", "XX", "Toffoli"])
        arity = {"RY": 1, "RX": 1, "XX": 2, "Toffoli": 3}[kind]
        wires = tuple(int(w) for w in rng.choice(q, arity, replace=False))
        angle = None if kind == "Toffoli" else float(rng.uniform(-10, 10))
        psi = apply_gate(psi, GateOp(kind, wires, angle))
        worst = max(worst, abs(psi.norm() - 1))
    assert worst < 1e-10


def test_gateop_validation():
    with pytest.raises(ValueError):
        GateOp("XX", (1, 1), 0.3)
    with pytest.raises(ValueError):
        GateOp("RY", (0, 1), 0.3)
    with pytest.raises(ValueError):
        GateOp("RX", (0,))
    with pytest.raises(ValueError):
        apply_gate(QuantumState(2), GateOp("RY", (2,), 0.1))
    with pytest.raises(ValueError):
        apply_gate(QuantumState(2), GateOp("PauliZ", (0,)))


def test_expval_z_of_basis_states():
    psi = QuantumState.basis((0, 1, 1))
    assert [psi.expval_z(w) for w in range(3)] == [1.0, -1.0, -1.0]


def test_block_layout():
    ops = _block_ops(4, 1, "chain")
    assert [k for k, _, _ in ops] == ["RY"] * 4 + ["XX"] * 3 + ["RX"] * 4 + ["XX"] * 3 + ["RY"] * 4
    assert QuantumLayerParams.size(4, 1) == 18
    assert QuantumLayerParams.size(4, 1, "ring") == 20
    assert measured_wires(4) == [0, 2]
    assert toffoli_triples(4) == [(0, 1, 2), (1, 2, 3)]


def test_param_vector_round_trip():
    rng = np.random.default_rng(1)
    p = QuantumLayerParams.random(rng, 5, 3, "ring")
    assert np.array_equal(QuantumLayerParams.from_vector(p.vector(), 5, 3, "ring").vector(), p.vector())
    with pytest.raises(ValueError):
        QuantumLayerParams.from_vector(np.zeros(17), 4, 1)


def test_zero_angles_and_features_give_all_plus_one():
    out = circuit_forward(np.zeros(4), QuantumLayerParams.zeros(4))
    assert np.allclose(out, [1.0, 1.0])


def test_features_are_two_pi_periodic():
    rng = np.random.default_rng(2)
    p = QuantumLayerParams.random(rng, 4)
    x = rng.normal(size=4)
    shifted = x + 2 * np.pi * np.array([1, -2, 0, 3])
    assert np.allclose(circuit_forward(x, p), circuit_forward(shifted, p), atol=1e-12)


def test_block_unitary_is_unitary_and_matches_simulation():
    rng = np.random.default_rng(3)
    p = QuantumLayerParams.random(rng, 4)
    u = block_unitary(p)
    assert np.allclose(u.conj().T @ u, np.eye(16), atol=1e-12)
    # angles zero on the embedding -> the circuit sees |0000>
    psi = u[:, 0]
    z = np.array([1 - 2 * ((np.arange(16) >> (3 - w)) & 1) for w in (0, 2)])
    assert np.allclose(z @ np.abs(psi) ** 2, circuit_forward(np.zeros(4), p), atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("q,eta,topology", [(3, 1, "chain"), (4, 1, "chain"), (4, 2, "ring"), (5, 2, "chain")])
def test_batched_forward_matches_single_and_dense(backend, q, eta, topology):
    rng = np.random.default_rng(q * 10 + eta)
    p = QuantumLayerParams.random(rng, q, eta, topology)
    feats = rng.uniform(-4, 4, size=(7, q))
    circ = QueenCircuit(q, eta, topology, backend=backend)
    out = circ.forward(feats, p.vector()[None])
    for row, x in zip(out, feats):
        assert np.allclose(row, circuit_forward(x, p), atol=1e-12)
        assert np.allclose(row, dense_forward(x, p), atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_gradients_adjoint_shift_and_finite_difference(backend):
    rng = np.random.default_rng(4)
    p = QuantumLayerParams.random(rng, 4, 2)
    x = rng.uniform(-3, 3, 4)
    gp_a, gf_a = circuit_gradients(x, p, "adjoint", backend=backend)
    gp_s, gf_s = circuit_gradients(x, p, "shift")
    assert np.allclose(gp_a, gp_s, atol=1e-12)
    assert np.allclose(gf_a, gf_s, atol=1e-12)
    vec, h = p.vector(), 1e-6
    fd = np.zeros_like(gp_a)
    for k in range(vec.size):
        e = np.zeros_like(vec)
        e[k] = h
        fd[:, k] = (dense_forward(x, QuantumLayerParams.from_vector(vec + e, 4, 2))
                    - dense_forward(x, QuantumLayerParams.from_vector(vec - e, 4, 2))) / (2 * h)
    assert np.max(np.abs(fd - gp_a)) / np.max(np.abs(gp_a)) < 1e-4


@pytest.mark.parametrize("backend", BACKENDS)
def test_vjp_with_parameter_sets(backend):
    rng = np.random.default_rng(5)
    circ = QueenCircuit(4, backend=backend)
    params = rng.uniform(0, 2 * np.pi, (3, circ.n_params))
    feats = rng.normal(size=(6, 4))
    ids = np.array([0, 1, 0, 1, 0, 1])  # set 2 has no instances
    g = rng.normal(size=(6, 2))
    gf, gp = circ.vjp(feats, params, g, ids)
    assert np.all(gp[2] == 0.0)
    h = 1e-6
    for s, k in [(0, 3), (1, 10), (0, 17)]:
        e = np.zeros_like(params)
        e[s, k] = h
        fd = (np.sum(g * circ.forward(feats, params + e, ids))
              - np.sum(g * circ.forward(feats, params - e, ids))) / (2 * h)
        assert abs(fd - gp[s, k]) < 1e-7


@pytest.mark.skipif(not available(), reason="compiled kernels not built")
def test_compiled_and_python_kernels_agree():
    rng = np.random.default_rng(6)
    a, b = QueenCircuit(4, 2, backend="cython"), QueenCircuit(4, 2, backend="python")
    params = rng.uniform(0, 2 * np.pi, (2, a.n_params))
    feats = rng.normal(size=(50, 4))
    ids = rng.integers(0, 2, 50)
    g = rng.normal(size=(50, 2))
    assert np.allclose(a.forward(feats, params, ids), b.forward(feats, params, ids), atol=1e-13)
    for u, v in zip(a.vjp(feats, params, g, ids), b.vjp(feats, params, g, ids)):
        assert np.allclose(u, v, atol=1e-12)


def test_backend_env_override(monkeypatch):
    monkeypatch.setenv("HSICD_KERNELS", "python")
    assert get_kernels().__name__.endswith("_pykernels")


def test_circuit_input_validation():
    circ = QueenCircuit(4, backend="python")
    with pytest.raises(ValueError):
        circ.forward(np.zeros((2, 3)), np.zeros((1, circ.n_params)))
    with pytest.raises(ValueError):
        circ.forward(np.zeros((2, 4)), np.zeros((1, 5)))
    with pytest.raises(ValueError):
        circ.forward(np.zeros((2, 4)), np.zeros((1, circ.n_params)), np.array([0, 1]))


@pytest.mark.parametrize("q", [3, 4, 5, 6, 7])
@pytest.mark.parametrize("eta", [1, 2, 3])
def test_operation_count_follows_complexity_model(q, eta):
    rng = np.random.default_rng(q + eta)
    p = QuantumLayerParams.random(rng, q, eta)
    gates.counter.reset()
    gates.counter.enabled = True
    try:
        dense_forward(rng.normal(size=q), p)
    finally:
        gates.counter.enabled = False
    model = complexity_model(q, eta, len(measured_wires(q)))
    ratio = gates.counter.mults / model
    assert 0.5 <= ratio <= 4.0
    gates.counter.reset()
