"""The variational circuit: angle embedding, trainable rotation/Ising block,
Toffoli entanglement and Pauli-Z readout on the even-indexed wires.

Two evaluation paths exist. The single-instance path (``angle_embed``,
``fe_block``, ``entangle_and_measure``) goes through :mod:`.gates` and is used
for inspection and as an oracle. The batched path (:class:`QueenCircuit`)
compiles the circuit to an op table and runs it through the selected kernel
backend, which is what the network layers call.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _pykernels as pk
from .backend import get_kernels
from .gates import GateOp, QuantumState, apply_gate, counter, gate_matrix

_KIND_CODE = {"RY": pk.RY, "RX": pk.RX, "XX": pk.XX, "Toffoli": pk.TOFFOLI, "NOT": pk.NOT}


def coupling_pairs(q, topology="chain"):
    if topology not in ("chain", "ring"):
        raise ValueError(f"unknown topology {topology!r}")
    pairs = [(i, i + 1) for i in range(q - 1)]
    if topology == "ring" and q > 2:
        pairs.append((q - 1, 0))
    return pairs


def measured_wires(q):
    return list(range(0, q, 2))


def toffoli_triples(q):
    return [(i, i + 1, i + 2) for i in range(q - 2)]


@dataclass
class QuantumLayerParams:
    """Angles of the trainable block, one row per repetition.

    ``rho`` and ``tail`` feed the two RY stages, ``theta`` the RX stage and
    ``omega``/``phi`` the two Ising stages (one angle per coupled pair).
    """

    rho: np.ndarray
    omega: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    tail: np.ndarray
    topology: str = field(default="chain")

    @property
    def q(self):
        return self.rho.shape[1]

    @property
    def eta(self):
        return self.rho.shape[0]

    @staticmethod
    def size(q, eta, topology="chain"):
        return eta * (3 * q + 2 * len(coupling_pairs(q, topology)))

    @classmethod
    def zeros(cls, q, eta=1, topology="chain"):
        return cls.from_vector(np.zeros(cls.size(q, eta, topology)), q, eta, topology)

    @classmethod
    def random(cls, rng, q, eta=1, topology="chain"):
        vec = rng.uniform(0.0, 2 * np.pi, cls.size(q, eta, topology))
        return cls.from_vector(vec, q, eta, topology)

    @classmethod
    def from_vector(cls, vec, q, eta=1, topology="chain"):
        vec = np.asarray(vec, dtype=float)
        npair = len(coupling_pairs(q, topology))
        if vec.shape != (cls.size(q, eta, topology),):
            raise ValueError(f"expected {cls.size(q, eta, topology)} angles, got {vec.shape}")
        rows = vec.reshape(eta, 3 * q + 2 * npair)
        cuts = np.cumsum([q, npair, q, npair])
        parts = np.split(rows, cuts, axis=1)
        return cls(*(p.copy() for p in parts), topology=topology)

    def vector(self):
        return np.concatenate(
            [self.rho, self.omega, self.theta, self.phi, self.tail], axis=1
        ).reshape(-1)


def _block_ops(q, eta, topology):
    """(kind, wires, slot) for the trainable block; slot indexes the vector."""
    pairs = coupling_pairs(q, topology)
    ops = []
    slot = 0
    for _ in range(eta):
        for stage in ("RY", "XX", "RX", "XX", "RY"):
            if stage == "XX":
                for pair in pairs:
                    ops.append((stage, pair, slot))
                    slot += 1
            else:
                for w in range(q):
                    ops.append((stage, (w,), slot))
                    slot += 1
    return ops


def angle_embed(features):
    """Product state with wire i rotated by RY(features[i]) from |0>."""
    features = np.asarray(features, dtype=float)
    state = QuantumState(len(features))
    for w, x in enumerate(features):
        state = apply_gate(state, GateOp("RY", (w,), float(x)))
    return state


def fe_block(state, params):
    if params.q != state.q:
        raise ValueError(f"params sized for {params.q} qubits, state has {state.q}")
    vec = params.vector()
    for kind, wires, slot in _block_ops(state.q, params.eta, params.topology):
        state = apply_gate(state, GateOp(kind, wires, float(vec[slot]), slot))
    return state


def entangle_and_measure(state):
    """Toffoli on each consecutive triple, then <Z> on wires 0, 2, ...

    With fewer than three qubits the entanglement stage is skipped.
    """
    for triple in toffoli_triples(state.q):
        state = apply_gate(state, GateOp("Toffoli", triple))
    return np.array([state.expval_z(w) for w in measured_wires(state.q)])


def circuit_forward(features, params):
    return entangle_and_measure(fe_block(angle_embed(features), params))


def block_unitary(params):
    """Dense operator of the trainable block followed by the Toffoli stage."""
    q = params.q
    vec = params.vector()
    u = np.eye(2 ** q, dtype=complex)
    for kind, wires, slot in _block_ops(q, params.eta, params.topology):
        u = _embed(gate_matrix(kind, vec[slot]), wires, q) @ u
    for triple in toffoli_triples(q):
        u = _embed(gate_matrix("Toffoli"), triple, q) @ u
    return u


def _embed(u, wires, q):
    """Full 2**q operator of ``u`` acting on ``wires``."""
    wires = list(wires)
    perm = wires + [w for w in range(q) if w not in wires]
    full = np.kron(u, np.eye(2 ** (q - len(wires)))).reshape((2,) * (2 * q))
    inv = list(np.argsort(perm))
    return full.transpose(inv + [q + i for i in inv]).reshape(2 ** q, 2 ** q)


def z_observable(wire, q):
    diag = 1.0 - 2.0 * ((np.arange(2 ** q) >> (q - 1 - wire)) & 1)
    return np.diag(diag).astype(complex)


def dense_forward(features, params):
    """Oracle path: one dense matrix-vector product per layer.

    Each of the five sublayers of every repetition and the whole entanglement
    stage become a single 2**q x 2**q operator; each readout is a dense
    observable product followed by an inner product. Multiplications are
    tallied on :data:`gates.counter` so the cost can be compared with the
    analytic complexity model.
    """
    q = params.q
    vec = params.vector()
    psi = np.array([1.0 + 0j])
    for x in features:
        psi = np.kron(psi, gate_matrix("RY", x)[:, 0])
        counter.add(psi.size)
    ops = _block_ops(q, params.eta, params.topology)
    per_rep = len(ops) // params.eta
    sizes = [q, len(coupling_pairs(q, params.topology))] * 2 + [q]
    i = 0
    for _ in range(params.eta):
        for size in sizes:
            layer = np.eye(2 ** q, dtype=complex)
            for kind, wires, slot in ops[i:i + size]:
                layer = _embed(gate_matrix(kind, vec[slot]), wires, q) @ layer
            i += size
            psi = layer @ psi
            counter.add(layer.size)
    assert i == per_rep * params.eta
    ent = np.eye(2 ** q, dtype=complex)
    for triple in toffoli_triples(q):
        ent = _embed(gate_matrix("Toffoli"), triple, q) @ ent
    psi = ent @ psi
    counter.add(ent.size)
    out = []
    for w in measured_wires(q):
        zpsi = z_observable(w, q) @ psi
        counter.add(4 ** q + 2 ** q)
        out.append(float(np.vdot(psi, zpsi).real))
    return np.array(out)


def complexity_model(q, eta, n_meas):
    """Per-pixel multiplication count of the analytic cost model."""
    return eta * 2 * 4 ** q + n_meas * 2 * (4 ** q + 2 ** q)


class QueenCircuit:
    """Compiled circuit evaluated over a batch of independent instances.

    ``params`` passed to the batch methods has shape (S, P): S parameter sets
    (1 when shared) and ``set_ids`` picks a set for every instance.
    """

    def __init__(self, q=4, eta=1, topology="chain", backend=None):
        self.q = q
        self.eta = eta
        self.topology = topology
        self.n_params = QuantumLayerParams.size(q, eta, topology)
        self.meas_wires = np.array(measured_wires(q), dtype=np.int64)
        self.kernels = get_kernels(backend)
        rows = [(pk.RY, w, 0, 0, pk.SRC_FEATURE, w) for w in range(q)]
        for kind, wires, slot in _block_ops(q, eta, topology):
            w = tuple(wires) + (0,) * (3 - len(wires))
            rows.append((_KIND_CODE[kind],) + w + (pk.SRC_PARAM, slot))
        for triple in toffoli_triples(q):
            rows.append((pk.TOFFOLI,) + triple + (pk.SRC_NONE, 0))
        self.program = np.array(rows, dtype=np.int64)

    @property
    def n_out(self):
        return len(self.meas_wires)

    def _prep(self, features, params, set_ids):
        features = np.ascontiguousarray(features, dtype=np.float64)
        params = np.ascontiguousarray(np.atleast_2d(params), dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.q:
            raise ValueError(f"features must be (N, {self.q}), got {features.shape}")
        if params.shape[1] != self.n_params:
            raise ValueError(f"expected {self.n_params} angles per set, got {params.shape[1]}")
        if set_ids is None:
            set_ids = np.zeros(features.shape[0], dtype=np.int64)
        set_ids = np.ascontiguousarray(set_ids, dtype=np.int64)
        if set_ids.size and (set_ids.min() < 0 or set_ids.max() >= params.shape[0]):
            raise ValueError("set_ids out of range")
        return features, params, set_ids

    def forward(self, features, params, set_ids=None):
        features, params, set_ids = self._prep(features, params, set_ids)
        return self.kernels.forward_batch(
            self.program, self.q, self.meas_wires, features, params, set_ids
        )

    def vjp(self, features, params, grad_out, set_ids=None):
        """Gradients of sum(grad_out * forward) w.r.t. features and parameter sets."""
        features, params, set_ids = self._prep(features, params, set_ids)
        grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
        gf, gp_inst = self.kernels.backward_batch(
            self.program, self.q, self.meas_wires, features, params, set_ids, grad_out
        )
        if params.shape[0] == 1:
            gp = gp_inst.sum(axis=0, keepdims=True)
        else:
            gp = np.zeros_like(params)
            for s in range(params.shape[0]):
                gp[s] = gp_inst[set_ids == s].sum(axis=0)
        return gf, gp


def circuit_gradients(features, params, method="adjoint", backend=None):
    """Jacobians of the readout w.r.t. the block angles and the features.

    Returns ``(d_params, d_features)`` of shapes (n_out, P) and (n_out, q).
    ``method`` is ``"adjoint"`` (reverse sweep through the batched kernel) or
    ``"shift"`` (two evaluations per angle at +-pi/2).
    """
    features = np.asarray(features, dtype=float)
    vec = params.vector()
    q = len(features)
    if method == "adjoint":
        circ = QueenCircuit(q, params.eta, params.topology, backend=backend)
        m = circ.n_out
        eye = np.eye(m)
        gf, gp = circ.kernels.backward_batch(
            circ.program, q, circ.meas_wires, np.tile(features, (m, 1)),
            vec[None, :], np.zeros(m, dtype=np.int64), eye,
        )
        return gp, gf
    if method != "shift":
        raise ValueError(f"unknown gradient method {method!r}")
    shift = np.pi / 2
    n_out = len(measured_wires(q))
    d_params = np.zeros((n_out, vec.size))
    for k in range(vec.size):
        plus, minus = vec.copy(), vec.copy()
        plus[k] += shift
        minus[k] -= shift
        fp = circuit_forward(features, QuantumLayerParams.from_vector(plus, q, params.eta, params.topology))
        fm = circuit_forward(features, QuantumLayerParams.from_vector(minus, q, params.eta, params.topology))
        d_params[:, k] = (fp - fm) / 2
    d_feats = np.zeros((n_out, q))
    for k in range(q):
        plus, minus = features.copy(), features.copy()
        plus[k] += shift
        minus[k] -= shift
        d_feats[:, k] = (circuit_forward(plus, params) - circuit_forward(minus, params)) / 2
    return d_params, d_feats
