"""State-preparation fits with the trainable block, used to probe how much of
the unitary group one FE stack can reach."""
import numpy as np

from .circuit import QuantumLayerParams, _block_ops
from .gates import gate_matrix


def haar_state(rng, q):
    """Haar-random pure state of ``q`` qubits."""
    z = rng.normal(size=2 ** q) + 1j * rng.normal(size=2 ** q)
    return z / np.linalg.norm(z)


def _apply(psi, u, wires, q):
    k = len(wires)
    t = np.moveaxis(psi.reshape((2,) * q), wires, range(k)).reshape(2 ** k, -1)
    t = (u @ t).reshape((2,) * q)
    return np.moveaxis(t, range(k), wires).reshape(-1)


def fidelity_and_grad(vec, target, q, eta=1, topology="chain"):
    """|<target|U(vec)|0>|^2 and its gradient w.r.t. the block angles.

    Every block gate is exp(-i theta P / 2) for a Pauli string P, so its
    derivative is G(theta + pi) / 2; the gradient comes from one forward
    and one reverse sweep.
    """
    ops = _block_ops(q, eta, topology)
    psi = np.zeros(2 ** q, dtype=complex)
    psi[0] = 1.0
    mats = [gate_matrix(kind, vec[slot]) for kind, _, slot in ops]
    for (_, wires, _), u in zip(ops, mats):
        psi = _apply(psi, u, list(wires), q)
    overlap = np.vdot(target, psi)
    grad = np.zeros_like(vec)
    lam = target.astype(complex)
    for (kind, wires, slot), u in zip(reversed(ops), reversed(mats)):
        wires = list(wires)
        psi = _apply(psi, u.conj().T, wires, q)  # state before this gate
        d = 0.5 * gate_matrix(kind, vec[slot] + np.pi)
        grad[slot] += 2 * np.real(np.conj(overlap) * np.vdot(lam, _apply(psi, d, wires, q)))
        lam = _apply(lam, u.conj().T, wires, q)
    return float(abs(overlap) ** 2), grad


def fit_state(target, q, eta=2, topology="chain", steps=2000, lr=0.05, rng=None, goal=0.99, restarts=3):
    """Maximise the fidelity with Adam; return ``(params, fidelity, steps_used)``.

    Stops as soon as ``goal`` is reached. Up to ``restarts`` fresh random
    initialisations share the ``steps`` budget.
    """
    rng = rng or np.random.default_rng(0)
    size = QuantumLayerParams.size(q, eta, topology)
    best = (None, -1.0)
    used = 0
    per_try = steps // restarts
    for _ in range(restarts):
        vec = rng.uniform(0, 2 * np.pi, size)
        m = np.zeros(size)
        v = np.zeros(size)
        for t in range(1, per_try + 1):
            f, g = fidelity_and_grad(vec, target, q, eta, topology)
            used += 1
            if f > best[1]:
                best = (vec.copy(), f)
            if f >= goal:
                return QuantumLayerParams.from_vector(vec, q, eta, topology), f, used
            g = -g  # ascend
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            vec -= lr * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    return QuantumLayerParams.from_vector(best[0], q, eta, topology), best[1], used
