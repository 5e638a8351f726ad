"""Batched statevector kernels in plain numpy.

Every instance (one pixel, one channel group) carries its own 2**q statevector;
all instances are advanced gate by gate in lock-step. This module is the
reference path and the fallback when the compiled extension is unavailable.
"""
import numpy as np

RY, RX, XX, TOFFOLI, NOT = 0, 1, 2, 3, 4
SRC_NONE, SRC_FEATURE, SRC_PARAM = 0, 1, 2


def _index(q, fixed):
    idx = [slice(None)] * (q + 1)
    for wire, bit in fixed.items():
        idx[wire + 1] = bit
    return tuple(idx)


def _apply(st, q, op, d, g):
    """Apply one op in place to ``st`` of shape (N, 2, ..., 2).

    ``d`` and ``g`` play the roles of cos(theta/2) and sin(theta/2) and may be
    replaced by any pair (adjoint: (d, -g), derivative: (-g/2, d/2)) because
    every rotation matrix here is linear in that pair.
    """
    kind, w0, w1, w2 = int(op[0]), int(op[1]), int(op[2]), int(op[3])
    if kind == RY or kind == RX:
        shape = (-1,) + (1,) * (q - 1)
        d = np.reshape(d, shape) if np.ndim(d) else d
        g = np.reshape(g, shape) if np.ndim(g) else g
        i0, i1 = _index(q, {w0: 0}), _index(q, {w0: 1})
        a0, a1 = st[i0], st[i1]
        if kind == RY:
            n0 = d * a0 - g * a1
            n1 = g * a0 + d * a1
        else:
            n0 = d * a0 - 1j * g * a1
            n1 = -1j * g * a0 + d * a1
        st[i0] = n0
        st[i1] = n1
    elif kind == XX:
        shape = (-1,) + (1,) * (q - 2)
        d = np.reshape(d, shape) if np.ndim(d) else d
        g = np.reshape(g, shape) if np.ndim(g) else g
        for b in (0, 1):
            ia = _index(q, {w0: b, w1: 0})
            ib = _index(q, {w0: 1 - b, w1: 1})
            a, c = st[ia], st[ib]
            na = d * a - 1j * g * c
            nc = -1j * g * a + d * c
            st[ia] = na
            st[ib] = nc
    elif kind == TOFFOLI:
        # control w0 = 1, anti-control w1 = 0, flip target w2
        i0 = _index(q, {w0: 1, w1: 0, w2: 0})
        i1 = _index(q, {w0: 1, w1: 0, w2: 1})
        tmp = st[i0].copy()
        st[i0] = st[i1]
        st[i1] = tmp
    elif kind == NOT:
        i0, i1 = _index(q, {w0: 0}), _index(q, {w0: 1})
        tmp = st[i0].copy()
        st[i0] = st[i1]
        st[i1] = tmp
    else:
        raise ValueError(f"unknown op kind {kind}")


def _angles(op, features, params, set_ids):
    src, idx = int(op[4]), int(op[5])
    if src == SRC_FEATURE:
        theta = features[:, idx]
    elif src == SRC_PARAM:
        theta = params[:, idx][set_ids]
    else:
        return None
    return theta


def _zsigns(q, meas_wires):
    basis = np.arange(2 ** q)
    return np.array(
        [1.0 - 2.0 * ((basis >> (q - 1 - w)) & 1) for w in meas_wires]
    )


def _run(program, q, features, params, set_ids):
    n = features.shape[0]
    st = np.zeros((n,) + (2,) * q, dtype=np.complex128)
    st.reshape(n, -1)[:, 0] = 1.0
    for op in program:
        theta = _angles(op, features, params, set_ids)
        if theta is None:
            _apply(st, q, op, 1.0, 0.0)
        else:
            _apply(st, q, op, np.cos(theta / 2), np.sin(theta / 2))
    return st


def forward_batch(program, q, meas_wires, features, params, set_ids):
    st = _run(program, q, features, params, set_ids).reshape(features.shape[0], -1)
    probs = st.real ** 2 + st.imag ** 2
    return probs @ _zsigns(q, meas_wires).T


def backward_batch(program, q, meas_wires, features, params, set_ids, grad_out):
    """Adjoint-method vector-Jacobian product.

    Returns ``(grad_features, grad_params)`` with per-instance parameter
    gradients of shape (N, P); the caller reduces them over instances.
    """
    n = features.shape[0]
    psi = _run(program, q, features, params, set_ids)
    obs = grad_out @ _zsigns(q, meas_wires)
    lam = (psi.reshape(n, -1) * obs).reshape(psi.shape)
    gf = np.zeros_like(features)
    gp = np.zeros((n, params.shape[1]))
    for op in program[::-1]:
        theta = _angles(op, features, params, set_ids)
        if theta is None:
            _apply(psi, q, op, 1.0, 0.0)
            _apply(lam, q, op, 1.0, 0.0)
            continue
        d, g = np.cos(theta / 2), np.sin(theta / 2)
        _apply(psi, q, op, d, -g)
        dpsi = psi.copy()
        _apply(dpsi, q, op, -g / 2, d / 2)
        val = 2.0 * np.einsum(
            "ni,ni->n", lam.reshape(n, -1).conj(), dpsi.reshape(n, -1)
        ).real
        if int(op[4]) == SRC_FEATURE:
            gf[:, int(op[5])] += val
        else:
            gp[:, int(op[5])] += val
        _apply(lam, q, op, d, -g)
    return gf, gp
