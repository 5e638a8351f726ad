# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched statevector kernels.

Same contract as ``_pykernels``: instances are independent, each one runs the
whole program on its own 2**q amplitudes, and per-instance parameter gradients
are written to disjoint rows so the reduction order stays fixed.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    RY = 0
    RX = 1
    XX = 2
    TOFFOLI = 3
    NOT = 4
    SRC_NONE = 0
    SRC_FEATURE = 1
    SRC_PARAM = 2


cdef inline void _apply(double complex* s, int dim, int q, long kind,
                        long w0, long w1, long w2,
                        double d, double g) noexcept nogil:
    cdef int i, j, m0, m1, m2
    cdef double complex a0, a1, mig
    mig = -1j * g
    if kind == RY or kind == RX:
        m0 = 1 << (q - 1 - w0)
        for i in range(dim):
            if i & m0:
                continue
            j = i | m0
            a0 = s[i]
            a1 = s[j]
            if kind == RY:
                s[i] = d * a0 - g * a1
                s[j] = g * a0 + d * a1
            else:
                s[i] = d * a0 + mig * a1
                s[j] = mig * a0 + d * a1
    elif kind == XX:
        m0 = 1 << (q - 1 - w0)
        m1 = 1 << (q - 1 - w1)
        for i in range(dim):
            # visit each pair once, from the member with w0 bit clear
            if i & m0:
                continue
            j = i ^ m0 ^ m1
            a0 = s[i]
            a1 = s[j]
            s[i] = d * a0 + mig * a1
            s[j] = mig * a0 + d * a1
    elif kind == TOFFOLI:
        m0 = 1 << (q - 1 - w0)
        m1 = 1 << (q - 1 - w1)
        m2 = 1 << (q - 1 - w2)
        for i in range(dim):
            if (i & m0) and not (i & m1) and not (i & m2):
                j = i | m2
                a0 = s[i]
                s[i] = s[j]
                s[j] = a0
    elif kind == NOT:
        m0 = 1 << (q - 1 - w0)
        for i in range(dim):
            if i & m0:
                continue
            j = i | m0
            a0 = s[i]
            s[i] = s[j]
            s[j] = a0


cdef void _angles(const long[:, ::1] prog, const double[:, ::1] feats,
                  const double[:, ::1] pc, const double[:, ::1] ps,
                  long set_id, long n, double* c, double* sn) noexcept nogil:
    """Fill cos/sin of the half angle of every op for instance ``n``."""
    cdef int k
    cdef double th
    for k in range(prog.shape[0]):
        if prog[k, 4] == SRC_FEATURE:
            th = 0.5 * feats[n, prog[k, 5]]
            c[k] = cos(th)
            sn[k] = sin(th)
        elif prog[k, 4] == SRC_PARAM:
            c[k] = pc[set_id, prog[k, 5]]
            sn[k] = ps[set_id, prog[k, 5]]
        else:
            c[k] = 1.0
            sn[k] = 0.0


cdef void _run(double complex* s, int dim, int q, const long[:, ::1] prog,
               const double* c, const double* sn) noexcept nogil:
    cdef int i, k
    for i in range(dim):
        s[i] = 0
    s[0] = 1
    for k in range(prog.shape[0]):
        _apply(s, dim, q, prog[k, 0], prog[k, 1], prog[k, 2], prog[k, 3], c[k], sn[k])


def _half_angle_tables(params):
    half = 0.5 * np.ascontiguousarray(params, dtype=np.float64)
    return np.ascontiguousarray(np.cos(half)), np.ascontiguousarray(np.sin(half))


def forward_batch(program, int q, meas_wires, features, params, set_ids):
    cdef const long[:, ::1] prog = np.ascontiguousarray(program, dtype=np.int64)
    cdef const double[:, ::1] feats = np.ascontiguousarray(features, dtype=np.float64)
    pc_arr, ps_arr = _half_angle_tables(params)
    cdef const double[:, ::1] pc = pc_arr
    cdef const double[:, ::1] ps = ps_arr
    cdef const long[::1] sets = np.ascontiguousarray(set_ids, dtype=np.int64)
    cdef const long[::1] mw = np.ascontiguousarray(meas_wires, dtype=np.int64)
    cdef long n_inst = feats.shape[0]
    cdef int nm = mw.shape[0]
    cdef int dim = 1 << q
    cdef int n_ops = prog.shape[0]
    out_arr = np.zeros((n_inst, nm))
    cdef double[:, ::1] out = out_arr
    cdef double complex* s = <double complex*> malloc(dim * sizeof(double complex))
    cdef double* c = <double*> malloc(2 * n_ops * sizeof(double))
    cdef double* sn
    cdef long n
    cdef int i, m, mask
    cdef double p
    if s == NULL or c == NULL:
        free(s)
        free(c)
        raise MemoryError()
    sn = c + n_ops
    try:
        with nogil:
            for n in range(n_inst):
                _angles(prog, feats, pc, ps, sets[n], n, c, sn)
                _run(s, dim, q, prog, c, sn)
                for i in range(dim):
                    p = s[i].real * s[i].real + s[i].imag * s[i].imag
                    for m in range(nm):
                        mask = 1 << (q - 1 - mw[m])
                        if i & mask:
                            out[n, m] -= p
                        else:
                            out[n, m] += p
    finally:
        free(s)
        free(c)
    return out_arr


def backward_batch(program, int q, meas_wires, features, params, set_ids, grad_out):
    cdef const long[:, ::1] prog = np.ascontiguousarray(program, dtype=np.int64)
    cdef const double[:, ::1] feats = np.ascontiguousarray(features, dtype=np.float64)
    pc_arr, ps_arr = _half_angle_tables(params)
    cdef const double[:, ::1] pc = pc_arr
    cdef const double[:, ::1] ps = ps_arr
    cdef const long[::1] sets = np.ascontiguousarray(set_ids, dtype=np.int64)
    cdef const long[::1] mw = np.ascontiguousarray(meas_wires, dtype=np.int64)
    cdef const double[:, ::1] gout = np.ascontiguousarray(grad_out, dtype=np.float64)
    cdef long n_inst = feats.shape[0]
    cdef int nm = mw.shape[0]
    cdef int dim = 1 << q
    cdef int n_ops = prog.shape[0]
    gf_arr = np.zeros((n_inst, feats.shape[1]))
    gp_arr = np.zeros((n_inst, pc.shape[1]))
    cdef double[:, ::1] gf = gf_arr
    cdef double[:, ::1] gp = gp_arr
    cdef double complex* psi = <double complex*> malloc(3 * dim * sizeof(double complex))
    cdef double* c = <double*> malloc(2 * n_ops * sizeof(double))
    cdef double* sn
    cdef double complex* lam
    cdef double complex* dpsi
    cdef long n
    cdef int i, k, m
    cdef double d, g, obs, acc
    if psi == NULL or c == NULL:
        free(psi)
        free(c)
        raise MemoryError()
    sn = c + n_ops
    lam = psi + dim
    dpsi = psi + 2 * dim
    try:
        with nogil:
            for n in range(n_inst):
                _angles(prog, feats, pc, ps, sets[n], n, c, sn)
                _run(psi, dim, q, prog, c, sn)
                for i in range(dim):
                    obs = 0.0
                    for m in range(nm):
                        if i & (1 << (q - 1 - mw[m])):
                            obs -= gout[n, m]
                        else:
                            obs += gout[n, m]
                    lam[i] = psi[i] * obs
                for k in range(n_ops - 1, -1, -1):
                    if prog[k, 4] == SRC_NONE:
                        _apply(psi, dim, q, prog[k, 0], prog[k, 1], prog[k, 2], prog[k, 3], 1.0, 0.0)
                        _apply(lam, dim, q, prog[k, 0], prog[k, 1], prog[k, 2], prog[k, 3], 1.0, 0.0)
                        continue
                    d = c[k]
                    g = sn[k]
                    _apply(psi, dim, q, prog[k, 0], prog[k, 1], prog[k, 2], prog[k, 3], d, -g)
                    for i in range(dim):
                        dpsi[i] = psi[i]
                    _apply(dpsi, dim, q, prog[k, 0], prog[k, 1], prog[k, 2], prog[k, 3], -0.5 * g, 0.5 * d)
                    acc = 0.0
                    for i in range(dim):
                        acc += lam[i].real * dpsi[i].real + lam[i].imag * dpsi[i].imag
                    if prog[k, 4] == SRC_FEATURE:
                        gf[n, prog[k, 5]] += 2.0 * acc
                    else:
                        gp[n, prog[k, 5]] += 2.0 * acc
                    _apply(lam, dim, q, prog[k, 0], prog[k, 1], prog[k, 2], prog[k, 3], d, -g)
    finally:
        free(psi)
        free(c)
    return gf_arr, gp_arr
