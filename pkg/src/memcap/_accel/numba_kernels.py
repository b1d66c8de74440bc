"""Numba-compiled time stepping.  Same contract as numpy_kernels.

The mode count per azimuthal block is small (the time-domain path exists
for n <= 4 radial modes), so the inner matrix products are written as
explicit loops; numba turns the whole step loop into one compiled region,
which removes the per-step interpreter overhead that dominates the numpy
variant.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _sweep_into(E, W0, W1, S, a0, a):
    n_nodes, n = S.shape
    for p in range(n):
        a[0, p] = a0[p]
    for k in range(n_nodes - 1):
        for p in range(n):
            acc = 0.0 + 0.0j
            for q in range(n):
                acc += E[p, q] * a[k, q]
                acc += W0[p, q] * S[k, q]
                acc += W1[p, q] * S[k + 1, q]
            a[k + 1, p] = acc


@njit(cache=True)
def _rhs_into(S, a, CSB, gs, out):
    n_nodes, n = S.shape
    for k in range(n_nodes):
        for p in range(n):
            acc = -gs * S[k, p]
            for q in range(n):
                acc -= a[k, q] * CSB[q, p]
            out[k, p] = acc


@njit(cache=True)
def _axpy(S, k, c, out):
    n_nodes, n = S.shape
    for j in range(n_nodes):
        for p in range(n):
            out[j, p] = S[j, p] + c * k[j, p]


@njit(cache=True)
def _rk4_combine(S, k1, k2, k3, k4, dt):
    n_nodes, n = S.shape
    total = 0.0
    for j in range(n_nodes):
        for p in range(n):
            val = S[j, p] + (dt / 6.0) * (k1[j, p] + 2.0 * (k2[j, p] + k3[j, p]) + k4[j, p])
            S[j, p] = val
            total += val.real * val.real + val.imag * val.imag
    return total


@njit(cache=True)
def run_storage(E, W0, W1, CSB, gs, pulse, dt, n_z):
    n = pulse.shape[1]
    n_t = (pulse.shape[0] - 1) // 2
    S = np.zeros((n_z + 1, n), dtype=np.complex128)
    a = np.empty((n_z + 1, n), dtype=np.complex128)
    k1 = np.empty_like(S)
    k2 = np.empty_like(S)
    k3 = np.empty_like(S)
    k4 = np.empty_like(S)
    stage = np.empty_like(S)
    snorm = np.zeros(n_t + 1)
    for i in range(n_t):
        _sweep_into(E, W0, W1, S, pulse[2 * i], a)
        _rhs_into(S, a, CSB, gs, k1)
        _axpy(S, k1, 0.5 * dt, stage)
        _sweep_into(E, W0, W1, stage, pulse[2 * i + 1], a)
        _rhs_into(stage, a, CSB, gs, k2)
        _axpy(S, k2, 0.5 * dt, stage)
        _sweep_into(E, W0, W1, stage, pulse[2 * i + 1], a)
        _rhs_into(stage, a, CSB, gs, k3)
        _axpy(S, k3, dt, stage)
        _sweep_into(E, W0, W1, stage, pulse[2 * i + 2], a)
        _rhs_into(stage, a, CSB, gs, k4)
        snorm[i + 1] = _rk4_combine(S, k1, k2, k3, k4, dt)
    return S, snorm


@njit(cache=True)
def run_retrieval(E, W0, W1, CSB, gs, S0, n_t, dt):
    n_nodes, n = S0.shape
    S = S0.copy()
    dark = np.zeros(n, dtype=np.complex128)
    a = np.empty((n_nodes, n), dtype=np.complex128)
    k1 = np.empty_like(S)
    k2 = np.empty_like(S)
    k3 = np.empty_like(S)
    k4 = np.empty_like(S)
    stage = np.empty_like(S)
    a_out = np.empty((n_t + 1, n), dtype=np.complex128)
    snorm = np.zeros(n_t + 1)
    total = 0.0
    for j in range(n_nodes):
        for p in range(n):
            total += S[j, p].real ** 2 + S[j, p].imag ** 2
    snorm[0] = total
    for i in range(n_t):
        _sweep_into(E, W0, W1, S, dark, a)
        for p in range(n):
            a_out[i, p] = a[n_nodes - 1, p]
        _rhs_into(S, a, CSB, gs, k1)
        _axpy(S, k1, 0.5 * dt, stage)
        _sweep_into(E, W0, W1, stage, dark, a)
        _rhs_into(stage, a, CSB, gs, k2)
        _axpy(S, k2, 0.5 * dt, stage)
        _sweep_into(E, W0, W1, stage, dark, a)
        _rhs_into(stage, a, CSB, gs, k3)
        _axpy(S, k3, dt, stage)
        _sweep_into(E, W0, W1, stage, dark, a)
        _rhs_into(stage, a, CSB, gs, k4)
        snorm[i + 1] = _rk4_combine(S, k1, k2, k3, k4, dt)
    _sweep_into(E, W0, W1, S, dark, a)
    for p in range(n):
        a_out[n_t, p] = a[n_nodes - 1, p]
    return S, a_out, snorm
