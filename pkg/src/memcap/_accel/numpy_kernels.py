"""Plain-numpy time stepping: reference implementation of the hot loops.

Semantics shared with numba_kernels:

  * light is slaved to the spin wave: at each RK4 stage the light field is
    swept along z with the exponential-trapezoid rule
        a[k+1] = E a[k] + W0 S[k] + W1 S[k+1]
    where E, W0, W1 fold the constant system matrix, the step, and the
    spin-to-light source into precomputed (n, n) matrices;
  * the spin field S(z) is advanced in time by classic RK4 with
        dS/dt = -gs S - a @ CSB
    (CSB = coupling matrix premultiplied by the light-to-spin coefficient);
  * storage drives the z=0 boundary with the input pulse sampled on the
    half-step grid (2 nt + 1 samples); retrieval has a dark input and
    records the exit-face field at every full step.

Returns include sum|S|^2 per step for cheap stability monitoring.
"""

import numpy as np


def _sweep(E, W0, W1, S, a0):
    src = S[:-1] @ W0.T + S[1:] @ W1.T
    a = np.empty_like(S)
    a[0] = a0
    cur = a0
    et = E.T
    for k in range(src.shape[0]):
        cur = cur @ et + src[k]
        a[k + 1] = cur
    return a


def _rhs(S, a, CSB, gs):
    return -gs * S - a @ CSB


def run_storage(E, W0, W1, CSB, gs, pulse, dt, n_z):
    n = pulse.shape[1]
    n_t = (pulse.shape[0] - 1) // 2
    S = np.zeros((n_z + 1, n), dtype=np.complex128)
    snorm = np.zeros(n_t + 1)
    for i in range(n_t):
        early, mid, late = pulse[2 * i], pulse[2 * i + 1], pulse[2 * i + 2]
        k1 = _rhs(S, _sweep(E, W0, W1, S, early), CSB, gs)
        s2 = S + (0.5 * dt) * k1
        k2 = _rhs(s2, _sweep(E, W0, W1, s2, mid), CSB, gs)
        s3 = S + (0.5 * dt) * k2
        k3 = _rhs(s3, _sweep(E, W0, W1, s3, mid), CSB, gs)
        s4 = S + dt * k3
        k4 = _rhs(s4, _sweep(E, W0, W1, s4, late), CSB, gs)
        S = S + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        snorm[i + 1] = float((abs(S) ** 2).sum())
    return S, snorm


def run_retrieval(E, W0, W1, CSB, gs, S0, n_t, dt):
    n = S0.shape[1]
    S = S0.copy()
    dark = np.zeros(n, dtype=np.complex128)
    a_out = np.empty((n_t + 1, n), dtype=np.complex128)
    snorm = np.zeros(n_t + 1)
    snorm[0] = float((abs(S) ** 2).sum())
    for i in range(n_t):
        a1 = _sweep(E, W0, W1, S, dark)
        a_out[i] = a1[-1]
        k1 = _rhs(S, a1, CSB, gs)
        s2 = S + (0.5 * dt) * k1
        k2 = _rhs(s2, _sweep(E, W0, W1, s2, dark), CSB, gs)
        s3 = S + (0.5 * dt) * k2
        k3 = _rhs(s3, _sweep(E, W0, W1, s3, dark), CSB, gs)
        s4 = S + dt * k3
        k4 = _rhs(s4, _sweep(E, W0, W1, s4, dark), CSB, gs)
        S = S + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        snorm[i + 1] = float((abs(S) ** 2).sum())
    a_out[n_t] = _sweep(E, W0, W1, S, dark)[-1]
    return S, a_out, snorm
