"""Time the numba and numpy backends on the same integration workload.

Builds one representative time-domain run (d0 = 30, F = 1, m = 0, three
radial modes, Gaussian input) and times run_storage / run_retrieval from
both kernel modules on identical operands.  Numba timings exclude the
first (compiling) call.

Usage: python3 benchmarks/bench_backends.py [repeats]
"""

import sys
import time

import numpy as np

from memcap._accel import numba_kernels, numpy_kernels
from memcap.basis import build_basis, coupling_block
from memcap.oracle import _stepping_operators, default_time_step, sample_pulse
from memcap.params import ModelParams, Resolution

N_AXIAL = 200
T_END = 10.0


def make_workload():
    params = ModelParams(depth=30.0, fresnel=1.0)
    res = Resolution(n_radial_max=3, m_max=0, n_freq=8, n_axial=24)
    basis = build_basis(0, res)
    coupling = coupling_block(basis)
    dt = default_time_step(params, coupling)
    n = coupling.shape[0]

    def gaussian(t):
        env = np.exp(-0.5 * ((t - 0.4 * T_END) / 1.2) ** 2)
        return np.full(n, env / np.sqrt(n), dtype=np.complex128)

    pulse, dt = sample_pulse(gaussian, T_END, dt, n)
    ops = _stepping_operators(params, basis, coupling, N_AXIAL)
    return ops, pulse, dt


def time_backend(kernels, ops, pulse, dt, repeats):
    E, W0, W1, CSB, gs = ops
    n_t = (pulse.shape[0] - 1) // 2

    def storage():
        return kernels.run_storage(E, W0, W1, CSB, gs, pulse, dt, N_AXIAL)

    S, _ = storage()  # warmup (numba compiles here)

    def retrieval():
        return kernels.run_retrieval(E, W0, W1, CSB, gs, S, n_t, dt)

    retrieval()

    best = {}
    for label, fn in (("storage", storage), ("retrieval", retrieval)):
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        best[label] = min(times)
    _, a_out, _ = retrieval()
    return best, a_out


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 3
    ops, pulse, dt = make_workload()
    n_t = (pulse.shape[0] - 1) // 2
    print(f"workload: {pulse.shape[1]} modes, {n_t} time steps, {N_AXIAL} axial steps")

    results = {}
    outputs = {}
    for name, kernels in (("numba", numba_kernels), ("numpy", numpy_kernels)):
        results[name], outputs[name] = time_backend(kernels, ops, pulse, dt, repeats)

    gap = np.abs(outputs["numba"] - outputs["numpy"]).max()
    print(f"max |a_out| backend difference: {gap:.3e}")
    print(f"{'stage':<10} {'numba [s]':>10} {'numpy [s]':>10} {'speedup':>8}")
    for stage in ("storage", "retrieval"):
        tb = results["numba"][stage]
        tp = results["numpy"][stage]
        print(f"{stage:<10} {tb:>10.4f} {tp:>10.4f} {tp / tb:>7.1f}x")


if __name__ == "__main__":
    main()
