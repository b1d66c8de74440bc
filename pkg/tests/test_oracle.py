import numpy as np
import pytest

from memcap._accel import numba_kernels, numpy_kernels
from memcap.basis import build_basis, coupling_block
from memcap.cli import oracle_case
from memcap.errors import ConvergenceError, StabilityError
from memcap.memory_map import end_to_end_map, make_grid
from memcap.oracle import (TimeDomainRun, analyze_output, default_time_step,
                           eigenmode_spectrum, integrate_retrieval,
                           integrate_storage, sample_pulse)
from memcap.params import ModelParams, ParameterError, Resolution

_PARAMS = ModelParams(depth=10.0, fresnel=0.5)
_RES = Resolution(n_radial_max=2, m_max=0, n_freq=32, n_axial=12,
                  freq_halfwidth=36.0)


def _gauss_pulse(t):
    return np.array([np.exp(-0.5 * ((t - 4.0) / 1.2) ** 2), 0.0], dtype=complex)


@pytest.fixture(scope="module")
def gaussian_run():
    """Gaussian input stored and retrieved forward on a two-mode block."""
    basis = build_basis(0, _RES)
    coupling = coupling_block(basis)
    pulse, dt = sample_pulse(_gauss_pulse, 10.0,
                             default_time_step(_PARAMS, coupling), 2)
    run = TimeDomainRun(_PARAMS, basis, coupling, pulse, dt, n_axial=80)
    integrate_storage(run)
    integrate_retrieval(run, "forward")
    return run


def test_zero_input_stores_nothing():
    basis = build_basis(0, _RES)
    coupling = coupling_block(basis)
    dt = default_time_step(_PARAMS, coupling)
    pulse = np.zeros((5, basis.size), dtype=complex)
    run = TimeDomainRun(_PARAMS, basis, coupling, pulse, dt, n_axial=16)
    spin, eta = integrate_storage(run)
    assert eta == 0.0
    assert not spin.any()
    with pytest.raises(ParameterError, match="input energy"):
        integrate_retrieval(run, "forward")


def test_pulse_shape_validation():
    basis = build_basis(0, _RES)
    coupling = coupling_block(basis)
    dt = default_time_step(_PARAMS, coupling)
    with pytest.raises(ParameterError, match="odd number"):
        TimeDomainRun(_PARAMS, basis, coupling,
                      np.zeros((4, 2), dtype=complex), dt)
    with pytest.raises(ParameterError, match="shape"):
        TimeDomainRun(_PARAMS, basis, coupling,
                      np.zeros((5, 3), dtype=complex), dt)
    with pytest.raises(ParameterError, match="shape"):
        TimeDomainRun(_PARAMS, basis, coupling,
                      np.zeros(5, dtype=complex), dt)


def test_mode_count_cap():
    res = Resolution(n_radial_max=5, m_max=0, n_freq=32, n_axial=12,
                     freq_halfwidth=36.0)
    basis = build_basis(0, res)
    coupling = coupling_block(basis)
    with pytest.raises(ParameterError, match="at most 4"):
        TimeDomainRun(_PARAMS, basis, coupling,
                      np.zeros((5, 5), dtype=complex),
                      default_time_step(_PARAMS, coupling))


def test_coarse_time_step_rejected():
    basis = build_basis(0, _RES)
    coupling = coupling_block(basis)
    with pytest.raises(StabilityError, match="too coarse"):
        TimeDomainRun(_PARAMS, basis, coupling,
                      np.zeros((5, 2), dtype=complex), time_step=1.0)
    assert issubclass(StabilityError, ConvergenceError)


def test_sample_pulse_lands_on_endpoint():
    pulse, dt = sample_pulse(_gauss_pulse, 10.0, 0.3, 2)
    n_t = (pulse.shape[0] - 1) // 2
    assert pulse.shape[0] % 2 == 1
    assert dt <= 0.3
    assert n_t * dt == pytest.approx(10.0, rel=1e-15)
    np.testing.assert_allclose(pulse[-1], _gauss_pulse(10.0))


def test_storage_step_size_converged():
    basis = build_basis(0, _RES)
    coupling = coupling_block(basis)
    dt0 = default_time_step(_PARAMS, coupling)
    etas = []
    for scale in (1.0, 0.5):
        pulse, dt = sample_pulse(_gauss_pulse, 10.0, scale * dt0, 2)
        run = TimeDomainRun(_PARAMS, basis, coupling, pulse, dt, n_axial=60)
        etas.append(integrate_storage(run)[1])
    assert 0.0 < etas[0] <= 1.0
    assert abs(etas[0] - etas[1]) < 1e-6


def test_retrieval_needs_a_spin_wave():
    basis = build_basis(0, _RES)
    coupling = coupling_block(basis)
    pulse, dt = sample_pulse(_gauss_pulse, 10.0,
                             default_time_step(_PARAMS, coupling), 2)
    run = TimeDomainRun(_PARAMS, basis, coupling, pulse, dt, n_axial=16)
    with pytest.raises(ParameterError, match="spin wave"):
        integrate_retrieval(run, "forward")
    with pytest.raises(ParameterError, match="direction"):
        integrate_retrieval(run, "up")


def test_total_efficiency_bounded_by_storage(gaussian_run):
    run = gaussian_run
    assert 0.0 < run.eta_total <= run.eta_storage + 1e-9
    assert run.eta_storage <= 1.0


def test_output_projection_energy(gaussian_run):
    """Weighted frequency coordinates of the output should account for the
    retrieved energy up to the out-of-band tail."""
    run = gaussian_run
    x, w = np.polynomial.legendre.leggauss(320)
    beta = analyze_output(run, 36.0 * x, 36.0 * w)
    windowed = float((np.abs(beta) ** 2).sum()) / run.energy_in
    assert windowed <= run.eta_total + 1e-9
    assert run.eta_total - windowed < 5e-4


def test_analyze_output_requires_retrieval():
    basis = build_basis(0, _RES)
    coupling = coupling_block(basis)
    pulse, dt = sample_pulse(_gauss_pulse, 10.0,
                             default_time_step(_PARAMS, coupling), 2)
    run = TimeDomainRun(_PARAMS, basis, coupling, pulse, dt, n_axial=16)
    with pytest.raises(ParameterError, match="no retrieved field"):
        analyze_output(run, np.array([0.0]), np.array([1.0]))


def test_eigenmode_spectrum_reproduces_nodes(small_block):
    params, res, basis, coupling = small_block
    grid = make_grid(res, params)
    emap = end_to_end_map(params, basis, coupling, grid)
    _, sig, vh = np.linalg.svd(emap.operator)
    right = vh[0].conj()
    spec = eigenmode_spectrum(emap, basis, coupling, sig[0], right,
                              grid.freq_nodes)
    expected = right.reshape(grid.freq_nodes.size, basis.size)
    expected = expected / np.sqrt(grid.freq_weights / (2.0 * np.pi))[:, None]
    np.testing.assert_allclose(spec, expected, atol=1e-12 * np.abs(expected).max())


def test_leading_mode_kernel_vs_time_domain():
    """End-to-end check on one small instance: the frequency-domain map's
    top singular value squared should match the measured total efficiency
    of its realized input pulse."""
    sigma_sq, eta = oracle_case(10.0, 0.5, 0, 2, "forward", 36.0)
    assert 0.0 < sigma_sq < 1.0
    assert abs(sigma_sq - eta) <= 1e-3


def test_backends_agree():
    rng = np.random.default_rng(99)

    def cplx(*shape):
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)

    n, nz, nt = 3, 10, 9
    ops = (0.2 * cplx(n, n), 0.1 * cplx(n, n), 0.1 * cplx(n, n),
           0.3 * cplx(n, n), 0.4 + 0.1j)
    pulse = cplx(2 * nt + 1, n)
    s_nb, norm_nb = numba_kernels.run_storage(*ops, pulse, 0.05, nz)
    s_np, norm_np = numpy_kernels.run_storage(*ops, pulse, 0.05, nz)
    np.testing.assert_allclose(s_nb, s_np, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(norm_nb, norm_np, rtol=1e-12)

    spin0 = cplx(nz + 1, n)
    out_nb = numba_kernels.run_retrieval(*ops, spin0, 12, 0.05)
    out_np = numpy_kernels.run_retrieval(*ops, spin0, 12, 0.05)
    for a, b in zip(out_nb, out_np):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)
