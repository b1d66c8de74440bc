import numpy as np
import pytest
from scipy.linalg import expm

from memcap.basis import build_basis, coupling_block
from memcap.params import ModelParams, Resolution, coefficients
from memcap.propagator import kernel_slice, propagator_family, system_matrix


def random_stable(rng, n):
    """Random complex symmetric matrix with decaying spectrum."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = 0.5 * (a + a.T)
    return a - 3.0 * np.eye(n)


def test_system_matrix_single_mode_formula():
    params = ModelParams(depth=16.0, fresnel=0.8, detuning=0.3, drive=1.2)
    res = Resolution(n_radial_max=1, m_max=0)
    basis = build_basis(0, res)
    b = coupling_block(basis)
    c = coefficients(params)
    nu = 0.7
    mat = system_matrix(c, basis, b, params.fresnel, nu)
    want = (
        -1j * basis.wavenumbers[0] ** 2 / (4.0 * np.pi * params.fresnel)
        - c.absorb * b[0, 0] ** 2
        + c.couple_light * c.couple_spin * b[0, 0] ** 2 / (1j * nu + c.spin_decay)
    )
    assert mat.shape == (1, 1)
    assert mat[0, 0] == pytest.approx(want, rel=1e-14)


def test_system_matrix_complex_symmetric(small_block):
    params, _, basis, coupling = small_block
    mat = system_matrix(coefficients(params), basis, coupling, params.fresnel, 1.3)
    assert np.abs(mat - mat.T).max() < 1e-14


def test_infinite_fresnel_drops_diffraction(small_block):
    params, _, basis, coupling = small_block
    c = coefficients(params)
    mat = system_matrix(c, basis, coupling, 1e12, 0.9)
    bsq = coupling @ coupling
    kept = -c.absorb * bsq + c.couple_light * c.couple_spin / (1j * 0.9 + c.spin_decay) * bsq
    assert np.abs(mat - kept).max() < 1e-10


def test_resonant_passivity(small_block):
    """At zero detuning the Hermitian part of A(0) is negative
    semidefinite: the medium only absorbs."""
    params, _, basis, coupling = small_block
    mat = system_matrix(coefficients(params), basis, coupling, params.fresnel, 0.0)
    herm = 0.5 * (mat + mat.conj().T)
    assert np.linalg.eigvalsh(herm).max() < 1e-12


def test_propagator_family_matches_expm(rng):
    mat = random_stable(rng, 6)
    spans = np.array([0.0, 0.13, 0.5, 1.0])
    fam = propagator_family(mat, spans)
    for s, got in zip(spans, fam):
        assert np.abs(got - expm(mat * s)).max() < 1e-9


def test_propagator_family_rhs(rng):
    mat = random_stable(rng, 5)
    rhs = rng.standard_normal((5, 2))
    fam = propagator_family(mat, np.array([0.4]), rhs=rhs)
    assert np.abs(fam[0] - expm(0.4 * mat) @ rhs).max() < 1e-9


def test_semigroup_property(rng):
    mat = random_stable(rng, 6)
    f = propagator_family(mat, np.array([0.3, 0.45, 0.75]))
    assert np.abs(f[2] - f[1] @ f[0]).max() < 1e-9


def test_defective_matrix_falls_back_to_expm():
    """A nilpotent block has no eigenbasis; the family must still be exact."""
    mat = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    fam = propagator_family(mat, np.array([1.0, 2.0]))
    assert np.abs(fam[0] - np.array([[1, 1], [0, 1]])).max() < 1e-12
    assert np.abs(fam[1] - np.array([[1, 2], [0, 1]])).max() < 1e-12


def test_kernel_slice_exit_face(small_block):
    """At z = 1 the propagation span vanishes and K is the bare prefactor
    times the coupling matrix."""
    params, _, basis, coupling = small_block
    c = coefficients(params)
    nu = 0.37
    ks = kernel_slice(c, basis, coupling, params.fresnel, nu, np.array([1.0]))
    direct = -c.couple_light / (1j * nu + c.spin_decay) * coupling
    assert np.abs(ks[0] - direct).max() < 1e-12


def test_kernel_slice_shape(small_block):
    params, _, basis, coupling = small_block
    c = coefficients(params)
    nodes = np.array([0.2, 0.5, 0.8])
    ks = kernel_slice(c, basis, coupling, params.fresnel, -1.1, nodes)
    assert ks.shape == (3, basis.size, basis.size)
