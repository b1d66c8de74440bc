import numpy as np
import pytest

from memcap.basis import build_basis, coupling_block
from memcap.params import ModelParams, Resolution


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


@pytest.fixture(scope="session")
def small_block():
    """One small azimuthal block shared by map-level tests."""
    params = ModelParams(depth=12.0, fresnel=0.6)
    res = Resolution(n_radial_max=5, m_max=1, n_freq=40, n_axial=12, freq_halfwidth=6.0)
    basis = build_basis(1, res)
    coupling = coupling_block(basis)
    return params, res, basis, coupling
