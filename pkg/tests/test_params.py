import math

import pytest

from memcap.params import (GeometryWarning, ModelParams, ParameterError,
                           PhysicalEnsemble, Resolution, coefficients,
                           default_freq_halfwidth, to_dimensionless)

TAU = 2.0 * math.pi


def test_coefficients_resonant_reference():
    """d0=100, resonant, unit drive: the standard worked numbers."""
    c = coefficients(ModelParams(depth=100.0, fresnel=1.0))
    assert c.denom == 0.5
    assert c.absorb == pytest.approx(50.0)
    assert c.couple_light == pytest.approx(5.0)
    assert c.couple_spin == pytest.approx(5.0)
    assert c.spin_decay == pytest.approx(0.5)


def test_coefficients_detuned():
    c = coefficients(ModelParams(depth=4.0, fresnel=1.0, detuning=10.0, drive=2.0))
    denom = 0.5 + 10.0j
    assert c.denom == denom
    assert c.absorb == pytest.approx(1.0 / denom)
    assert c.couple_light == pytest.approx(1.0 / denom)
    assert c.couple_spin == pytest.approx(1.0 / denom)
    assert c.spin_decay == pytest.approx(1.0 / denom)


def test_complex_drive_conjugation():
    c = coefficients(ModelParams(depth=9.0, fresnel=1.0, drive=1.5j))
    assert c.couple_light == pytest.approx(3.0 * 1.5j / 4.0 / 0.5)
    assert c.couple_spin == pytest.approx(-3.0 * 1.5j / 4.0 / 0.5)
    assert c.spin_decay == pytest.approx(1.5**2 / 4.0 / 0.5)


def test_zero_drive_rejected():
    with pytest.raises(ParameterError, match="drive"):
        ModelParams(depth=10.0, fresnel=1.0, drive=0.0)
    with pytest.raises(ParameterError, match="drive"):
        PhysicalEnsemble(
            atom_count=1e8, length=1.0, width=0.05, wavelength=1e-6,
            coupling_sq=1e-12, linewidth=1.0, drive=0.0,
        )


@pytest.mark.parametrize("field", ["depth", "fresnel"])
def test_nonpositive_model_params_named(field):
    kwargs = {"depth": 10.0, "fresnel": 1.0}
    kwargs[field] = -1.0
    with pytest.raises(ParameterError, match=field):
        ModelParams(**kwargs)


def test_to_dimensionless_hand_computed():
    # n0 = N/(2 pi L w^2) = 1e12, d0 = 4 L n0 |g|^2/gamma = 1,
    # F = w^2/(lambda L) = 1
    ens = PhysicalEnsemble(
        atom_count=TAU * 1e10,
        length=1.0,
        width=0.1,
        wavelength=1e-2,
        coupling_sq=1e-12,
        linewidth=4.0,
        detuning=8.0,
        drive=2.0,
    )
    p = to_dimensionless(ens)
    assert p.depth == pytest.approx(1.0)
    assert p.fresnel == pytest.approx(1.0)
    assert p.detuning == pytest.approx(2.0)
    assert p.drive == pytest.approx(0.5)


def test_atom_number_coupling_gauge():
    """Only N_A |g|^2 enters: rescaling one against the other is a no-op."""
    base = dict(atom_count=1e9, length=0.5, width=0.02, wavelength=8e-7,
                coupling_sq=3e-13, linewidth=2.0)
    p1 = to_dimensionless(PhysicalEnsemble(**base))
    scaled = dict(base, atom_count=base["atom_count"] * 7.3,
                  coupling_sq=base["coupling_sq"] / 7.3)
    p2 = to_dimensionless(PhysicalEnsemble(**scaled))
    assert p1.depth == pytest.approx(p2.depth, rel=1e-12)
    assert p1.fresnel == p2.fresnel


def test_width_doubling_scales_fresnel_and_depth():
    base = dict(atom_count=1e9, length=0.5, width=0.02, wavelength=8e-7,
                coupling_sq=3e-13, linewidth=2.0)
    p1 = to_dimensionless(PhysicalEnsemble(**base))
    p2 = to_dimensionless(PhysicalEnsemble(**dict(base, width=0.04)))
    assert p2.fresnel == pytest.approx(4.0 * p1.fresnel, rel=1e-12)
    assert p2.depth == pytest.approx(0.25 * p1.depth, rel=1e-12)


def test_fat_ensemble_warns():
    with pytest.warns(GeometryWarning):
        PhysicalEnsemble(atom_count=1e8, length=0.1, width=0.05,
                         wavelength=1e-6, coupling_sq=1e-12, linewidth=1.0)


def test_default_freq_halfwidth():
    # gamma_S = 0.5 at unit drive -> floor of 1 linewidth applies
    assert default_freq_halfwidth(ModelParams(depth=10.0, fresnel=1.0)) == pytest.approx(12.0)
    assert default_freq_halfwidth(ModelParams(depth=30.0, fresnel=1.0)) == pytest.approx(20.0)
    # strong drive: gamma_S = 2 clears the floor
    wide = default_freq_halfwidth(ModelParams(depth=10.0, fresnel=1.0, drive=2.0))
    assert wide == pytest.approx(8.0 * 2.0 * 1.5)


def test_resolution_validation():
    with pytest.raises(ParameterError, match="n_freq"):
        Resolution(n_freq=0)
    with pytest.raises(ParameterError, match="m_max"):
        Resolution(m_max=-1)
    with pytest.raises(ParameterError, match="disc_radius"):
        Resolution(disc_radius=2.0)
    with pytest.raises(ParameterError, match="freq_halfwidth"):
        Resolution(freq_halfwidth=-3.0)


def test_resolved_halfwidth_prefers_explicit():
    p = ModelParams(depth=10.0, fresnel=1.0)
    assert Resolution(freq_halfwidth=5.5).resolved_halfwidth(p) == 5.5
    assert Resolution().resolved_halfwidth(p) == default_freq_halfwidth(p)
