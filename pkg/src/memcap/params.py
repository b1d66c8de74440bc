"""Physical ensemble parameters and their dimensionless reduction.

All memory calculations downstream run on two dimensionless numbers, the
resonant optical depth d0 and the Fresnel number F of the ensemble, plus a
detuning and a drive amplitude measured in units of the optical linewidth.
This module owns the conversion from lab quantities and the handful of
derived coefficients (absorption, light-spin couplings, spin decay) that the
propagator is built from.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace


class ParameterError(ValueError):
    """Raised when a physical or numerical parameter fails validation."""


class GeometryWarning(UserWarning):
    """Ensemble geometry outside the regime the model is trusted in."""


@dataclass(frozen=True)
class PhysicalEnsemble:
    """Lab-frame description of a cigar-shaped atomic ensemble.

    atom_count     total number of atoms N_A
    length         ensemble length L along the optical axis [m]
    width          transverse Gaussian 1/e^2 intensity radius sigma_perp [m]
    wavelength     optical wavelength lambda_0 [m]
    coupling_sq    single-atom coupling |g|^2 [s^-2 m^3] (density-normalised)
    linewidth      optical coherence decay gamma (HWHM) [s^-1]
    detuning       one-photon detuning Delta [s^-1]
    drive          classical drive Rabi amplitude Omega [s^-1], may be complex
    """

    atom_count: float
    length: float
    width: float
    wavelength: float
    coupling_sq: float
    linewidth: float
    detuning: float = 0.0
    drive: complex = 1.0

    def __post_init__(self):
        positive = [
            ("atom_count", self.atom_count),
            ("length", self.length),
            ("width", self.width),
            ("wavelength", self.wavelength),
            ("coupling_sq", self.coupling_sq),
            ("linewidth", self.linewidth),
        ]
        for name, value in positive:
            if not (value > 0) or not math.isfinite(value):
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")
        if self.drive == 0:
            raise ParameterError("drive must be nonzero: retrieval is impossible without it")
        if self.width / self.length > 0.2:
            warnings.warn(
                f"width/length = {self.width / self.length:.3g} > 0.2: paraxial "
                "one-dimensional-per-mode treatment becomes unreliable",
                GeometryWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless memory parameters.

    depth     resonant optical depth d0
    fresnel   Fresnel number F = sigma_perp^2 / (lambda_0 L)
    detuning  one-photon detuning in units of gamma
    drive     drive Rabi amplitude in units of gamma (complex allowed)
    """

    depth: float
    fresnel: float
    detuning: float = 0.0
    drive: complex = 1.0

    def __post_init__(self):
        if not (self.depth > 0) or not math.isfinite(self.depth):
            raise ParameterError(f"depth must be positive and finite, got {self.depth!r}")
        if not (self.fresnel > 0):
            raise ParameterError(f"fresnel must be positive, got {self.fresnel!r}")
        if self.drive == 0:
            raise ParameterError("drive must be nonzero: retrieval is impossible without it")

    def with_drive(self, drive: complex) -> "ModelParams":
        return replace(self, drive=drive)


def to_dimensionless(ens: PhysicalEnsemble) -> ModelParams:
    """Reduce a lab-frame ensemble to (d0, F, detuning, drive).

    The peak number density of the Gaussian transverse profile is
    n0 = N_A / (2 pi L sigma_perp^2); the resonant depth follows as
    d0 = 4 L n0 |g|^2 / gamma.  Only the combination N_A |g|^2 enters,
    so rescaling atom number against coupling strength is a gauge choice.
    """
    n0 = ens.atom_count / (2.0 * math.pi * ens.length * ens.width**2)
    depth = 4.0 * ens.length * n0 * ens.coupling_sq / ens.linewidth
    fresnel = ens.width**2 / (ens.wavelength * ens.length)
    return ModelParams(
        depth=depth,
        fresnel=fresnel,
        detuning=ens.detuning / ens.linewidth,
        drive=ens.drive / ens.linewidth,
    )


@dataclass(frozen=True)
class ModelCoefficients:
    """Coefficients of the paraxial memory equations for one parameter set.

    denom         1/2 + i*detuning, the common adiabatic denominator
    absorb        (d0/4) / denom, transverse absorption/dispersion scale
    couple_light  (sqrt(d0) * drive / 4) / denom, spin -> light source
    couple_spin   (sqrt(d0) * conj(drive) / 4) / denom, light -> spin source
    spin_decay    (|drive|^2 / 4) / denom, drive-induced spin linewidth
    """

    denom: complex
    absorb: complex
    couple_light: complex
    couple_spin: complex
    spin_decay: complex


def coefficients(params: ModelParams) -> ModelCoefficients:
    denom = 0.5 + 1j * params.detuning
    root = math.sqrt(params.depth)
    return ModelCoefficients(
        denom=denom,
        absorb=(params.depth / 4.0) / denom,
        couple_light=(root * params.drive / 4.0) / denom,
        couple_spin=(root * complex(params.drive).conjugate() / 4.0) / denom,
        spin_decay=(abs(params.drive) ** 2 / 4.0) / denom,
    )


def default_freq_halfwidth(params: ModelParams) -> float:
    """Half-width of the retrieval frequency window, in linewidth units.

    Scales with the drive-induced spin linewidth so that the window tracks
    the memory bandwidth, with a floor of one linewidth, and widens slowly
    with depth to keep the far tails of deep memories inside the window.
    """
    gs = abs(coefficients(params).spin_decay)
    return 8.0 * max(gs, 1.0) * (1.0 + params.depth / 20.0)


@dataclass(frozen=True)
class Resolution:
    """Discretisation controls shared by the kernel and map builders.

    n_radial_max    radial modes kept per azimuthal block
    m_max           largest azimuthal index scanned (inclusive)
    n_freq          Gauss-Legendre nodes across the frequency window
    n_axial         Gauss-Legendre nodes along the ensemble axis
    disc_radius     radius of the hard-wall disc the Bessel basis lives on,
                    in units of the transverse beam width
    freq_halfwidth  half-width of the frequency window; None defers to
                    default_freq_halfwidth at build time
    """

    n_radial_max: int = 24
    m_max: int = 12
    n_freq: int = 160
    n_axial: int = 24
    disc_radius: float = 6.0
    freq_halfwidth: float | None = None

    def __post_init__(self):
        for name in ("n_radial_max", "n_freq", "n_axial"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ParameterError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.m_max, int) or self.m_max < 0:
            raise ParameterError(f"m_max must be a nonnegative integer, got {self.m_max!r}")
        if not (self.disc_radius >= 3.0):
            raise ParameterError(
                f"disc_radius must be at least 3 beam widths, got {self.disc_radius!r}"
            )
        if self.freq_halfwidth is not None and not (self.freq_halfwidth > 0):
            raise ParameterError(
                f"freq_halfwidth must be positive when given, got {self.freq_halfwidth!r}"
            )

    def resolved_halfwidth(self, params: ModelParams) -> float:
        if self.freq_halfwidth is not None:
            return self.freq_halfwidth
        return default_freq_halfwidth(params)
