"""Efficiency spectra, mode counts, and channel capacity.

The efficiencies of one azimuthal block are the squared singular values of
its weighted end-to-end map.  Each mode with efficiency above 1/2 acts as a
one-sided lossy bosonic channel with quantum capacity
Q(eta) = log2(eta) - log2(1 - eta); summing over contributing modes and
azimuthal blocks (with the +-m degeneracy) gives the total capacity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .memory_map import BlockGrams, MemoryMap, mirror_permutation
from .params import ParameterError

_EFF_BOUND = 1.0 + 1e-6
# Efficiencies are clamped here before taking Q; Q at the clamp is ~39.86
# bits and the caller is warned that the true value is resolution-limited.
SATURATION_EFF = 1.0 - 1e-12


class SaturationWarning(UserWarning):
    """An efficiency reached the clamp used to keep Q finite."""


@dataclass(frozen=True)
class BlockSpectrum:
    """Descending efficiencies of one block and retrieval direction.

    input_modes, when present, holds the matched input spectra as rows
    (orthonormal, frequency-major weighted coordinates); the Gram-factored
    path reports eigenvalues only and leaves it None.
    """

    azimuthal: int
    direction: str
    efficiencies: np.ndarray
    input_modes: np.ndarray | None = None

    @property
    def leading(self) -> float:
        return float(self.efficiencies[0]) if self.efficiencies.size else 0.0


def _checked_efficiencies(raw: np.ndarray, context: str) -> np.ndarray:
    if raw.size and raw.max() > _EFF_BOUND:
        raise NumericalError(
            f"{context}: leading efficiency {raw.max():.8g} exceeds 1 beyond "
            "tolerance; quadrature grids are inconsistent"
        )
    return np.clip(raw, 0.0, 1.0)


def block_spectrum(mmap: MemoryMap) -> BlockSpectrum:
    """Spectrum of a dense memory map via SVD."""
    u, sing, vh = np.linalg.svd(mmap.operator)
    del u
    eff = _checked_efficiencies(sing**2, f"block m={mmap.azimuthal} ({mmap.direction})")
    return BlockSpectrum(
        azimuthal=mmap.azimuthal,
        direction=mmap.direction,
        efficiencies=eff,
        input_modes=vh,
    )


def gram_spectrum(grams: BlockGrams, direction: str) -> BlockSpectrum:
    """Spectrum from the factored Gram representation.

    Eigenvalues of sto^{1/2} ret sto^{1/2} equal the nonzero squared
    singular values of the composed map; the backward map is obtained by
    conjugating the retrieval Gram with the axial mirror permutation.
    """
    if direction not in ("forward", "backward"):
        raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")
    ret = grams.ret_gram
    if direction == "backward":
        perm = mirror_permutation(grams.n_radial, grams.n_axial)
        ret = ret[np.ix_(perm, perm)]
    sval, svec = np.linalg.eigh(grams.sto_gram)
    root = svec * np.sqrt(np.clip(sval, 0.0, None))[None, :]
    mid = root.conj().T @ ret @ root
    eff = np.linalg.eigvalsh(0.5 * (mid + mid.conj().T))[::-1]
    eff = _checked_efficiencies(eff, f"block m={grams.azimuthal} ({direction})")
    return BlockSpectrum(azimuthal=grams.azimuthal, direction=direction, efficiencies=eff)


def quantum_capacity(eff: float) -> float:
    """Q(eta) in qubits per mode; zero at or below the 1/2 threshold."""
    if not (0.0 <= eff <= _EFF_BOUND):
        raise ParameterError(f"efficiency must lie in [0, 1], got {eff!r}")
    eff = min(eff, 1.0)
    if eff >= SATURATION_EFF:
        warnings.warn(
            f"efficiency {eff} at the saturation clamp {SATURATION_EFF}; "
            "capacity is resolution-limited",
            SaturationWarning,
            stacklevel=2,
        )
        eff = SATURATION_EFF
    if eff <= 0.5:
        return 0.0
    return math.log2(eff) - math.log2(1.0 - eff)


def _block_q(eff: np.ndarray) -> float:
    """Sum of Q over the strictly contributing modes of one block."""
    return float(sum(quantum_capacity(e) for e in eff[eff > 0.5]))


def degeneracy(m: int) -> int:
    return 1 if m == 0 else 2


@dataclass(frozen=True)
class CapacityReport:
    """Capacity and mode-count totals over azimuthal blocks.

    per_block rows are (m, modes at or above the count threshold, block
    capacity), all before degeneracy; totals include the factor 2 for each
    m > 0 block.  The capacity sum uses the strict eta > 1/2 rule; the mode
    count uses eta >= threshold.
    """

    direction: str
    threshold: float
    per_block: list
    total_modes: int
    total_capacity: float
    leading: float
    drive: complex


def capacity_report(spectra: list, threshold: float, drive: complex = 1.0) -> CapacityReport:
    if not spectra:
        raise ParameterError("capacity_report needs at least one block spectrum")
    if not (0.0 < threshold < 1.0):
        raise ParameterError(f"threshold must lie in (0, 1), got {threshold!r}")
    directions = {s.direction for s in spectra}
    if len(directions) != 1:
        raise ParameterError(f"mixed retrieval directions in one report: {directions}")
    ms = [s.azimuthal for s in spectra]
    if len(set(ms)) != len(ms):
        raise ParameterError("duplicate azimuthal blocks in capacity report")

    ordered = sorted(spectra, key=lambda s: s.azimuthal)
    per_block = []
    total_modes = 0
    total_capacity = 0.0
    leading = 0.0
    for spec in ordered:
        count = int((spec.efficiencies >= threshold).sum())
        cap = _block_q(spec.efficiencies)
        per_block.append((spec.azimuthal, count, cap))
        total_modes += degeneracy(spec.azimuthal) * count
        total_capacity += degeneracy(spec.azimuthal) * cap
        leading = max(leading, spec.leading)
    top_m, top_count, top_cap = per_block[-1]
    if top_count > 0 or top_cap > 0.0:
        raise NumericalError(
            f"azimuthal truncation too low: block m={top_m} still contributes "
            f"({top_count} modes, capacity {top_cap:.3g}); raise m_max"
        )
    return CapacityReport(
        direction=ordered[0].direction,
        threshold=threshold,
        per_block=per_block,
        total_modes=total_modes,
        total_capacity=total_capacity,
        leading=leading,
        drive=drive,
    )
