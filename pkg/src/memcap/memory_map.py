"""Discretised storage and retrieval maps of one azimuthal block.

The memory channel is the composition of storage (input light spectrum to
stored spin wave) and retrieval (spin wave to output light spectrum).  Both
integrals are discretised on Gauss-Legendre grids, frequency over
[-nu_max, nu_max] and axial position over [0, 1], and the square roots of
the quadrature weights are folded into the maps so that the composed
operator acts between unit-energy coordinates: its singular values squared
are physical efficiencies.

Conventions.  The inverse-transform prefactor 1/(2 pi) is split evenly, one
1/sqrt(2 pi) into storage and one into retrieval; a weighted input vector of
unit norm then represents a unit-energy input pulse and the weighted output
norm squared is the retrieved energy.  Storage uses the transpose of the
retrieval kernel with the drive conjugated, evaluated at the mirrored depth,
which for the Gaussian-profile model reduces to swapping the roles of the
two coupling coefficients.  Backward retrieval reads the spin wave from the
far face: the kernel's axial argument is mirrored with no conjugation, so
on the symmetric axial grid it reuses the forward propagator family in
reversed order.

For large blocks the composed operator (n_freq*n)^2 is never formed;
block_grams accumulates the two Gram matrices of the weighted retrieval and
storage factors on the much smaller axial-times-mode space, from which the
spectrum module recovers the same singular values (and the backward ones,
via an axial mirror permutation) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BlockBasis
from .errors import NumericalError
from .params import ModelParams, ParameterError, Resolution, coefficients
from .propagator import propagator_family, system_matrix

_ROOT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class QuadratureGrid:
    """Gauss-Legendre nodes and weights for the two integrals.

    freq_nodes/freq_weights cover [-nu_max, nu_max]; axial_nodes/axial_weights
    cover [0, 1].  Both node sets are symmetric about their midpoint.
    """

    freq_nodes: np.ndarray
    freq_weights: np.ndarray
    axial_nodes: np.ndarray
    axial_weights: np.ndarray
    freq_halfwidth: float

    def __post_init__(self):
        nu_max = self.freq_halfwidth
        if abs(self.freq_weights.sum() - 2.0 * nu_max) > 1e-12 * max(2.0 * nu_max, 1.0):
            raise NumericalError("frequency weights do not sum to the window width")
        if abs(self.axial_weights.sum() - 1.0) > 1e-12:
            raise NumericalError("axial weights do not sum to one")
        if np.max(np.abs(self.freq_nodes + self.freq_nodes[::-1])) > 1e-12 * nu_max:
            raise NumericalError("frequency nodes are not symmetric about zero")
        if np.max(np.abs(self.axial_nodes + self.axial_nodes[::-1] - 1.0)) > 1e-12:
            raise NumericalError("axial nodes are not symmetric about 1/2")


def make_grid(res: Resolution, params: ModelParams) -> QuadratureGrid:
    nu_max = res.resolved_halfwidth(params)
    x, w = np.polynomial.legendre.leggauss(res.n_freq)
    xa, wa = np.polynomial.legendre.leggauss(res.n_axial)
    return QuadratureGrid(
        freq_nodes=nu_max * x,
        freq_weights=nu_max * w,
        axial_nodes=0.5 * (xa + 1.0),
        axial_weights=0.5 * wa,
        freq_halfwidth=nu_max,
    )


@dataclass(frozen=True)
class MemoryMap:
    """Weighted end-to-end map of one block and one retrieval direction.

    operator has shape (n_freq*n, n_freq*n); rows and columns are ordered
    frequency-major (index = freq_index * n + radial_index).  Singular
    values squared are efficiencies.
    """

    azimuthal: int
    direction: str
    operator: np.ndarray
    grid: QuadratureGrid
    params: ModelParams


def _kernel_factors(params, basis, coupling, grid):
    """Per-frequency weighted propagator family and kernel prefactors.

    Yields (i, phi, psi, weighted) where weighted[j] = sqrt(w_i v_j)
    e^{A(nu_i) z_j} B, phi is the retrieval prefactor and psi the storage
    one (both already carrying the split 1/sqrt(2 pi)).  By the symmetry of
    the axial grid the forward-retrieval spans 1 - z_j are the reversed
    slice of the same family.
    """
    coeff = coefficients(params)
    root_v = np.sqrt(grid.axial_weights)
    for i, (nu, wi) in enumerate(zip(grid.freq_nodes, grid.freq_weights)):
        mat = system_matrix(coeff, basis, coupling, params.fresnel, nu)
        ebz = propagator_family(mat, grid.axial_nodes, rhs=coupling)
        denom = 1j * nu + coeff.spin_decay
        phi = -coeff.couple_light / denom / _ROOT2PI
        psi = -coeff.couple_spin / denom / _ROOT2PI
        weighted = ebz * (np.sqrt(wi) * root_v)[:, None, None]
        yield i, phi, psi, weighted


def _retrieval_factor(phi, weighted, direction):
    """(n, n_ax*n) retrieval rows of one frequency node."""
    nax, n, _ = weighted.shape
    fam = weighted[::-1] if direction == "forward" else weighted
    return phi * fam.transpose(1, 0, 2).reshape(n, nax * n)


def _storage_factor(psi, weighted):
    """(n_ax*n, n) storage columns of one frequency node.  The storage
    kernel is the transpose of the drive-conjugated retrieval kernel at the
    mirrored depth; A and B being complex symmetric, that is psi (B e^{A z})
    = psi (e^{A z} B)^T."""
    nax, n, _ = weighted.shape
    return psi * weighted.transpose(0, 2, 1).reshape(nax * n, n)


def storage_map(
    params: ModelParams,
    basis: BlockBasis,
    coupling: np.ndarray,
    grid: QuadratureGrid,
) -> np.ndarray:
    """Weighted storage matrix, shape (n_axial*n, n_freq*n).

    Acting on a weighted input spectrum (unit norm = unit energy) it returns
    the weighted stored spin wave; the squared norm of the result is the
    storage efficiency.
    """
    n = basis.size
    nf = grid.freq_nodes.size
    nax = grid.axial_nodes.size
    out = np.empty((nax * n, nf * n), dtype=complex)
    for i, _, psi, weighted in _kernel_factors(params, basis, coupling, grid):
        out[:, i * n : (i + 1) * n] = _storage_factor(psi, weighted)
    return out


def _retrieval_map(params, basis, coupling, grid, direction):
    n = basis.size
    nf = grid.freq_nodes.size
    nax = grid.axial_nodes.size
    out = np.empty((nf * n, nax * n), dtype=complex)
    for i, phi, _, weighted in _kernel_factors(params, basis, coupling, grid):
        out[i * n : (i + 1) * n, :] = _retrieval_factor(phi, weighted, direction)
    return out


def _check_direction(direction: str):
    if direction not in ("forward", "backward"):
        raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")


def end_to_end_map(
    params: ModelParams,
    basis: BlockBasis,
    coupling: np.ndarray,
    grid: QuadratureGrid,
    direction: str = "forward",
) -> MemoryMap:
    """Dense composed map for one block.  Quadratic in n_freq*n: intended
    for small and moderate blocks; sweeps use block_grams instead."""
    _check_direction(direction)
    sto = storage_map(params, basis, coupling, grid)
    ret = _retrieval_map(params, basis, coupling, grid, direction)
    op = ret @ sto
    spectral = np.linalg.norm(op, 2)
    if spectral**2 > 1.0 + 1e-6:
        raise NumericalError(
            f"leading efficiency {spectral**2:.6g} exceeds 1: quadrature grids "
            "are inconsistent with the kernel bandwidth"
        )
    return MemoryMap(
        azimuthal=basis.azimuthal,
        direction=direction,
        operator=op,
        grid=grid,
        params=params,
    )


def forward_map(params, basis, coupling, grid) -> MemoryMap:
    return end_to_end_map(params, basis, coupling, grid, "forward")


def backward_map(params, basis, coupling, grid) -> MemoryMap:
    return end_to_end_map(params, basis, coupling, grid, "backward")


@dataclass(frozen=True)
class BlockGrams:
    """Factored representation of the composed maps of one block.

    With R_w and S_w the weighted retrieval/storage factors (forward), the
    composed map is T = R_w S_w and

        ret_gram = R_w^dagger R_w        (axial*mode space)
        sto_gram = S_w S_w^dagger        (axial*mode space)

    The nonzero efficiency spectrum of T^dagger T equals that of
    sto_gram^{1/2} ret_gram sto_gram^{1/2}.  The backward map differs only
    by the axial mirror permutation applied to ret_gram.
    """

    azimuthal: int
    ret_gram: np.ndarray
    sto_gram: np.ndarray
    n_radial: int
    n_axial: int
    params: ModelParams


def block_grams(
    params: ModelParams,
    basis: BlockBasis,
    coupling: np.ndarray,
    grid: QuadratureGrid,
) -> BlockGrams:
    n = basis.size
    nax = grid.axial_nodes.size
    dim = nax * n
    g = np.zeros((dim, dim), dtype=complex)
    h = np.zeros((dim, dim), dtype=complex)
    for _, phi, psi, weighted in _kernel_factors(params, basis, coupling, grid):
        ret = _retrieval_factor(phi, weighted, "forward")
        sto = _storage_factor(psi, weighted)
        g += ret.conj().T @ ret
        h += sto @ sto.conj().T
    g = 0.5 * (g + g.conj().T)
    h = 0.5 * (h + h.conj().T)
    return BlockGrams(
        azimuthal=basis.azimuthal,
        ret_gram=g,
        sto_gram=h,
        n_radial=n,
        n_axial=nax,
        params=params,
    )


def mirror_permutation(n_radial: int, n_axial: int) -> np.ndarray:
    """Index permutation that reverses the axial order of a stacked
    (axial x mode) vector; conjugating ret_gram by it yields the backward
    retrieval Gram matrix."""
    idx = np.arange(n_axial * n_radial).reshape(n_axial, n_radial)
    return idx[::-1].reshape(-1)
