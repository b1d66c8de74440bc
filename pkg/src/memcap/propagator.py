"""Frequency-domain propagation and retrieval kernel of one azimuthal block.

Adiabatic elimination of the optical coherence turns the light equation into
a linear ODE along the ensemble axis, da/dz = A(nu) a + source, with

    A(nu) = -i diag(kappa^2)/(4 pi F) - c_abs B^2 + c_L c_S B^2 / (i nu + Gamma_S)

acting on the radial-mode vector at sideband frequency nu.  Retrieval of a
stored spin wave S(z) radiates

    K(nu, z) = -c_L / (i nu + Gamma_S) * expm(A(nu) (1 - z)) B

per unit spin amplitude at depth z.  The same exponential family evaluated
on the axial grid feeds storage (via its transpose with the drive
conjugated) and retrieval, so the eigendecomposition of A is computed once
per frequency and reused for every axial node; non-normal blocks with an
ill-conditioned eigenbasis fall back to scaling-and-squaring per node.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .basis import BlockBasis
from .params import ModelCoefficients

# Eigenbasis condition number beyond which expm is used node by node.
_COND_LIMIT = 1e8


def system_matrix(
    coeff: ModelCoefficients,
    basis: BlockBasis,
    coupling: np.ndarray,
    fresnel: float,
    freq: float,
) -> np.ndarray:
    """A(nu) for one block; complex symmetric, shape (n, n)."""
    bsq = coupling @ coupling
    diff = np.diag(-1j * basis.wavenumbers**2 / (4.0 * np.pi * fresnel))
    resonant = coeff.couple_light * coeff.couple_spin / (1j * freq + coeff.spin_decay)
    return diff - coeff.absorb * bsq + resonant * bsq


def propagator_family(mat: np.ndarray, spans: np.ndarray, rhs: np.ndarray | None = None):
    """expm(mat * s) @ rhs for every span s, via one eigendecomposition.

    Returns an array of shape (len(spans), n, k).  When the eigenvector
    matrix is ill-conditioned (non-normal mat), each exponential is computed
    by scaling and squaring instead, which is slower but unconditionally
    stable.
    """
    spans = np.asarray(spans, dtype=float)
    n = mat.shape[0]
    if rhs is None:
        rhs = np.eye(n, dtype=complex)
    lam, vec = np.linalg.eig(mat)
    cond = np.linalg.cond(vec)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        return np.stack([expm(mat * s) @ rhs for s in spans])
    back = np.linalg.solve(vec, rhs)
    # (s, n, k): scale the eigencolumns by e^{lam s} then map back
    phases = np.exp(np.multiply.outer(spans, lam))
    return (vec[None, :, :] * phases[:, None, :]) @ back


def kernel_slice(
    coeff: ModelCoefficients,
    basis: BlockBasis,
    coupling: np.ndarray,
    fresnel: float,
    freq: float,
    axial_nodes: np.ndarray,
) -> np.ndarray:
    """Retrieval kernel K(nu, z_j) stacked over axial nodes, (n_ax, n, n).

    K[j] maps a spin-wave mode vector at depth z_j to the output light mode
    vector at the exit face, for forward retrieval read at frequency nu.
    """
    mat = system_matrix(coeff, basis, coupling, fresnel, freq)
    pref = -coeff.couple_light / (1j * freq + coeff.spin_decay)
    spans = 1.0 - np.asarray(axial_nodes, dtype=float)
    return pref * propagator_family(mat, spans, rhs=coupling)
