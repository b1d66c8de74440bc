"""Transverse mode basis on a finite disc.

Azimuthal symmetry splits the transverse problem into independent blocks of
fixed angular index m.  Within a block the radial basis is the set of Bessel
modes J_m(kappa_n rho) vanishing on a hard wall at rho = R (R in units of
the ensemble's transverse width), normalised to unit L2 norm on the disc.
The only nontrivial object is the coupling matrix B: the Gaussian atomic
density profile exp(-rho^2/2) projected onto the basis, which controls both
absorption and the light-spin conversion of every mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import NumericalError
from .params import ParameterError, Resolution

_MAX_QUAD_ORDER = 1 << 16


def bessel_zeros(m: int, count: int, tol: float = 1e-12) -> np.ndarray:
    """First `count` positive zeros of J_m, ascending.

    Zeros are located by the standard asymptotic-seeded solver and then
    polished with Newton steps until the update falls below `tol`, so the
    result does not depend on the seeding library's internal tolerance.
    """
    if not isinstance(m, int) or m < 0:
        raise ParameterError(f"azimuthal index must be a nonnegative integer, got {m!r}")
    if not isinstance(count, int) or count < 1:
        raise ParameterError(f"count must be a positive integer, got {count!r}")
    if not (0.0 < tol <= 1e-6):
        raise ParameterError(f"tol must lie in (0, 1e-6], got {tol!r}")

    zeros = special.jn_zeros(m, count)
    # Newton polish.  J_m'(x) is bounded away from zero at simple roots, so
    # a couple of iterations reach machine precision from the seeds.
    for _ in range(4):
        step = special.jv(m, zeros) / special.jvp(m, zeros)
        zeros = zeros - step
        if np.max(np.abs(step)) < tol:
            break
    else:
        raise NumericalError(
            f"Bessel zero polish did not converge for m={m}, count={count}; "
            "this indicates a broken seed bracket and should be unreachable"
        )
    if np.any(np.diff(zeros) <= 0) or zeros[0] <= 0:
        raise NumericalError(f"Bessel zeros for m={m} are not positive increasing")
    return zeros


@dataclass(frozen=True)
class BlockBasis:
    """Radial Bessel basis of one azimuthal block.

    wavenumbers  kappa_n = x_mn / R
    norms        1 / (sqrt(pi) R |J_{m+1}(x_mn)|), making each mode unit-norm
                 under the measure 2 pi rho d rho on the disc
    """

    azimuthal: int
    zeros: np.ndarray
    wavenumbers: np.ndarray
    norms: np.ndarray
    disc_radius: float

    @property
    def size(self) -> int:
        return self.wavenumbers.size

    def radial(self, n: int, rho: np.ndarray) -> np.ndarray:
        """Normalised radial profile of mode n on rho (same units as R)."""
        rho = np.asarray(rho, dtype=float)
        out = self.norms[n] * special.jv(self.azimuthal, self.wavenumbers[n] * rho)
        return np.where(rho <= self.disc_radius, out, 0.0)


def build_basis(m: int, res: Resolution) -> BlockBasis:
    radius = float(res.disc_radius)
    zeros = bessel_zeros(m, res.n_radial_max)
    kappa = zeros / radius
    norms = 1.0 / (np.sqrt(np.pi) * radius * np.abs(special.jv(m + 1, zeros)))
    return BlockBasis(
        azimuthal=m,
        zeros=zeros,
        wavenumbers=kappa,
        norms=norms,
        disc_radius=radius,
    )


def _gauss_weight(rho: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * rho**2)


def coupling_block(
    basis: BlockBasis,
    weight=None,
    tol: float = 1e-10,
    start_order: int | None = None,
) -> np.ndarray:
    """Density-profile coupling matrix B of one azimuthal block.

    B[n, n'] = 2 pi N_n N_n' \\int_0^R J_m(k_n rho) J_m(k_n' rho) w(rho) rho d rho

    with w the transverse density profile (Gaussian by default; `weight` is a
    test hook).  Gauss-Legendre order is doubled until the matrix moves by
    less than `tol` in max norm.  The integrand oscillates on the scale of
    the largest Bessel zero, so the starting order tracks that.
    """
    if weight is None:
        weight = _gauss_weight
    radius = basis.disc_radius
    m = basis.azimuthal
    if start_order is None:
        start_order = max(64, int(1.5 * basis.zeros[-1]))

    previous = None
    order = start_order
    while order <= _MAX_QUAD_ORDER:
        x, w = np.polynomial.legendre.leggauss(order)
        rho = 0.5 * radius * (x + 1.0)
        wq = 0.5 * radius * w
        # rows: quadrature nodes, cols: modes
        modes = basis.norms[None, :] * special.jv(m, rho[:, None] * basis.wavenumbers[None, :])
        weighted = modes * (weight(rho) * rho * wq)[:, None]
        block = 2.0 * np.pi * (modes.T @ weighted)
        block = 0.5 * (block + block.T)
        if previous is not None and np.max(np.abs(block - previous)) < tol:
            return block
        previous = block
        order *= 2
    raise NumericalError(
        f"coupling_block quadrature did not stabilise below {tol:g} "
        f"by order {_MAX_QUAD_ORDER} (m={m}, n={basis.size}, R={radius})"
    )
