"""Brute-force time-domain integrator for small transverse truncations.

Everything else in this package goes through the frequency-domain kernel;
this module solves the same adiabatic light/spin pair directly as an
initial-value problem,

    da/dz = -(i diag(kappa^2)/(4 pi F) + c_abs B^2) a - c_L B S
    dS/dt = -Gamma_S S - c_S B a

so that storage and retrieval efficiencies can be checked against the maps
without any shared machinery.  In the co-moving frame the light equation
has no time derivative: at each instant the field is obtained by
integrating the z-ODE given the current spin wave (a structural fact of
the equations, not an approximation).  The z integration uses the exact
exponential-trapezoid rule for the constant system matrix (second order in
the source, unconditionally stable); the spin field is advanced by RK4.

Transform conventions (shared with the kernel pipeline, fixed by
cross-validation): input spectra synthesize as
a(t) = (1/2pi) Int A(nu) e^{-i nu t} d nu, and output spectra analyse as
A(nu) = Int a(t) e^{-i nu t} dt.

Intended for n_radial_max <= 4; larger blocks are refused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from . import _accel
from .basis import BlockBasis
from .errors import ConvergenceError, NumericalError, StabilityError
from .memory_map import MemoryMap
from .params import ModelParams, ParameterError, coefficients
from .propagator import propagator_family, system_matrix

_ROOT2PI = np.sqrt(2.0 * np.pi)

_MAX_ORACLE_MODES = 4
_MIN_STEPS_PER_UNIT = 20.0


@dataclass
class TimeDomainRun:
    """One storage (and optionally retrieval) experiment.

    input_pulse holds complex mode envelopes sampled on the uniform
    half-step time grid (2 n_t + 1 samples for n_t RK4 steps of time_step);
    storage and retrieval results are filled in by the integrators.
    """

    params: ModelParams
    basis: BlockBasis
    coupling: np.ndarray
    input_pulse: np.ndarray
    time_step: float
    n_axial: int = 200
    energy_in: float | None = None
    spin_wave: np.ndarray | None = None
    eta_storage: float | None = None
    output_field: np.ndarray | None = None
    output_times: np.ndarray | None = None
    eta_total: float | None = None

    def __post_init__(self):
        if self.basis.size > _MAX_ORACLE_MODES:
            raise ParameterError(
                f"time-domain runs support at most {_MAX_ORACLE_MODES} radial "
                f"modes, got {self.basis.size}"
            )
        pulse = np.asarray(self.input_pulse, dtype=complex)
        if pulse.ndim != 2 or pulse.shape[1] != self.basis.size:
            raise ParameterError(
                f"input_pulse must have shape (2*n_t+1, {self.basis.size})"
            )
        if pulse.shape[0] % 2 == 0 or pulse.shape[0] < 3:
            raise ParameterError(
                "input_pulse needs an odd number of half-step samples (>= 3)"
            )
        self.input_pulse = pulse
        rate = fastest_rate(self.params, self.coupling)
        if self.time_step > 1.0 / (_MIN_STEPS_PER_UNIT * rate):
            raise StabilityError(
                f"time step {self.time_step:.3g} too coarse for rate "
                f"{rate:.3g}: need >= {_MIN_STEPS_PER_UNIT} steps per unit"
            )

    @property
    def times(self) -> np.ndarray:
        """Full-step time grid of the storage stage."""
        n_t = (self.input_pulse.shape[0] - 1) // 2
        return self.time_step * np.arange(n_t + 1)


def fastest_rate(params: ModelParams, coupling: np.ndarray) -> float:
    """Stiffest rate in the spin/light pair, for step-size control."""
    coeff = coefficients(params)
    bsq = np.linalg.norm(coupling @ coupling, 2)
    return max(abs(coeff.spin_decay), abs(coeff.absorb) * bsq)


def default_time_step(params: ModelParams, coupling: np.ndarray, refine: float = 1.2) -> float:
    return 1.0 / (_MIN_STEPS_PER_UNIT * refine * fastest_rate(params, coupling))


def sample_pulse(pulse_fn, t_end: float, dt: float, n_modes: int):
    """Sample a callable pulse on the half-step grid; returns (pulse, dt).

    The step is shrunk so that an integer number of steps lands exactly on
    t_end.  The endpoint matters: storage efficiency is read off at the end
    of the window, and the drive keeps reshaping the spin wave after the
    pulse has passed, so overshooting t_end by a fraction of a step is a
    first-order error in eta_s.
    """
    n_t = max(1, int(np.ceil(t_end / dt)))
    dt = t_end / n_t
    grid = 0.5 * dt * np.arange(2 * n_t + 1)
    out = np.empty((grid.size, n_modes), dtype=complex)
    for i, t in enumerate(grid):
        out[i] = pulse_fn(t)
    return out, dt


def _stepping_operators(params, basis, coupling, n_axial):
    """E, W0, W1 for the light sweep plus the spin-equation constants.

    The inhomogeneous z-step is a(k+1) = E a(k) + W0 S(k) + W1 S(k+1) with
    E = e^{M dz}, W0 = dz (phi1 - phi2)(M dz) (-c_L B), W1 = dz phi2(M dz)
    (-c_L B), the phi's evaluated by one augmented block exponential.
    """
    coeff = coefficients(params)
    n = basis.size
    dz = 1.0 / n_axial
    bsq = coupling @ coupling
    mat = -(
        1j * np.diag(basis.wavenumbers**2) / (4.0 * np.pi * params.fresnel)
        + coeff.absorb * bsq
    )
    eye = np.eye(n)
    zero = np.zeros((n, n))
    aug = np.block([
        [mat * dz, eye, zero],
        [zero, zero, eye],
        [zero, zero, zero],
    ])
    big = expm(aug)
    stepper = big[:n, :n]
    phi1 = big[:n, n : 2 * n]
    phi2 = big[:n, 2 * n : 3 * n]
    source = -coeff.couple_light * coupling
    w0 = dz * (phi1 - phi2) @ source
    w1 = dz * phi2 @ source
    csb = coeff.couple_spin * coupling
    return (
        np.ascontiguousarray(stepper),
        np.ascontiguousarray(w0),
        np.ascontiguousarray(w1),
        np.ascontiguousarray(csb),
        complex(coeff.spin_decay),
    )


def integrate_storage(run: TimeDomainRun):
    """Drive the input pulse into the medium; returns (S(z), eta_s).

    eta_s is the stored fraction Int dz ||S||^2 / Int dt ||a_in||^2.
    """
    ops = _stepping_operators(run.params, run.basis, run.coupling, run.n_axial)
    stepper, w0, w1, csb, gs = ops
    half_dt = 0.5 * run.time_step
    power_in = (np.abs(run.input_pulse) ** 2).sum(axis=1)
    energy_in = float(simpson(power_in, dx=half_dt))
    if energy_in <= 0.0:
        run.energy_in = 0.0
        run.spin_wave = np.zeros((run.n_axial + 1, run.basis.size), dtype=complex)
        run.eta_storage = 0.0
        return run.spin_wave, 0.0
    spin, snorm = _accel.run_storage(
        stepper, w0, w1, csb, gs, run.input_pulse, run.time_step, run.n_axial
    )
    dz = 1.0 / run.n_axial
    if snorm.max() * dz > 1.05 * energy_in + 1e-12:
        raise StabilityError(
            f"stored norm {snorm.max() * dz:.3g} exceeds input energy "
            f"{energy_in:.3g}: time step too coarse"
        )
    eta_s = float(simpson((np.abs(spin) ** 2).sum(axis=1), dx=dz)) / energy_in
    run.energy_in = energy_in
    run.spin_wave = spin
    run.eta_storage = eta_s
    return spin, eta_s


def integrate_retrieval(
    run: TimeDomainRun,
    direction: str = "forward",
    spin: np.ndarray | None = None,
    chunk_time: float | None = None,
    settle: float = 1e-4,
    max_chunks: int = 64,
):
    """Read the stored spin wave out; returns (a_out(t), eta_total).

    Backward readout mirrors the spin wave in z (no conjugation).  The
    integration window grows chunk by chunk until an additional chunk would
    change eta_total by less than `settle`; eta_total is referenced to the
    storage input energy recorded on the run.
    """
    if direction not in ("forward", "backward"):
        raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if spin is None:
        spin = run.spin_wave
    if spin is None:
        raise ParameterError("no spin wave: run integrate_storage first or pass one")
    if run.energy_in is None or run.energy_in <= 0.0:
        raise ParameterError("run has no recorded input energy to reference eta against")
    spin = np.asarray(spin, dtype=complex)
    if direction == "backward":
        spin = spin[::-1].copy()

    ops = _stepping_operators(run.params, run.basis, run.coupling, run.n_axial)
    stepper, w0, w1, csb, gs = ops
    dt = run.time_step
    if chunk_time is None:
        # a couple of group delays per chunk; the group delay through the
        # whole medium is d0 / (2 |Gamma_S|)
        coeff = coefficients(run.params)
        chunk_time = max(2.0 * run.params.depth / abs(coeff.spin_decay), 20.0 * dt)
    n_chunk = max(2, int(np.ceil(chunk_time / dt)))

    pieces = []
    state = spin.copy()
    norm0 = float((np.abs(state) ** 2).sum())
    energy = 0.0
    for _ in range(max_chunks):
        state, a_out, snorm = _accel.run_retrieval(stepper, w0, w1, csb, gs, state, n_chunk, dt)
        if snorm.max() > norm0 * (1.0 + 1e-6) + 1e-12:
            raise StabilityError(
                "spin norm grew during retrieval: time step too coarse"
            )
        pieces.append(a_out if not pieces else a_out[1:])
        gain = float(np.trapezoid((np.abs(a_out) ** 2).sum(axis=1), dx=dt)) / run.energy_in
        energy += gain
        if gain < settle and len(pieces) >= 2:
            break
    else:
        raise ConvergenceError(
            f"retrieval energy did not settle below {settle:g} per chunk "
            f"within {max_chunks} chunks"
        )
    a_full = np.concatenate(pieces, axis=0)
    times = dt * np.arange(a_full.shape[0])
    eta_total = float(simpson((np.abs(a_full) ** 2).sum(axis=1), dx=dt)) / run.energy_in
    run.output_field = a_full
    run.output_times = times
    run.eta_total = eta_total
    return a_full, eta_total


def eigenmode_spectrum(mmap: MemoryMap, basis: BlockBasis, coupling: np.ndarray,
                       sigma: float, right_vector: np.ndarray,
                       freqs: np.ndarray) -> np.ndarray:
    """Input eigenfunction of an end-to-end map at arbitrary frequencies.

    right_vector is a unit right singular vector of mmap.operator with
    singular value sigma.  At the quadrature nodes the returned spectra
    reproduce the vector (up to the coordinate weights); in between they
    follow the continuum singular function, obtained by pushing the vector
    through the map and back through the adjoint kernel rows evaluated at
    the requested frequencies.  This captures the full chirp of the mode,
    which naive interpolation of the node values does not.
    """
    params = mmap.params
    grid = mmap.grid
    coeff = coefficients(params)
    n = basis.size
    nf = grid.freq_nodes.size
    na = grid.axial_nodes.size
    left = (mmap.operator @ right_vector.reshape(-1)) / sigma
    left = left.reshape(nf, n)

    # c_k = sum_i sqrt(w_i) conj(phi_i fam_i[k])^T u_i  over output nodes
    cks = np.zeros((na, n), dtype=complex)
    for i, (nu, wi) in enumerate(zip(grid.freq_nodes, grid.freq_weights)):
        mat = system_matrix(coeff, basis, coupling, params.fresnel, nu)
        ebz = propagator_family(mat, grid.axial_nodes, rhs=coupling)
        fam = ebz[::-1] if mmap.direction == "forward" else ebz
        phi = -coeff.couple_light / (1j * nu + coeff.spin_decay) / _ROOT2PI
        pref = np.sqrt(wi) * np.conj(phi)
        cks += pref * np.einsum("kqp,q->kp", np.conj(fam), left[i])

    vz = grid.axial_weights
    scale = np.sqrt(2.0 * np.pi) / sigma
    out = np.empty((np.asarray(freqs).size, n), dtype=complex)
    for j, nu in enumerate(np.asarray(freqs)):
        mat = system_matrix(coeff, basis, coupling, params.fresnel, nu)
        ebz = propagator_family(mat, grid.axial_nodes, rhs=coupling)
        psi = -coeff.couple_spin / (1j * nu + coeff.spin_decay) / _ROOT2PI
        out[j] = (scale * np.conj(psi)) * np.einsum(
            "k,kpq,kq->p", vz, np.conj(ebz), cks)
    return out


def eigenmode_pulse(mmap: MemoryMap, basis: BlockBasis, coupling: np.ndarray,
                    sigma: float, right_vector: np.ndarray,
                    time_step: float | None = None, n_dense: int = 8193,
                    support_tol: float = 1e-9):
    """Realize a singular input mode as a causal sampled pulse.

    Returns (pulse, dt, window): half-step samples for a TimeDomainRun, the
    adjusted time step, and the storage window length.  The spectra are
    evaluated on a dense uniform frequency grid (eigenmode_spectrum), then
    Fourier-synthesized into the profile g(u) against time-before-readout;
    the pulse is that profile reversed onto [0, window] so that the readout
    instant coincides with the window end.  Support is cut where the
    cumulative energy tails pass support_tol, and at u < 0 (causality).
    """
    params = mmap.params
    grid = mmap.grid
    n = basis.size
    nu_max = grid.freq_halfwidth
    tau = params.depth / (2.0 * abs(coefficients(params).spin_decay))

    nu_dense = np.linspace(-nu_max, nu_max, n_dense)
    spectra = eigenmode_spectrum(mmap, basis, coupling, sigma, right_vector,
                                 nu_dense)

    du = 0.35 / nu_max
    u_grid = np.arange(-tau, 5.0 * tau + 10.0, du)
    profile = np.empty((u_grid.size, n), dtype=complex)
    step = 512
    for s in range(0, u_grid.size, step):
        phases = np.exp(-1j * np.outer(u_grid[s : s + step], nu_dense))
        for p in range(n):
            profile[s : s + step, p] = simpson(
                phases * spectra[None, :, p], x=nu_dense, axis=1
            ) / (2.0 * np.pi)

    power = (np.abs(profile) ** 2).sum(axis=1)
    steps = 0.5 * (power[1:] + power[:-1]) * np.diff(u_grid)
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    total = cum[-1]
    lo = max(float(u_grid[np.searchsorted(cum, support_tol * total)]), 0.0)
    hi = float(u_grid[min(np.searchsorted(cum, (1.0 - support_tol) * total),
                          u_grid.size - 1)])
    if hi >= u_grid[-1] - du:
        raise NumericalError(
            "eigenmode support not contained in the synthesis window"
        )
    splines = [CubicSpline(u_grid, profile[:, p]) for p in range(n)]

    def pulse_fn(t):
        u = hi - t
        if u < lo:
            return np.zeros(n, dtype=complex)
        return np.array([s(u) for s in splines])

    if time_step is None:
        time_step = default_time_step(params, coupling)
    pulse, dt = sample_pulse(pulse_fn, hi, time_step, n)
    return pulse, dt, hi


def analyze_output(run: TimeDomainRun, freq_nodes: np.ndarray,
                   freq_weights: np.ndarray) -> np.ndarray:
    """Project the retrieved field onto weighted frequency coordinates.

    Returns beta with beta[i, p] = sqrt(w_i / 2 pi) Int a_out,p(t)
    e^{-i nu_i t} dt, the output-side convention of the frequency maps, so
    ||beta||^2 / energy_in is directly comparable to map efficiencies.
    """
    if run.output_field is None:
        raise ParameterError("no retrieved field on this run yet")
    phases = np.exp(-1j * np.outer(freq_nodes, run.output_times))
    spectra = simpson(phases[:, None, :] * run.output_field.T[None, :, :],
                      x=run.output_times, axis=-1)
    return np.sqrt(freq_weights / (2.0 * np.pi))[:, None] * spectra
