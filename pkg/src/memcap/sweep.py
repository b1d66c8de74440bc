"""Parameter sweeps, grid convergence, drive optimization, and scaling fits.

A sweep point computes the full efficiency census of one (d0, F) memory:
azimuthal blocks are scanned outward from m = 0 until a block contributes
neither capacity nor counted modes in either retrieval direction, and both
direction reports are recorded together with the resolution that produced
them.  Power-law exponents are then fitted on log-log axes across points.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .basis import build_basis, coupling_block
from .errors import ConvergenceError
from .memory_map import block_grams, make_grid
from .params import ModelParams, ParameterError, Resolution, coefficients
from .spectrum import BlockSpectrum, CapacityReport, capacity_report, gram_spectrum

# Calibrated frequency-grid policy: window proportional to the kernel
# bandwidth Gamma_S (1.5 sqrt(d0) + 6)/d0 and node density set by the
# slowest phase across the window, exp(-i nu d0 / (2 Gamma_S)).
_WINDOW_FACTOR = 1.5
_NODE_DENSITY = 2.2
_NODE_PAD = 32
_DEFAULT_AXIAL = 24


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float
    points_used: int


@dataclass(frozen=True)
class SweepPoint:
    params: ModelParams
    resolution: Resolution
    report_forward: CapacityReport
    report_backward: CapacityReport
    wall_time: float


def fit_power_law(points) -> PowerLawFit:
    """Least-squares power law y = a x^b on log-log axes."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ParameterError(f"power-law fit needs at least 3 points, got {len(pts)}")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ParameterError("power-law fit requires strictly positive coordinates")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    total = ly - ly.mean()
    denom = float(total @ total)
    r2 = 1.0 if denom == 0.0 else 1.0 - float(resid @ resid) / denom
    return PowerLawFit(
        exponent=float(slope),
        prefactor=float(np.exp(intercept)),
        r_squared=r2,
        points_used=len(pts),
    )


def auto_resolution(params: ModelParams, n_radial: int | None = None) -> Resolution:
    """Calibrated economical resolution for one parameter point.

    The frequency window scales with the drive-induced linewidth and
    shrinks with depth (the usable memory bandwidth does too); the node
    count then tracks the longest group delay so that the kernel phase is
    sampled densely everywhere in the window.
    """
    gs = abs(coefficients(params).spin_decay)
    nu_max = _WINDOW_FACTOR * 2.0 * np.pi * gs * (1.5 * math.sqrt(params.depth) + 6.0) / params.depth
    tau = params.depth / (2.0 * gs)
    n_freq = int(np.ceil(_NODE_DENSITY * nu_max * tau / np.pi)) + _NODE_PAD
    if n_radial is None:
        n_radial = int(np.clip(24.0 * (params.depth * params.fresnel) ** (1.0 / 3.0), 16, 128))
    return Resolution(
        n_radial_max=int(n_radial),
        m_max=80,
        n_freq=n_freq,
        n_axial=_DEFAULT_AXIAL,
        disc_radius=6.0,
        freq_halfwidth=nu_max,
    )


def block_pair(params: ModelParams, res: Resolution, m: int):
    """(forward, backward) spectra of one azimuthal block."""
    basis = build_basis(m, res)
    coupling = coupling_block(basis)
    grid = make_grid(res, params)
    grams = block_grams(params, basis, coupling, grid)
    return gram_spectrum(grams, "forward"), gram_spectrum(grams, "backward")


def _block_contributes(spec: BlockSpectrum, threshold: float) -> bool:
    eff = spec.efficiencies
    return bool(eff.size and (eff.max() > 0.5 or eff.max() >= threshold))


def _pair_task(args):
    params, res, m = args
    return m, block_pair(params, res, m)


def collect_blocks(
    params: ModelParams,
    res: Resolution,
    threshold: float = 0.5,
    cache=None,
    jobs: int = 1,
):
    """Scan azimuthal blocks from m = 0 until one goes dark both ways.

    Returns (forward, backward) lists of BlockSpectrum, one entry per m
    including the final dark block.  `cache`, when given, must expose
    get_pair/put_pair keyed on (params, res, m).
    """
    fwd: list[BlockSpectrum] = []
    bwd: list[BlockSpectrum] = []

    def have(m):
        if cache is not None:
            hit = cache.get_pair(params, res, m)
            if hit is not None:
                return hit
        pair = block_pair(params, res, m)
        if cache is not None:
            cache.put_pair(params, res, m, pair)
        return pair

    m = 0
    if jobs <= 1:
        while m <= res.m_max:
            f, b = have(m)
            fwd.append(f)
            bwd.append(b)
            if not (_block_contributes(f, threshold) or _block_contributes(b, threshold)):
                break
            m += 1
    else:
        done = False
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            while not done and m <= res.m_max:
                wave = list(range(m, min(m + jobs, res.m_max + 1)))
                for mm, pair in pool.map(_pair_task, [(params, res, w) for w in wave]):
                    f, b = pair
                    if cache is not None:
                        cache.put_pair(params, res, mm, pair)
                    fwd.append(f)
                    bwd.append(b)
                    if not (_block_contributes(f, threshold) or _block_contributes(b, threshold)):
                        done = True
                        break
                m = wave[-1] + 1
    return fwd, bwd


def compute_point(
    params: ModelParams,
    res: Resolution,
    threshold: float = 0.5,
    cache=None,
    jobs: int = 1,
) -> SweepPoint:
    """Full census of one parameter point, scanning m until blocks go dark.

    The scan hard-stops at res.m_max only in the sense that exceeding it
    raises through capacity_report's truncation check; blocks are otherwise
    added as needed.
    """
    t0 = time.perf_counter()
    fwd, bwd = collect_blocks(params, res, threshold, cache=cache, jobs=jobs)
    final = replace(res, m_max=fwd[-1].azimuthal)
    return SweepPoint(
        params=params,
        resolution=final,
        report_forward=capacity_report(fwd, threshold, drive=params.drive),
        report_backward=capacity_report(bwd, threshold, drive=params.drive),
        wall_time=time.perf_counter() - t0,
    )


def _point_metrics(params, res, threshold, cache=None):
    point = compute_point(params, res, threshold, cache=cache)
    return point.report_forward.total_capacity, point.report_forward.leading, point


# Axes bumped by converge, cycled in order.
def _bump(res: Resolution, axis: str, nu_ref: float) -> Resolution:
    if axis == "n_radial_max":
        return replace(res, n_radial_max=2 * res.n_radial_max)
    if axis == "n_freq":
        return replace(res, n_freq=2 * res.n_freq)
    if axis == "n_axial":
        return replace(res, n_axial=2 * res.n_axial)
    if axis == "disc_radius":
        return replace(res, disc_radius=res.disc_radius + 2.0)
    if axis == "freq_halfwidth":
        cur = res.freq_halfwidth if res.freq_halfwidth is not None else nu_ref
        return replace(res, freq_halfwidth=2.0 * cur)
    raise AssertionError(axis)


_BUMP_AXES = ("n_radial_max", "n_freq", "n_axial", "disc_radius", "freq_halfwidth")


def converge(
    params: ModelParams,
    initial: Resolution,
    tol: float,
    threshold: float = 0.5,
    max_evals: int = 40,
    cache=None,
) -> Resolution:
    """Refine the resolution until capacity and leading efficiency settle.

    Each axis in turn is bumped (counts doubled, disc radius and frequency
    window widened); if both metrics move less than tol (relative, with a
    floor of 1), the bump is discarded and the axis marked stable, otherwise
    the bump is adopted and all marks cleared.  Returns when every axis is
    stable in a single cycle.
    """
    if not (0.0 < tol <= 0.01):
        raise ParameterError(f"tol must lie in (0, 0.01], got {tol!r}")
    nu_ref = initial.resolved_halfwidth(params)
    current = initial
    evals = 0
    metrics_cache: dict = {}

    def metrics(res):
        nonlocal evals
        key = (res.n_radial_max, res.n_freq, res.n_axial, res.disc_radius, res.freq_halfwidth)
        if key not in metrics_cache:
            evals += 1
            if evals > max_evals:
                raise ConvergenceError(
                    f"convergence not reached within {max_evals} point evaluations; "
                    f"last resolution {res} (from {current})"
                )
            cap, lead, _ = _point_metrics(params, res, threshold, cache=cache)
            metrics_cache[key] = (cap, lead)
        return metrics_cache[key]

    def settled(a, b):
        return all(abs(x - y) / max(abs(x), abs(y), 1.0) < tol for x, y in zip(a, b))

    base = metrics(current)
    stable_streak = 0
    axis_idx = 0
    while stable_streak < len(_BUMP_AXES):
        axis = _BUMP_AXES[axis_idx % len(_BUMP_AXES)]
        axis_idx += 1
        bumped = _bump(current, axis, nu_ref)
        trial = metrics(bumped)
        if settled(base, trial):
            stable_streak += 1
        else:
            current = bumped
            base = trial
            stable_streak = 0
    return current


def _drive_metric_value(params, drive, metric, res, threshold, cache=None):
    if callable(metric):
        return float(metric(drive))
    trial = params.with_drive(drive)
    # with res=None (or a Resolution whose freq_halfwidth is None) the
    # frequency window re-resolves per drive, keeping the grid matched to
    # the drive-scaled bandwidth
    use = auto_resolution(trial) if res is None else res
    point = compute_point(trial, use, threshold, cache=cache)
    if metric == "capacity":
        return point.report_forward.total_capacity
    if metric == "leading":
        return point.report_forward.leading
    raise ParameterError(f"metric must be 'capacity', 'leading', or callable, got {metric!r}")


def optimize_drive(
    params: ModelParams,
    metric="capacity",
    grid=None,
    res: Resolution | None = None,
    threshold: float = 0.5,
    cache=None,
):
    """Scan drive amplitudes on a log grid, then one golden-section stage.

    The drive phase is exactly immaterial (it rotates every map by a global
    phase), so only positive amplitudes are scanned.  Returns (drive, value).
    """
    if grid is None:
        grid = np.geomspace(0.1, 10.0, 7)
    grid = np.asarray(sorted(float(g) for g in grid))
    if grid.size < 5:
        raise ParameterError(f"drive grid needs at least 5 points, got {grid.size}")
    if grid[0] <= 0:
        raise ParameterError("drive grid must be positive")
    if grid[-1] / grid[0] < 100.0 * (1.0 - 1e-12):
        raise ParameterError("drive grid must span at least two decades")

    values = [_drive_metric_value(params, g, metric, res, threshold, cache) for g in grid]
    best = int(np.argmax(values))
    if best in (0, grid.size - 1):
        warnings.warn(
            f"drive optimum {grid[best]:.3g} sits on the grid boundary; extend the grid",
            stacklevel=2,
        )
        return float(grid[best]), float(values[best])

    # one golden-section stage in log-drive between the flanking grid points
    lo, hi = math.log(grid[best - 1]), math.log(grid[best + 1])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1 = _drive_metric_value(params, math.exp(x1), metric, res, threshold, cache)
    f2 = _drive_metric_value(params, math.exp(x2), metric, res, threshold, cache)
    track = [(grid[best], values[best]), (math.exp(x1), f1), (math.exp(x2), f2)]
    for _ in range(8):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = _drive_metric_value(params, math.exp(x1), metric, res, threshold, cache)
            track.append((math.exp(x1), f1))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = _drive_metric_value(params, math.exp(x2), metric, res, threshold, cache)
            track.append((math.exp(x2), f2))
    drive, value = max(track, key=lambda t: t[1])
    return float(drive), float(value)


def _sweep(params_list, res_for, direction, threshold, fit_values, converge_tol, cache, jobs):
    points = []
    for params in params_list:
        res = res_for(params)
        if converge_tol is not None:
            res = converge(params, res, converge_tol, threshold, cache=cache)
        points.append(compute_point(params, res, threshold, cache=cache, jobs=jobs))
    xs = fit_values[0]
    ys = []
    for point in points:
        report = point.report_forward if direction == "forward" else point.report_backward
        ys.append(fit_values[1](report))
    keep = [(x, y) for x, y in zip(xs, ys) if y > 0]
    if len(keep) < len(xs):
        warnings.warn(
            f"{len(xs) - len(keep)} sweep points contribute nothing and were "
            "dropped from the power-law fit",
            stacklevel=3,
        )
    fit = fit_power_law(keep)
    return points, fit


def sweep_fresnel(
    depth: float,
    fresnel_values,
    direction: str = "forward",
    threshold: float = 0.5,
    resolution=None,
    converge_tol: float | None = None,
    drive: complex = 1.0,
    cache=None,
    jobs: int = 1,
):
    """Capacity vs Fresnel number at fixed depth, with a power-law fit."""
    values = sorted(float(f) for f in fresnel_values)
    if len(values) < 4:
        raise ParameterError(f"need at least 4 Fresnel values, got {len(values)}")
    if values[-1] / values[0] < 4.0 * (1.0 - 1e-12):
        raise ParameterError("Fresnel values must span at least a factor 4")
    if direction not in ("forward", "backward"):
        raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")
    params_list = [ModelParams(depth=depth, fresnel=f, drive=drive) for f in values]
    res_for = resolution if callable(resolution) else (
        (lambda p: resolution) if resolution is not None else auto_resolution
    )
    return _sweep(
        params_list,
        res_for,
        direction,
        threshold,
        (values, lambda rep: rep.total_capacity),
        converge_tol,
        cache,
        jobs,
    )


def sweep_depth(
    fresnel: float,
    depth_values,
    direction: str = "forward",
    threshold: float = 0.65,
    resolution=None,
    converge_tol: float | None = None,
    drive: complex = 1.0,
    cache=None,
    jobs: int = 1,
):
    """Mode count (forward) or capacity (backward) vs depth at fixed F."""
    values = sorted(float(d) for d in depth_values)
    if len(values) < 4:
        raise ParameterError(f"need at least 4 depth values, got {len(values)}")
    if values[-1] / values[0] < 4.0 * (1.0 - 1e-12):
        raise ParameterError("depth values must span at least a factor 4")
    if direction not in ("forward", "backward"):
        raise ParameterError(f"direction must be 'forward' or 'backward', got {direction!r}")
    params_list = [ModelParams(depth=d, fresnel=fresnel, drive=drive) for d in values]
    res_for = resolution if callable(resolution) else (
        (lambda p: resolution) if resolution is not None else auto_resolution
    )
    yfun = (lambda rep: float(rep.total_modes)) if direction == "forward" else (
        lambda rep: rep.total_capacity
    )
    return _sweep(
        params_list,
        res_for,
        direction,
        threshold,
        (values, yfun),
        converge_tol,
        cache,
        jobs,
    )
