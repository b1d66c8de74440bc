import math

import numpy as np
import pytest

from memcap.errors import ConvergenceError
from memcap.params import ModelParams, ParameterError, Resolution
from memcap.sweep import (auto_resolution, collect_blocks, compute_point,
                          converge, fit_power_law, optimize_drive,
                          sweep_depth, sweep_fresnel)


class SpyCache:
    def __init__(self):
        self.store = {}
        self.hits = 0
        self.misses = 0

    def _key(self, params, res, m):
        return (params.depth, params.fresnel, params.detuning, params.drive,
                res.n_radial_max, res.n_freq, res.n_axial, res.disc_radius,
                res.freq_halfwidth, m)

    def get_pair(self, params, res, m):
        pair = self.store.get(self._key(params, res, m))
        if pair is None:
            self.misses += 1
        else:
            self.hits += 1
        return pair

    def put_pair(self, params, res, m, pair):
        self.store[self._key(params, res, m)] = pair


def test_fit_power_law_exact():
    xs = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_power_law(list(zip(xs, 3.0 * xs**2)))
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.points_used == 4


def test_fit_power_law_constant():
    fit = fit_power_law([(x, 5.0) for x in (1.0, 2.0, 4.0)])
    assert fit.exponent == pytest.approx(0.0, abs=1e-12)
    assert fit.prefactor == pytest.approx(5.0, rel=1e-12)


def test_fit_power_law_noisy(rng):
    xs = np.geomspace(1.0, 100.0, 12)
    ys = 2.0 * xs**1.5 * np.exp(rng.normal(0.0, 0.05, xs.size))
    fit = fit_power_law(list(zip(xs, ys)))
    assert fit.exponent == pytest.approx(1.5, abs=0.1)
    assert fit.r_squared > 0.98


def test_fit_power_law_scale_equivariance():
    xs = np.array([1.0, 3.0, 9.0, 27.0])
    ys = 0.7 * xs**1.3
    f1 = fit_power_law(list(zip(xs, ys)))
    f2 = fit_power_law(list(zip(5.0 * xs, ys)))
    assert f1.exponent == pytest.approx(f2.exponent, abs=1e-12)


def test_fit_power_law_validation():
    with pytest.raises(ParameterError, match="3 points"):
        fit_power_law([(1.0, 1.0), (2.0, 2.0)])
    with pytest.raises(ParameterError, match="positive"):
        fit_power_law([(1.0, 1.0), (2.0, 0.0), (3.0, 2.0)])


def test_auto_resolution_tracks_depth_and_fresnel():
    small = auto_resolution(ModelParams(depth=10.0, fresnel=0.02))
    big = auto_resolution(ModelParams(depth=100.0, fresnel=10.0))
    assert small.n_radial_max == 16  # clipped at the floor
    assert big.n_radial_max == 128  # clipped at the ceiling
    assert big.n_freq > small.n_freq
    assert small.freq_halfwidth > big.freq_halfwidth


def test_auto_resolution_override():
    res = auto_resolution(ModelParams(depth=40.0, fresnel=1.0), n_radial=48)
    assert res.n_radial_max == 48


def test_collect_blocks_cache_roundtrip():
    params = ModelParams(depth=8.0, fresnel=0.3)
    res = Resolution(n_radial_max=6, m_max=10, n_freq=48, n_axial=12,
                     freq_halfwidth=6.0)
    cache = SpyCache()
    fwd1, bwd1 = collect_blocks(params, res, cache=cache)
    n_computed = len(cache.store)
    assert cache.misses == len(fwd1)
    assert cache.hits == 0
    fwd2, bwd2 = collect_blocks(params, res, cache=cache)
    assert cache.hits == len(fwd1)
    assert len(cache.store) == n_computed
    for a, b in zip(fwd1 + bwd1, fwd2 + bwd2):
        assert np.array_equal(a.efficiencies, b.efficiencies)


def test_compute_point_reports():
    params = ModelParams(depth=8.0, fresnel=0.3)
    res = Resolution(n_radial_max=6, m_max=10, n_freq=48, n_axial=12,
                     freq_halfwidth=6.0)
    point = compute_point(params, res)
    assert point.report_forward.direction == "forward"
    assert point.report_backward.direction == "backward"
    assert point.wall_time >= 0.0
    assert point.report_forward.total_capacity >= 0.0


def test_converge_settles_moving_axis(monkeypatch):
    """With a metric that only improves along n_freq, converge should double
    that axis until the change drops below tol and leave the rest alone."""
    def fake_metrics(params, res, threshold, cache=None):
        return 3.0 - 8.0 / res.n_freq, 0.5, None

    monkeypatch.setattr("memcap.sweep._point_metrics", fake_metrics)
    params = ModelParams(depth=6.0, fresnel=0.4)
    start = Resolution(n_radial_max=8, m_max=6, n_freq=16, n_axial=8,
                       freq_halfwidth=4.0)
    settled = converge(params, start, tol=0.01)
    # 8/(2*nf) < 0.01 * cap first holds at nf = 256
    assert settled.n_freq == 256
    assert settled.n_radial_max == start.n_radial_max
    assert settled.n_axial == start.n_axial
    assert settled.disc_radius == start.disc_radius
    assert settled.freq_halfwidth == start.freq_halfwidth


def test_converge_budget_exhaustion(monkeypatch):
    def restless(params, res, threshold, cache=None):
        return float(res.n_freq), 0.5, None

    monkeypatch.setattr("memcap.sweep._point_metrics", restless)
    params = ModelParams(depth=6.0, fresnel=0.4)
    with pytest.raises(ConvergenceError, match="40 point evaluations"):
        converge(params, Resolution(n_radial_max=8, m_max=6, n_freq=16,
                                    n_axial=8, freq_halfwidth=4.0), tol=0.01)


def test_converge_tol_validation():
    params = ModelParams(depth=6.0, fresnel=0.4)
    with pytest.raises(ParameterError, match="tol"):
        converge(params, Resolution(), tol=0.5)


def test_optimize_drive_synthetic_peak():
    """Golden-section refinement should land near the analytic optimum."""
    params = ModelParams(depth=10.0, fresnel=1.0)
    drive, value = optimize_drive(params, metric=lambda g: -((math.log(g) - 1.0) ** 2))
    assert abs(math.log(drive) - 1.0) < 0.05
    assert value > -3e-3


def test_optimize_drive_boundary_warns():
    params = ModelParams(depth=10.0, fresnel=1.0)
    with pytest.warns(UserWarning, match="boundary"):
        drive, value = optimize_drive(params, metric=lambda g: g)
    assert drive == pytest.approx(10.0)
    assert value == pytest.approx(10.0)


def test_optimize_drive_grid_validation():
    params = ModelParams(depth=10.0, fresnel=1.0)
    with pytest.raises(ParameterError, match="5 points"):
        optimize_drive(params, metric=lambda g: g, grid=[0.1, 1.0, 10.0])
    with pytest.raises(ParameterError, match="decades"):
        optimize_drive(params, metric=lambda g: g, grid=[1.0, 2.0, 3.0, 4.0, 5.0])
    with pytest.raises(ParameterError, match="positive"):
        optimize_drive(params, metric=lambda g: g, grid=[-1.0, 0.1, 1.0, 10.0, 100.0])


def test_sweep_grid_validation():
    with pytest.raises(ParameterError, match="at least 4"):
        sweep_fresnel(40.0, [0.5, 1.0])
    with pytest.raises(ParameterError, match="factor 4"):
        sweep_fresnel(40.0, [1.0, 1.5, 2.0, 3.0])
    with pytest.raises(ParameterError, match="direction"):
        sweep_fresnel(40.0, [0.5, 1.0, 2.0, 4.0], direction="up")
    with pytest.raises(ParameterError, match="at least 4"):
        sweep_depth(1.0, [20.0])


def test_sweep_fresnel_small_instance():
    """Plumbing check on a deliberately coarse grid: four points, a finite
    positive fit, sorted values."""
    res = Resolution(n_radial_max=10, m_max=24, n_freq=128, n_axial=12,
                     freq_halfwidth=6.0)
    points, fit = sweep_fresnel(30.0, [4.0, 0.5, 1.0, 2.0],
                                direction="backward", resolution=res)
    assert len(points) == 4
    fres = [p.params.fresnel for p in points]
    assert fres == sorted(fres)
    assert all(p.report_backward.total_capacity > 0 for p in points)
    assert fit.points_used == 4
    assert 0.3 < fit.exponent < 1.2
    assert fit.prefactor > 0
