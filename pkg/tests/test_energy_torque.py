import math

import numpy as np
import pytest

from mre_spring.config import default_run_config
from mre_spring.core.energy_torque import (CoenergyCurve, GripperMaterials, TorqueCurve, coenergy_at,
                                           default_theta_grid, fit_spline, interaction_coenergy,
                                           plateau_statistics, sample_key, sweep_coenergy,
                                           torque_curve, torque_fd_oracle)
from mre_spring.core.errors import DomainError, InsufficientDataError, RangeError
from mre_spring.core.geometry import max_wrap_angle


class DictCache:
    """内存样本缓存，满足 SampleCache 协议"""

    def __init__(self):
        self.data = {}

    def get(self, key):
        return self.data.get(key)

    def put(self, key, sample):
        self.data[key] = sample


def _curve(fn, n=30, stop=4.0):
    thetas = np.linspace(0.0, stop, n)
    return CoenergyCurve(thetas, fn(thetas))


def test_curve_requires_increasing_thetas():
    with pytest.raises(DomainError):
        CoenergyCurve(np.array([0.0, 0.2, 0.1]), np.zeros(3))
    with pytest.raises(DomainError):
        CoenergyCurve(np.array([0.0, 0.1]), np.zeros(3))


def test_interpolating_spline_passes_through_samples():
    curve = _curve(lambda t: 1e-2 * np.sin(t) + 3e-3 * t)
    spline = fit_spline(curve, lam=0)
    assert spline.method == "interpolating"
    np.testing.assert_allclose(spline(curve.thetas), curve.w_co, rtol=0, atol=1e-9 * 1e-2)


def test_quadratic_derivative_is_exact():
    curve = _curve(lambda t: 3e-3 * t ** 2 - 1e-3 * t + 0.5)
    torque = torque_curve(fit_spline(curve, lam=0), curve.thetas[1:-1])
    exact = 6e-3 * curve.thetas[1:-1] - 1e-3
    np.testing.assert_allclose(torque.t_co, exact, rtol=1e-8, atol=1e-8 * 1e-3)


@pytest.mark.parametrize("lam", [0, 1.0])
def test_linear_coenergy_gives_constant_torque(lam):
    curve = _curve(lambda t: 2e-3 * t)
    torque = torque_curve(fit_spline(curve, lam=lam), curve.thetas)
    np.testing.assert_allclose(torque.t_co, 2e-3, rtol=1e-6)


def test_smoothing_beats_interpolation_on_noisy_samples():
    rng = np.random.default_rng(42)
    thetas = np.linspace(0.0, 5.0, 60)
    truth = 1e-2 * (thetas - 0.3 * np.sin(thetas))
    span = truth.max() - truth.min()
    noisy = truth + rng.uniform(-0.01, 0.01, size=thetas.shape) * span
    curve = CoenergyCurve(thetas, noisy)
    true_torque = 1e-2 * (1 - 0.3 * np.cos(thetas))

    def rms(lam):
        t = torque_curve(fit_spline(curve, lam), thetas).t_co
        return math.sqrt(np.mean((t - true_torque) ** 2))

    auto = fit_spline(curve, "auto")
    assert auto.method == "gcv"
    assert auto.lam is None
    assert rms("auto") < rms(0)


@pytest.mark.parametrize("lam, tol", [(0, 1e-9), (1e-4, 1e-6)])
def test_torque_invariant_under_constant_shift(lam, tol):
    curve = _curve(lambda t: 1e-2 * np.tanh(t))
    t1 = torque_curve(fit_spline(curve, lam), curve.thetas).t_co
    t2 = torque_curve(fit_spline(curve.shifted(1e-2), lam), curve.thetas).t_co
    np.testing.assert_allclose(t2, t1, rtol=0, atol=tol * np.abs(t1).max())


def test_torque_integral_matches_rise():
    curve = _curve(lambda t: 1e-2 * np.tanh(t), n=40)
    spline = fit_spline(curve, "auto")
    rise = curve.w_co[-1] - curve.w_co[0]
    assert spline.torque_integral(curve.thetas[0], curve.thetas[-1]) == pytest.approx(rise, rel=2e-2)
    # 积分的是扭矩而不是共能本身: ∫tanh = ln cosh
    assert spline.torque_integral(0.0, 4.0) != pytest.approx(1e-2 * math.log(math.cosh(4.0)), rel=0.1)


def test_torque_integral_of_quadratic_is_exact():
    curve = _curve(lambda t: 2e-3 * t ** 2, n=12)
    spline = fit_spline(curve, 0)
    assert spline.torque_integral(1.0, 3.0) == pytest.approx(2e-3 * (9.0 - 1.0), rel=1e-9)


def test_fit_spline_errors():
    with pytest.raises(InsufficientDataError):
        fit_spline(_curve(lambda t: t, n=7))
    with pytest.raises(DomainError):
        fit_spline(_curve(lambda t: t), lam=-1.0)
    with pytest.raises(DomainError):
        fit_spline(_curve(lambda t: t), lam="gcv")


def test_torque_outside_fitted_range():
    spline = fit_spline(_curve(lambda t: t ** 2))
    with pytest.raises(RangeError):
        torque_curve(spline, [0.0, 4.5])


def test_fd_oracle_on_quadratic():
    curve = _curve(lambda t: 3e-3 * t ** 2, n=11)
    fd = torque_fd_oracle(curve)
    np.testing.assert_allclose(fd.t_co[1:-1], 6e-3 * curve.thetas[1:-1], rtol=1e-9)
    with pytest.raises(InsufficientDataError):
        torque_fd_oracle(_curve(lambda t: t, n=2))


def test_plateau_statistics():
    thetas = np.radians(np.arange(0.0, 300.0, 5.0))
    t_co = np.where((thetas >= math.radians(20)) & (thetas <= math.radians(200)), 5e-3, 1e-3)
    stats = plateau_statistics(TorqueCurve(thetas, t_co))
    assert stats.mean == pytest.approx(5e-3)
    assert stats.cv == pytest.approx(0.0, abs=1e-12)
    assert stats.n_samples == 37
    with pytest.raises(InsufficientDataError):
        plateau_statistics(TorqueCurve(thetas[:3], t_co[:3]))


def test_default_theta_grid(default_geometry):
    grid = default_theta_grid(default_geometry)
    theta_max = max_wrap_angle(default_geometry)
    assert grid[0] == 0.0
    assert grid[-1] == pytest.approx(0.98 * theta_max)
    assert len(grid) == 60
    steps = np.degrees(np.diff(grid))
    assert np.all(steps > 0)
    assert np.all(steps <= 5.0 + 1e-9)
    with pytest.raises(DomainError):
        default_theta_grid(default_geometry, step_deg=0)
    with pytest.raises(DomainError):
        default_theta_grid(default_geometry, stop_deg=400.0)


def test_sample_key_depends_on_inputs(default_geometry, materials, coarse_params):
    k1 = sample_key(default_geometry, materials, coarse_params, 0.5, "isotropic", None)
    assert k1 == sample_key(default_geometry, materials, coarse_params, 0.5, "isotropic", None)
    assert k1 != sample_key(default_geometry, materials, coarse_params, 0.6, "isotropic", None)
    assert k1 != sample_key(default_geometry, materials, coarse_params, 0.5, "fixed", None)
    assert len(k1) == 64


@pytest.mark.parametrize("theta_deg", [0.0, 60.0])
def test_mre_raises_coenergy(default_geometry, materials, coarse_params, theta_deg):
    dw = interaction_coenergy(default_geometry, materials, coarse_params, math.radians(theta_deg))
    assert dw > 0


def test_interaction_coenergy_continuous_in_theta(default_geometry, materials, coarse_params):
    w = np.array([interaction_coenergy(default_geometry, materials, coarse_params, th)
                  for th in np.radians(np.arange(20.0, 65.0, 5.0))])
    assert np.all(np.isfinite(w))
    assert np.all(w > 0)
    # 相邻 5° 样本的增量偏离整体趋势不超过当前值的 5%
    steps = np.diff(w)
    assert np.all(np.abs(steps - np.median(steps)) <= 0.05 * w[1:])


def test_wrapping_raises_coenergy(default_geometry, materials, coarse_params):
    w0 = coenergy_at(default_geometry, materials, coarse_params, 0.0).w_co
    w120 = coenergy_at(default_geometry, materials, coarse_params, math.radians(120.0)).w_co
    assert w120 > w0


def test_isotropic_is_mean_of_orthogonal_directions(default_geometry, materials, coarse_params):
    theta = math.radians(45.0)
    iso = coenergy_at(default_geometry, materials, coarse_params, theta).w_co
    mx, my = materials.magnet.magnetization_dir
    rotated = GripperMaterials(materials.air, materials.stripe, materials.magnet.with_direction((-my, mx)))
    w_a = coenergy_at(default_geometry, materials, coarse_params, theta, excitation="fixed").w_co
    w_b = coenergy_at(default_geometry, rotated, coarse_params, theta, excitation="fixed").w_co
    assert iso == pytest.approx(0.5 * (w_a + w_b), rel=1e-12)


def test_sweep_uses_cache(default_geometry, materials, coarse_params):
    grid = np.radians([0.0, 30.0, 60.0])
    cache = DictCache()
    cold = sweep_coenergy(default_geometry, materials, coarse_params, grid, cache=cache)
    assert cold.sweep_meta["solve_count"] == 3
    assert len(cache.data) == 3
    warm = sweep_coenergy(default_geometry, materials, coarse_params, grid, cache=cache)
    assert warm.sweep_meta["solve_count"] == 0
    assert warm.sweep_meta["cache_hits"] == 3
    np.testing.assert_array_equal(warm.w_co, cold.w_co)


def test_parallel_sweep_matches_serial(default_geometry, materials, coarse_params):
    grid = np.radians([0.0, 20.0, 40.0, 80.0])
    serial = sweep_coenergy(default_geometry, materials, coarse_params, grid, workers=1)
    parallel = sweep_coenergy(default_geometry, materials, coarse_params, grid, workers=2)
    np.testing.assert_array_equal(parallel.thetas, serial.thetas)
    np.testing.assert_array_equal(parallel.w_co, serial.w_co)


def test_sweep_rejects_bad_grid(default_geometry, materials, coarse_params):
    with pytest.raises(DomainError):
        sweep_coenergy(default_geometry, materials, coarse_params, [0.2, 0.1])
    with pytest.raises(DomainError):
        sweep_coenergy(default_geometry, materials, coarse_params, [0.0, 6.0])
    with pytest.raises(DomainError):
        sweep_coenergy(default_geometry, materials, coarse_params, [0.0], excitation="axial")


@pytest.mark.slow
def test_default_sweep_acceptance(tmp_path):
    """默认配置完整扫描：共能单调、扭矩平台、末端趋零、差分对照与积分一致"""
    from mre_spring.services import SimulationService

    service = SimulationService(default_run_config(), cache_dir=tmp_path / "cache", workers=2)
    result = service.run_sweep()
    w = result.curve.w_co
    rise = w[-1] - w[0]
    assert rise > 0
    assert np.all(np.diff(w) >= -0.005 * rise)

    plateau = result.plateau
    assert plateau is not None
    assert plateau.mean > 0
    assert plateau.cv < 0.25
    assert result.torque.t_co[-1] < 0.25 * plateau.mean

    assert result.fd_rms < 0.10 * plateau.mean
    assert result.integral_rel_error < 0.02


@pytest.mark.slow
def test_plateau_mean_stable_under_grid_refinement(default_geometry, materials, coarse_params):
    cache = DictCache()
    means = []
    for step in (20.0, 10.0):
        grid = np.radians(np.arange(0.0, 220.0 + 1e-9, step))
        curve = sweep_coenergy(default_geometry, materials, coarse_params, grid, cache=cache)
        torque = torque_curve(fit_spline(curve), curve.thetas)
        means.append(plateau_statistics(torque).mean)
    coarse, fine = means
    assert coarse > 0
    assert abs(fine - coarse) < 0.05 * coarse
