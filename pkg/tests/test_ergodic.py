import numpy as np
import pytest

from fastslow.ergodic import (
    EstimatorError, birkhoff_average, centering_residual, delta_shift_exponent,
    estimate_correlation, estimate_density, fit_decay,
    stochastic_stability_flags,
)
from fastslow.integrate import SeedSpec, Trajectory, integrate_frozen_fast
from fastslow.systems import SKEW_PRODUCT, SystemSpec, make_system, trig_torus_system

TWO_PI2 = 2.0 * np.pi ** 2


def _heat_base(heat, seed, T=500.0, dt=1e-3):
    return integrate_frozen_fast(heat, [0.0], [0.0], 1.0, T, dt, seed)


# ---------------------------------------------------------------------------
# Birkhoff averages and centering
# ---------------------------------------------------------------------------

def test_birkhoff_constant(heat, seed):
    traj = _heat_base(heat, seed, T=5.0)
    value, se = birkhoff_average(lambda y: 3.7, traj)
    assert value == 3.7
    assert se == 0.0


def test_birkhoff_heat_sin_vanishes(heat, seed):
    traj = _heat_base(heat, seed, T=500.0)
    value, se = birkhoff_average(lambda y: np.sin(2 * np.pi * y[:, 0]), traj,
                                 burn_in=1.0)
    assert abs(value) <= 3.0 * se


def test_birkhoff_burn_in_too_large(heat, seed):
    traj = _heat_base(heat, seed, T=1.0)
    with pytest.raises(EstimatorError):
        birkhoff_average(lambda y: y[:, 0], traj, burn_in=2.0)


def test_centering_heat(heat, seed):
    res = centering_residual(heat, [0.3], 1.0, T=500.0, seed=seed)
    assert np.all(np.abs(res.residual) <= 3.0 * res.stderr)


def test_centering_constant_b(seed):
    sys = make_system(SystemSpec(
        d=1, m=1,
        a=lambda x, y: -x,
        b=lambda x, y: 1.0 + 0.0 * x + 0.0 * y,
        g=lambda x, y: 0.0 * y,
        epsilon=1.0, delta=1.0, coupling_class=SKEW_PRODUCT))
    res = centering_residual(sys, [0.0], 1.0, T=20.0, seed=seed)
    assert res.residual[0] == pytest.approx(1.0)
    assert res.stderr[0] == pytest.approx(0.0, abs=1e-12)


def test_centering_residual_inverse_sqrt_rate(heat):
    # |residual| averaged over seeds decays like T^(-1/2)
    Ts = [1e2, 1e3, 1e4]
    mean_abs = []
    for T in Ts:
        vals = [abs(centering_residual(heat, [0.0], 1.0, T=T,
                                       seed=SeedSpec(4000 + s)).residual[0])
                for s in range(12)]
        mean_abs.append(np.mean(vals))
    slope = np.polyfit(np.log(Ts), np.log(mean_abs), 1)[0]
    assert -0.7 <= slope <= -0.3


# ---------------------------------------------------------------------------
# correlation estimation
# ---------------------------------------------------------------------------

def _sin_obs(y):
    return np.sin(2 * np.pi * y[..., 0])


def test_heat_correlation_analytic(heat, seed):
    base = _heat_base(heat, seed, T=600.0)
    lags = np.linspace(0.0, 0.4, 41)
    series = estimate_correlation(_sin_obs, _sin_obs, base, lags, delta=1.0,
                                  noise_replicas=16, system=heat,
                                  n_origins=2048)
    assert series.values[0] == pytest.approx(0.5, rel=0.05)
    fit = fit_decay(series)
    assert fit.model == "exponential"
    assert fit.rate == pytest.approx(TWO_PI2, rel=0.10)
    # analytic curve within a few standard errors everywhere
    exact = 0.5 * np.exp(-TWO_PI2 * series.lags)
    assert np.all(np.abs(series.values - exact)
                  <= 5.0 * np.maximum(series.stderr, 1e-4))


def test_correlation_constant_v_is_zero(heat, seed):
    base = _heat_base(heat, seed, T=50.0)
    series = estimate_correlation(lambda y: np.ones(y.shape[0]), _sin_obs,
                                  base, np.linspace(0, 1.0, 11))
    assert np.allclose(series.values, 0.0, atol=1e-14)


def test_lag0_identity_exact(lorenz, seed):
    base = integrate_frozen_fast(lorenz, [0.0], lorenz.reference_eta, 0.0,
                                 T=50.0, dt=1e-3, seed=seed, record_stride=10)
    y2 = lambda y: y[..., 1]
    series = estimate_correlation(y2, y2, base, np.linspace(0, 5.0, 26))
    n = series.meta["n_origins"]
    v = base.y_path[:n, 1]
    cov = np.dot(v, v) / n - v.mean() * v.mean()
    assert series.values[0] == cov


def test_bilinearity(heat, seed):
    base = _heat_base(heat, seed, T=50.0)
    lags = np.linspace(0, 1.0, 11)
    c1 = estimate_correlation(_sin_obs, _sin_obs, base, lags)
    c2 = estimate_correlation(lambda y: 2.0 * _sin_obs(y), _sin_obs, base, lags)
    assert np.array_equal(c2.values, 2.0 * c1.values)
    c3 = estimate_correlation(lambda y: 1.7 * _sin_obs(y), _sin_obs, base, lags)
    assert np.allclose(c3.values, 1.7 * c1.values, rtol=1e-12)


def test_correlation_preconditions(heat, seed):
    base = _heat_base(heat, seed, T=10.0)
    with pytest.raises(EstimatorError, match="max lag"):
        estimate_correlation(_sin_obs, _sin_obs, base, np.linspace(0, 2.0, 5))
    with pytest.raises(EstimatorError, match="replica"):
        estimate_correlation(_sin_obs, _sin_obs, base, np.linspace(0, 0.5, 5),
                             delta=1.0, noise_replicas=0, system=heat)
    with pytest.raises(EstimatorError, match="lag grid"):
        estimate_correlation(_sin_obs, _sin_obs, base, [0.1, 0.2])


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------

def test_fit_exact_exponential():
    t = np.linspace(0.0, 3.0, 31)
    fit = fit_decay(t, 2.0 * np.exp(-3.0 * t))
    assert fit.model == "exponential"
    assert fit.C == pytest.approx(2.0, abs=1e-10)
    assert fit.rate == pytest.approx(3.0, abs=1e-10)
    assert fit.residual <= 1e-10
    assert fit.summable
    assert fit.summability_integral == pytest.approx(2.0 / 3.0, rel=1e-9)


def test_fit_exact_power():
    t = np.linspace(1.0, 100.0, 100)
    fit = fit_decay(t, t ** -2.0)
    assert fit.model == "power"
    assert fit.rate == pytest.approx(2.0, abs=1e-9)
    # tail integral over [1, inf) of t^-2 is exactly 1
    assert fit.summability_integral == pytest.approx(1.0, rel=1e-9)
    assert fit.tail_integral(1.0) == pytest.approx(1.0, rel=1e-9)


def test_fit_degenerate_zero_series():
    fit = fit_decay(np.linspace(0, 1, 10), np.zeros(10))
    assert fit.degenerate
    assert fit.summable
    assert fit.summability_integral == 0.0


def test_fit_requires_enough_positive_points():
    t = np.linspace(0, 1, 10)
    vals = -np.ones(10)
    vals[1] = 1.0
    with pytest.raises(EstimatorError):
        fit_decay(t, vals)


def test_non_summable_power():
    t = np.linspace(1.0, 50.0, 50)
    fit = fit_decay(t, t ** -0.5)
    assert fit.model == "power"
    assert not fit.summable
    assert fit.summability_integral == np.inf


def test_stochastic_stability_flags():
    det = fit_decay(np.linspace(0, 2, 21), 1.0 * np.exp(-2.0 * np.linspace(0, 2, 21)))
    noisy_ok = fit_decay(np.linspace(0, 2, 21), 0.5 * np.exp(-3.0 * np.linspace(0, 2, 21)))
    noisy_bad = fit_decay(np.linspace(0, 2, 21), 2.0 * np.exp(-0.5 * np.linspace(0, 2, 21)))
    lags = np.linspace(0, 2, 9)
    assert not np.any(stochastic_stability_flags(det, noisy_ok, lags))
    assert np.any(stochastic_stability_flags(det, noisy_bad, lags))


# ---------------------------------------------------------------------------
# delta-shift exponent
# ---------------------------------------------------------------------------

def test_delta_shift_exact_half_for_zero_drift():
    sys = trig_torus_system(delta=0.0, name="flat")   # g = 0
    seeds = [SeedSpec(77, s) for s in range(4)]
    fit = delta_shift_exponent(sys, [0.0], [0.2], T=1.0,
                               deltas=np.logspace(-6, -2, 5), seeds=seeds)
    assert fit.slope == pytest.approx(0.5, abs=1e-10)


def test_delta_shift_preconditions(heat):
    seeds = [SeedSpec(1, 0)]
    with pytest.raises(EstimatorError, match="positive"):
        delta_shift_exponent(heat, [0.0], [0.0], 1.0, [0.0, 1e-3, 1e-2], seeds)
    with pytest.raises(EstimatorError, match="decades"):
        delta_shift_exponent(heat, [0.0], [0.0], 1.0, [1e-3, 2e-3, 4e-3], seeds)
    with pytest.raises(EstimatorError, match="master"):
        delta_shift_exponent(heat, [0.0], [0.0], 1.0, np.logspace(-5, -2, 4),
                             [SeedSpec(1, 0), SeedSpec(2, 0)])


def test_delta_shift_lorenz_quick(lorenz):
    seeds = [SeedSpec(31337, s) for s in range(4)]
    fit = delta_shift_exponent(lorenz, [0.0], lorenz.reference_eta, T=1.0,
                               deltas=np.logspace(-6, -2, 5), seeds=seeds,
                               dt=2e-4)
    assert 0.35 <= fit.slope <= 0.65


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def test_density_heat_uniform(heat, seed):
    traj = _heat_base(heat, seed, T=1000.0, dt=1e-2)
    hist = estimate_density(traj, bins=64, burn_in=1.0)
    assert hist.masses.sum() == pytest.approx(1.0)
    per_bin = hist.count / 64
    band = 4.0 / np.sqrt(per_bin)
    assert np.max(np.abs(hist.masses - 1.0 / 64)) <= band / 64


def test_density_single_point():
    traj = Trajectory(np.array([0.0]), np.zeros((1, 1)), np.array([[0.31]]),
                      SeedSpec(1), 1.0, {"fast_space": "torus_unit"})
    hist = estimate_density(traj, bins=8)
    assert hist.masses.max() == 1.0
    assert np.count_nonzero(hist.masses) == 1


def test_density_l1_distance_shrinks(heat):
    def l1(T, master):
        traj = integrate_frozen_fast(heat, [0.0], [0.0], 1.0, T, 1e-2,
                                     SeedSpec(master))
        hist = estimate_density(traj, bins=32)
        return np.sum(np.abs(hist.masses - 1.0 / 32))

    # average over a few seeds to tame the Monte-Carlo noise in the ratio
    r1 = np.mean([l1(500.0, 100 + s) for s in range(4)])
    r2 = np.mean([l1(2000.0, 200 + s) for s in range(4)])
    assert 1.2 <= r1 / r2 <= 3.0


def test_density_requires_bounds_when_unbounded(lorenz, seed):
    traj = integrate_frozen_fast(lorenz, [0.0], lorenz.reference_eta, 0.0,
                                 T=1.0, dt=1e-3, seed=seed)
    with pytest.raises(EstimatorError, match="bounds"):
        estimate_density(traj, bins=8)
    hist = estimate_density(traj, bins=8, bounds=[(-30, 30), (-30, 30), (0, 60)])
    assert hist.masses.sum() == pytest.approx(1.0)


def test_density_empty_after_burn_in(heat, seed):
    traj = _heat_base(heat, seed, T=1.0)
    with pytest.raises(EstimatorError, match="empty"):
        estimate_density(traj, bins=8, burn_in=5.0)


def test_correlation_export(tmp_path, heat, seed):
    base = _heat_base(heat, seed, T=50.0)
    series = estimate_correlation(_sin_obs, _sin_obs, base,
                                  np.linspace(0, 1.0, 11))
    from fastslow.ergodic import correlation_to_csv, decay_fit_to_json
    correlation_to_csv(series, tmp_path / "corr.csv")
    lines = (tmp_path / "corr.csv").read_text().splitlines()
    assert lines[0] == "lag,value,stderr"
    assert len(lines) == 12

    fit = fit_decay(np.linspace(0, 2, 21), 3.0 * np.exp(-2.0 * np.linspace(0, 2, 21)))
    decay_fit_to_json(fit, tmp_path / "fit.json")
    import json
    payload = json.loads((tmp_path / "fit.json").read_text())
    assert payload["model"] == "exponential"
    assert payload["rate"] == pytest.approx(2.0)
