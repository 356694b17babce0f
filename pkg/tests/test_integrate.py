import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastslow import _kernels
from fastslow._kernels import fields as kfields
from fastslow._kernels import noise, pure
from fastslow.integrate import (
    IntegrationError, RunTask, SeedSpec, integrate_fast_slow,
    integrate_frozen_fast, integrate_variational, run_ensemble,
    sample_fast_states,
)
from fastslow.io import trajectory_from_binary, trajectory_to_binary, trajectory_to_csv
from fastslow.systems import SKEW_PRODUCT, SystemSpec, make_system, trig_torus_system


def _ou_system(delta):
    return make_system(SystemSpec(
        d=1, m=1,
        a=lambda x, y: 0.0 * x,
        b=lambda x, y: 0.0 * x,
        g=lambda x, y: -y,
        epsilon=1.0, delta=delta, coupling_class=SKEW_PRODUCT,
        fast_space="unbounded", name="ou"))


# ---------------------------------------------------------------------------
# coupled integrator
# ---------------------------------------------------------------------------

def test_linear_ode_exact(linear, seed):
    traj = integrate_fast_slow(linear, [2.0], [0.0], T=1.0, dt=1e-3, seed=seed)
    exact = 2.0 * np.exp(-traj.times)
    assert np.max(np.abs(traj.x_path[:, 0] - exact)) <= 1e-6


def test_determinism_bit_identical(heat, seed):
    sys = heat.with_params(epsilon=0.5)
    a = integrate_fast_slow(sys, [1.0], [0.2], T=0.5, dt=1e-3, seed=seed)
    b = integrate_fast_slow(sys, [1.0], [0.2], T=0.5, dt=1e-3, seed=seed)
    assert np.array_equal(a.x_path, b.x_path)
    assert np.array_equal(a.y_path, b.y_path)


def test_fourth_order_self_convergence(seed):
    # deterministic heat dynamics: terminal difference shrinks ~16x per halving
    sys = trig_torus_system(epsilon=0.6, delta=0.0, aX=-1.0, bS=1.0, gS=0.4)
    vals = {}
    for dt in (8e-3, 4e-3, 2e-3):
        traj = integrate_fast_slow(sys, [1.5], [0.3], T=1.0, dt=dt, seed=seed)
        vals[dt] = (traj.x_path[-1, 0], traj.y_path[-1, 0])
    d1 = abs(vals[8e-3][0] - vals[4e-3][0]) + abs(vals[8e-3][1] - vals[4e-3][1])
    d2 = abs(vals[4e-3][0] - vals[2e-3][0]) + abs(vals[4e-3][1] - vals[2e-3][1])
    assert 8.0 <= d1 / d2 <= 32.0


def test_stability_guard(heat, seed):
    sys = heat.with_params(epsilon=0.1)
    with pytest.raises(IntegrationError, match="dt too large"):
        integrate_fast_slow(sys, [0.0], [0.0], T=1.0, dt=1e-2, seed=seed)


def test_blowup_reports_time(seed):
    sys = make_system(SystemSpec(
        d=1, m=1,
        a=lambda x, y: 0.0 * x,
        b=lambda x, y: 0.0 * x,
        g=lambda x, y: y * y,
        epsilon=1.0, delta=0.0, coupling_class=SKEW_PRODUCT,
        fast_space="unbounded", reference_eta=np.array([2.0])))
    with pytest.raises(FloatingPointError, match="non-finite state at t="):
        integrate_fast_slow(sys, [0.0], [2.0], T=5.0, dt=1e-3, seed=seed)


def test_trajectory_grid_uniform(linear, seed):
    traj = integrate_fast_slow(linear, [1.0], [0.0], T=1.0, dt=1e-3, seed=seed,
                               record_stride=10)
    assert len(traj) == 101
    assert traj.dt == pytest.approx(1e-2)
    gaps = np.diff(traj.times)
    assert np.all(gaps > 0) and np.allclose(gaps, traj.dt)


# ---------------------------------------------------------------------------
# frozen fast flow
# ---------------------------------------------------------------------------

def test_frozen_constant_drift(seed):
    sys = trig_torus_system(delta=0.0, g0=0.7)
    traj = integrate_frozen_fast(sys, [0.0], [0.1], delta=0.0, T=2.0, dt=1e-3,
                                 seed=seed)
    # unwrapped displacement: phi^t(y) = y + c t
    assert np.allclose(traj.y_path[:, 0], 0.1 + 0.7 * traj.times, atol=1e-12)


def test_frozen_brownian_variance(heat):
    # g = 0, delta = 1: displacement variance at t = 1 is 1 within 3 SE
    disp = []
    for s in range(256):
        traj = integrate_frozen_fast(heat, [0.0], [0.0], delta=1.0, T=1.0,
                                     dt=1e-2, seed=SeedSpec(99, s),
                                     record_stride=100)
        disp.append(traj.y_path[-1, 0])
    disp = np.asarray(disp)
    var = disp.var(ddof=1)
    se = var * np.sqrt(2.0 / 255.0)
    assert abs(var - 1.0) <= 3.0 * se


def test_frozen_lorenz_step_halving(lorenz, seed):
    ref = integrate_frozen_fast(lorenz, [0.0], lorenz.reference_eta, 0.0,
                                T=1.0, dt=5e-5, seed=seed, record_stride=20000)
    coarse = integrate_frozen_fast(lorenz, [0.0], lorenz.reference_eta, 0.0,
                                   T=1.0, dt=1e-4, seed=seed, record_stride=10000)
    assert np.max(np.abs(ref.y_path[-1] - coarse.y_path[-1])) <= 1e-4


def test_scale_consistency(seed):
    # t -> t/eps^2 rescaling of the frozen system reproduces the coupled fast path
    eps = 0.5
    sys = trig_torus_system(epsilon=eps, delta=0.0, gS=1.0)
    full = integrate_fast_slow(sys, [0.0], [0.2], T=0.02, dt=1e-4, seed=seed)
    frozen = integrate_frozen_fast(sys, [0.0], [0.2], 0.0, T=0.02 / eps ** 2,
                                   dt=1e-4 / eps ** 2, seed=seed)
    assert np.max(np.abs(full.y_path - frozen.y_path)) < 1e-12


# ---------------------------------------------------------------------------
# Euler-Maruyama weak order on the OU fast equation
# ---------------------------------------------------------------------------

def test_weak_order_ou():
    # For linear drift with additive noise the ensemble mean of the EM path
    # equals the zero-noise EM path exactly, so the scheme's weak error in the
    # mean can be read off deterministically.
    sys = _ou_system(delta=1.0)
    y0, T = 2.0, 1.0
    errs = []
    dts = [1e-2, 5e-3, 2.5e-3]
    for dt in dts:
        traj = integrate_frozen_fast(sys, [0.0], [y0], 0.0, T, dt,
                                     SeedSpec(1), em_drift=True,
                                     record_stride=int(round(T / dt)))
        errs.append(abs(traj.y_path[-1, 0] - y0 * np.exp(-T)))
    order = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert order >= 0.8

    # and the stochastic sample mean is consistent with the scheme mean
    dt = 1e-2
    mean_path = integrate_frozen_fast(sys, [0.0], [y0], 0.0, T, dt, SeedSpec(1),
                                      em_drift=True).y_path[-1, 0]
    terminal = [integrate_frozen_fast(sys, [0.0], [y0], 1.0, T, dt,
                                      SeedSpec(5, s)).y_path[-1, 0]
                for s in range(512)]
    terminal = np.asarray(terminal)
    se = terminal.std(ddof=1) / np.sqrt(len(terminal))
    assert abs(terminal.mean() - mean_path) <= 3 * se


# ---------------------------------------------------------------------------
# variational flow
# ---------------------------------------------------------------------------

def test_variational_constant_source(seed):
    # g(x, y) = x: grad_x g = 1, grad_y g = 0, so J_x(t) = t
    sys = make_system(SystemSpec(
        d=1, m=1,
        a=lambda x, y: 0.0 * x, b=lambda x, y: 0.0 * x,
        g=lambda x, y: x + 0.0 * y,
        g_jac_x=lambda x, y: np.ones(np.asarray(y).shape + (1,)),
        g_jac_y=lambda x, y: np.zeros(np.asarray(y).shape + (1,)),
        epsilon=1.0, delta=0.0, coupling_class="general",
        fast_space="unbounded"))
    flow = integrate_variational(sys, [0.3], [0.0], 0.0, T=2.0, dt=1e-3, seed=seed)
    assert flow.jx_path[0] == pytest.approx(0.0)
    assert np.allclose(flow.jx_path[:, 0, 0], flow.times, atol=1e-9)
    assert np.allclose(flow.jy_path[0], np.eye(1))


def test_variational_zero_source_when_g_independent_of_x(heat, seed):
    flow = integrate_variational(heat, [0.7], [0.2], 1.0, T=1.0, dt=1e-3, seed=seed)
    assert np.max(np.abs(flow.jx_path)) == 0.0


def _generic_system():
    two_pi = 2 * np.pi

    def g(x, y):
        return 0.6 * np.sin(two_pi * y) + x * (0.3 + 0.2 * np.cos(two_pi * y))

    def g_jac_x(x, y):
        return (0.3 + 0.2 * np.cos(two_pi * y))[..., None]

    def g_jac_y(x, y):
        return (two_pi * (0.6 * np.cos(two_pi * y) - x * 0.2 * np.sin(two_pi * y)))[..., None]

    return make_system(SystemSpec(
        d=1, m=1,
        a=lambda x, y: 0.0 * x, b=lambda x, y: 0.0 * x,
        g=g, g_jac_x=g_jac_x, g_jac_y=g_jac_y,
        epsilon=1.0, delta=0.0, coupling_class="general", fast_space="torus_unit"))


def test_variational_matches_finite_difference(seed):
    sys = _generic_system()
    x0, y0, T, dt, h = 0.4, 0.15, 1.0, 1e-3, 1e-5
    flow = integrate_variational(sys, [x0], [y0], 0.0, T, dt, seed)
    up = integrate_frozen_fast(sys, [x0 + h], [y0], 0.0, T, dt, seed)
    dn = integrate_frozen_fast(sys, [x0 - h], [y0], 0.0, T, dt, seed)
    fd = (up.y_path[-1, 0] - dn.y_path[-1, 0]) / (2 * h)
    assert flow.jx_path[-1, 0, 0] == pytest.approx(fd, rel=1e-3)

    upy = integrate_frozen_fast(sys, [x0], [y0 + h], 0.0, T, dt, seed)
    dny = integrate_frozen_fast(sys, [x0], [y0 - h], 0.0, T, dt, seed)
    fdy = (upy.y_path[-1, 0] - dny.y_path[-1, 0]) / (2 * h)
    assert flow.jy_path[-1, 0, 0] == pytest.approx(fdy, rel=1e-3)


def test_variational_sequence_protocol(heat, seed):
    flow = integrate_variational(heat, [0.0], [0.1], 1.0, T=0.1, dt=1e-3, seed=seed)
    state = flow[0]
    assert state.t == 0.0
    assert np.all(state.J_x == 0.0)
    assert np.allclose(state.J_y, np.eye(1))
    assert len(flow) == 101


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def test_ensemble_single_member_matches_direct_call(linear, seed):
    task = RunTask(system=linear, xi=np.array([2.0]), T=1.0, dt=1e-3,
                   sampling="fixed", eta=np.array([0.0]))
    ens = run_ensemble(task, 1, seed)
    direct = integrate_fast_slow(linear, [2.0], [0.0], 1.0, 1e-3, seed)
    assert np.array_equal(ens.x_paths[0], direct.x_path)


def test_ensemble_distinct_streams(heat, seed):
    task = RunTask(system=heat, xi=np.array([0.0]), T=0.2, dt=1e-3,
                   sampling="fixed", keep_fast=True)
    ens = run_ensemble(task, 4, seed)
    for i in range(3):
        assert not np.array_equal(ens.y_paths[i], ens.y_paths[i + 1])


def test_ensemble_mean_linear_fixture(linear, seed):
    task = RunTask(system=linear, xi=np.array([2.0]), T=1.0, dt=1e-3,
                   sampling="attractor")
    ens = run_ensemble(task, 8, seed)
    exact = 2.0 * np.exp(-ens.times)
    # noise-free slow dynamics: every member equals the exact decay
    assert np.max(np.abs(ens.x_paths[:, :, 0] - exact)) <= 1e-6


def test_ensemble_threaded_matches_sequential(heat, seed):
    task = RunTask(system=heat, xi=np.array([0.5]), T=0.2, dt=1e-3,
                   sampling="fixed")
    a = run_ensemble(task, 6, seed, n_jobs=1)
    b = run_ensemble(task, 6, seed, n_jobs=3)
    assert np.array_equal(a.x_paths, b.x_paths)


def test_sample_fast_states_spread(lorenz, seed):
    etas = sample_fast_states(lorenz, 5, seed, burn_in=2.0, spread=0.5, dt=1e-3)
    assert etas.shape == (5, 3)
    assert len(np.unique(etas[:, 0])) == 5


def test_lorenz_attractor_confinement(lorenz, seed):
    traj = integrate_frozen_fast(lorenz, [0.0], lorenz.reference_eta, 0.0,
                                 T=100.0, dt=1e-3, seed=seed, record_stride=10)
    assert np.max(np.abs(traj.y_path)) <= 100.0


# ---------------------------------------------------------------------------
# seeding and export
# ---------------------------------------------------------------------------

@given(master=st.integers(min_value=0, max_value=2 ** 64 - 1),
       stream=st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=25, deadline=None)
def test_noise_stream_purity(master, stream):
    a = noise.normals(master, stream, 0, 64, 2)
    b = noise.normals(master, stream, 0, 64, 2)
    assert np.array_equal(a, b)
    # prefix stability across different requested lengths
    c = noise.normals(master, stream, 0, 16, 2)
    assert np.array_equal(a[:16], c)


def test_noise_chunk_boundary_consistency():
    n = noise.CHUNK + 50
    a = noise.normals(3, 1, 0, n, 1)
    tail = noise.normals(3, 1, noise.CHUNK, 50, 1)
    assert np.array_equal(a[noise.CHUNK:], tail)


def test_trajectory_export_roundtrip(tmp_path, linear, seed):
    traj = integrate_fast_slow(linear, [1.0], [0.3], T=0.1, dt=1e-3, seed=seed)
    csv_path = tmp_path / "traj.csv"
    trajectory_to_csv(traj, csv_path)
    header = csv_path.read_text().splitlines()[0]
    assert header == "t,x_1,y_1"

    bin_path = tmp_path / "traj.bin"
    trajectory_to_binary(traj, bin_path)
    back = trajectory_from_binary(bin_path)
    assert np.array_equal(back.x_path, traj.x_path)
    assert np.array_equal(back.y_path, traj.y_path)
    assert back.seed == traj.seed
    assert back.dt == traj.dt


# ---------------------------------------------------------------------------
# backend equivalence
# ---------------------------------------------------------------------------

@pytest.mark.skipif(_kernels.BACKEND != "compiled",
                    reason="compiled backend not built")
def test_backends_bit_identical():
    ft = kfields.trig_field(kfields.trig_params(aX=-1.0, bS=1.0, gS=0.3))
    rec = np.arange(0, 501, 1, dtype=np.int64)
    args = (ft, np.array([[1.0]]), np.array([[0.2]]), 0.5, 1.3, 500, 1e-3,
            rec, 11, 4)
    ax, ay = _kernels._compiled.coupled_batch(*args)
    bx, by = pure.coupled_batch(*args)
    assert np.array_equal(ax, bx) and np.array_equal(ay, by)

    fl = kfields.lorenz_field(kfields.lorenz_params())
    y0 = np.array([[13.93, 20.06, 26.87]])
    a = _kernels._compiled.frozen_batch(fl, [0.0], y0, 0.0, 2000, 1e-4, rec, 1, 0)
    b = pure.frozen_batch(fl, [0.0], y0, 0.0, 2000, 1e-4, rec, 1, 0)
    assert np.array_equal(a, b)

    sa = _kernels._compiled.shift_sup_batch(fl, [0.0], y0[0], [1e-3, 1e-2],
                                            5000, 1e-4, 7, [0, 1])
    sb = pure.shift_sup_batch(fl, [0.0], y0[0], [1e-3, 1e-2], 5000, 1e-4, 7, [0, 1])
    assert np.array_equal(sa, sb)
