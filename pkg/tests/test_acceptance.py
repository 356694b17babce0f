"""Acceptance suite: quantitative targets for the shipped estimators.

Every test prints one [PASS]/[FAIL] line (run with ``pytest -s``).  All runs
are seeded; statistical criteria are evaluated at the committed master seed
20240817.  Budgets assume the compiled kernel backend.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from fastslow import _kernels
from fastslow.cli import parse_config, run as cli_run
from fastslow.ergodic import delta_shift_exponent, estimate_correlation, fit_decay
from fastslow.homogenize import (EstimatorParams, coefficients_from_cell,
                                 drift_F0_coupled, drift_weakly_coupled,
                                 green_kubo_diffusion, solve_cell_problem_1d)
from fastslow.integrate import SeedSpec, integrate_frozen_fast
from fastslow.studies import lorenz_coefficient_run, lorenz_study
from fastslow.systems import heat_torus_system, lorenz_system, trig_torus_system

MASTER = 20240817
CONFIGS = Path(__file__).resolve().parent.parent / "configs"
A0_HEAT = 1.0 / (2.0 * np.pi ** 2)          # 0.050660...
F0_COUPLED = 1.0 / (4.0 * np.pi ** 2)       # 0.025330...
F0_WEAK = 1.0 / (2.0 * np.pi)               # 0.159155...
SIGMA2 = 0.126


def check(name: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def heat_gk():
    heat = heat_torus_system(1.0)
    params = EstimatorParams(T_birkhoff=2000.0, t_max=0.8, n_lags=81,
                             noise_replicas=32, dt=1e-3, seed=SeedSpec(MASTER),
                             burn_in=1.0, n_origins=8000)
    t0 = time.perf_counter()
    gk = green_kubo_diffusion(heat, [0.0], 1.0, params)
    return heat, gk, time.perf_counter() - t0


@pytest.fixture(scope="module")
def lorenz_gk():
    t0 = time.perf_counter()
    gk = lorenz_coefficient_run(SeedSpec(MASTER))
    return gk, time.perf_counter() - t0


@pytest.fixture(scope="module")
def lorenz_figures(tmp_path_factory):
    out = tmp_path_factory.mktemp("lorenz_study")
    t0 = time.perf_counter()
    res = lorenz_study(out, SeedSpec(MASTER), N=1000, epsilons=(0.8, 0.2))
    return res, time.perf_counter() - t0


def test_heat_fixture_diffusion(heat_gk):
    _, gk, elapsed = heat_gk
    a0 = gk.A0[0, 0]
    rel = abs(a0 - A0_HEAT) / A0_HEAT
    check("heat-fixture diffusion",
          rel <= 0.05 and elapsed <= 60.0,
          f"A0={a0:.6f} vs {A0_HEAT:.6f} ({100 * rel:.2f}% off), "
          f"runtime {elapsed:.1f}s <= 60s")


def test_oracle_equivalence(heat_gk):
    heat, gk, _ = heat_gk
    cell = solve_cell_problem_1d(heat, 0.0, 1.0, 2048)
    _, a0_cell = coefficients_from_cell(heat, 0.0, cell)
    se = gk.diagnostics["A0_stderr"][0, 0]
    gap = abs(gk.A0[0, 0] - a0_cell)
    tol = 0.02 * abs(a0_cell) + 3.0 * se
    exact = np.sin(2 * np.pi * cell.grid) / (2 * np.pi ** 2)
    sup_err = np.max(np.abs(cell.Phi - exact))
    check("oracle equivalence",
          gap <= tol and sup_err <= 1e-6,
          f"|GK - cell| = {gap:.2e} <= {tol:.2e}; Phi sup-error {sup_err:.2e} <= 1e-6")


def test_coupled_drift():
    sys = trig_torus_system(delta=1.0, aX=-1.0, bXS=1.0, name="coupled_drift")
    params = EstimatorParams(T_birkhoff=2000.0, t_max=0.8, n_lags=81,
                             noise_replicas=32, dt=1e-3, seed=SeedSpec(MASTER),
                             burn_in=1.0, n_origins=40000)
    res = drift_F0_coupled(sys, [1.0], 1.0, params)
    rel = abs(res.value[0] - F0_COUPLED) / F0_COUPLED
    check("coupled drift",
          rel <= 0.05,
          f"F0={res.value[0]:.6f} vs {F0_COUPLED:.6f} ({100 * rel:.2f}% off, "
          f"SE {res.stderr[0]:.1e})")


def test_weakly_coupled_drift():
    sys = trig_torus_system(delta=1.0, aX=-1.0, bS=1.0, hC=1.0, name="weak")
    params = EstimatorParams(T_birkhoff=2000.0, t_max=0.8, n_lags=81,
                             noise_replicas=32, dt=1e-3, seed=SeedSpec(MASTER),
                             burn_in=1.0, n_origins=60000)
    res = drift_weakly_coupled(sys, [0.5], 1.0, params)
    second = res.diagnostics["second_term"][0]
    rel = abs(second - F0_WEAK) / F0_WEAK
    check("weakly-coupled drift",
          rel <= 0.05,
          f"second term {second:.6f} vs {F0_WEAK:.6f} ({100 * rel:.2f}% off, "
          f"SE {res.stderr[0]:.1e})")


def test_lorenz_sigma2(lorenz_gk):
    gk, elapsed = lorenz_gk
    a0 = gk.A0[0, 0]
    rel = abs(a0 - SIGMA2) / SIGMA2
    check("Lorenz sigma^2",
          rel <= 0.15 and elapsed <= 600.0,
          f"A0={a0:.4f} vs {SIGMA2} ({100 * rel:.1f}% off), "
          f"runtime {elapsed:.0f}s <= 600s")


def test_lorenz_centering(lorenz_gk):
    gk, _ = lorenz_gk
    res = abs(gk.diagnostics["centering_residual"][0])
    se = gk.diagnostics["centering_stderr"][0]
    check("Lorenz centering",
          res <= 3.0 * se,
          f"|avg b| = {res:.2e} <= 3 x SE = {3 * se:.2e} at T=1e4")


def test_lorenz_convergence(lorenz_figures):
    res, elapsed = lorenz_figures
    band = res["mean_band_ok"][0.2]
    ks02, ks08 = res["ks"][0.2], res["ks"][0.8]
    check("Lorenz convergence",
          band and ks02 < ks08 and elapsed <= 900.0,
          f"eps=0.2 mean within 3-SE band of 0: {band}; "
          f"KS(0.2)={ks02:.4f} < KS(0.8)={ks08:.4f}; runtime {elapsed:.0f}s <= 900s")


def test_shift_exponent_lorenz():
    lor = lorenz_system(epsilon=1.0, delta=0.0)
    seeds = [SeedSpec(MASTER, s) for s in range(8)]
    fit = delta_shift_exponent(lor, [0.0], lor.reference_eta, T=1.0,
                               deltas=np.logspace(-6, -2, 9), seeds=seeds,
                               dt=1e-4)
    check("noise-shift exponent (Lorenz)",
          0.4 <= fit.slope <= 0.6,
          f"slope {fit.slope:.3f} in [0.4, 0.6]")


def test_shift_exponent_zero_drift_exact():
    sys = trig_torus_system(delta=0.0, name="flat")
    seeds = [SeedSpec(MASTER, s) for s in range(4)]
    fit = delta_shift_exponent(sys, [0.0], [0.3], T=1.0,
                               deltas=np.logspace(-6, -2, 9), seeds=seeds)
    check("noise-shift exponent (zero drift)",
          abs(fit.slope - 0.5) <= 1e-10,
          f"slope {fit.slope:.12f} = 0.5 within 1e-10")


def test_correlation_analytics():
    heat = heat_torus_system(1.0)
    base = integrate_frozen_fast(heat, [0.0], [0.0], 1.0, 1000.0, 1e-3,
                                 SeedSpec(MASTER))
    obs = lambda y: np.sin(2 * np.pi * y[..., 0])
    series = estimate_correlation(obs, obs, base, np.linspace(0, 0.5, 51),
                                  delta=1.0, noise_replicas=16, system=heat,
                                  n_origins=4096)
    fit = fit_decay(series)
    rate_rel = abs(fit.rate - 2 * np.pi ** 2) / (2 * np.pi ** 2)
    c0_rel = abs(series.values[0] - 0.5) / 0.5
    check("correlation analytics",
          fit.model == "exponential" and rate_rel <= 0.10 and c0_rel <= 0.05,
          f"model {fit.model}, rate {fit.rate:.2f} vs {2 * np.pi ** 2:.2f} "
          f"({100 * rate_rel:.1f}% off), C(0)={series.values[0]:.4f} "
          f"({100 * c0_rel:.1f}% off)")


def test_invariant_suite(heat_gk, tmp_path):
    heat, gk, _ = heat_gk

    # exact lag-0 covariance identity
    base = integrate_frozen_fast(heat, [0.0], [0.0], 1.0, 50.0, 1e-3,
                                 SeedSpec(MASTER, 5))
    obs = lambda y: np.sin(2 * np.pi * y[..., 0])
    series = estimate_correlation(obs, obs, base, np.linspace(0, 1.0, 11))
    n = series.meta["n_origins"]
    v = obs(base.y_path[:n])
    lag0_exact = series.values[0] == np.dot(v, v) / n - v.mean() * v.mean()

    # A A^T reconstruction and PSD after clipping
    sym = gk.diagnostics["sym_psd"]
    recon = np.max(np.abs(gk.A @ gk.A.T - sym)) <= 1e-10
    psd = np.min(np.linalg.eigvalsh(sym)) >= 0.0

    # CLI artifacts are reproducible byte for byte
    cfgs = parse_config(CONFIGS / "lorenz_study.toml",
                        ["study.N=32", "study.T=2.0", "study.ks_times=[1.0, 2.0]"],
                        command="lorenz-study", out=str(tmp_path / "l1"))
    h1 = cli_run(cfgs)[1]["files"]
    cfgs = parse_config(CONFIGS / "lorenz_study.toml",
                        ["study.N=32", "study.T=2.0", "study.ks_times=[1.0, 2.0]"],
                        command="lorenz-study", out=str(tmp_path / "l2"))
    h2 = cli_run(cfgs)[1]["files"]
    cfgh = parse_config(CONFIGS / "heat_study.toml",
                        ["estimator.T_birkhoff=60.0", "estimator.n_origins=400",
                         "study.x_grid=[0.0]", "study.cell_grid=512"],
                        command="heat-study", out=str(tmp_path / "h1"))
    g1 = cli_run(cfgh)[1]["files"]
    cfgh = parse_config(CONFIGS / "heat_study.toml",
                        ["estimator.T_birkhoff=60.0", "estimator.n_origins=400",
                         "study.x_grid=[0.0]", "study.cell_grid=512"],
                        command="heat-study", out=str(tmp_path / "h2"))
    g2 = cli_run(cfgh)[1]["files"]
    hashes_equal = (h1 == h2) and (g1 == g2) and len(h1) >= 5 and len(g1) >= 2

    check("invariant suite",
          bool(lag0_exact and recon and psd and hashes_equal),
          f"lag-0 exact: {lag0_exact}; A A^T reconstruction <= 1e-10: {recon}; "
          f"PSD after clipping: {psd}; double-run hash equality: {hashes_equal} "
          f"(backend: {_kernels.BACKEND})")
