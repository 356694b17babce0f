"""Named studies producing the case-study figures and coefficient tables.

Each study writes hash-stable CSV artifacts into an output directory and
returns a summary dict; the CLI wraps these with a manifest.  The Lorenz
study uses delta = 0 for all convergence runs (sample paths may add
order-one noise for illustration) and draws initial fast states from the
attractor, matching how the reference averages were produced.
"""

import json
from pathlib import Path

import numpy as np

from .ergodic import EstimatorError, decay_fit_to_json, fit_decay
from .homogenize import (EstimatorParams, coefficients_from_cell,
                         green_kubo_diffusion, solve_cell_problem_1d,
                         tabulate_model)
from .integrate import RunTask, SeedSpec, integrate_fast_slow, run_ensemble
from .io import write_csv
from .limit_sde import (HomogenizedSDE, OUAnalytic, compare_distributions,
                        gaussian_bumps, ou_moments, semigroup_convergence)
from .systems import heat_torus_system, lorenz_system

LORENZ_SIGMA2 = 0.126


def _normal_pdf(x, mean, var):
    return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2.0 * np.pi * var)


def lorenz_study(out_dir, seed: SeedSpec, N: int = 1000, epsilons=(0.8, 0.2),
                 T: float = 10.0, t_spacing: float = 0.05,
                 fast_step: float = 1e-3, sample_path_deltas=(0.0, 0.5),
                 sigma2: float = LORENZ_SIGMA2, bins: int = 40,
                 ks_times=(2.5, 5.0, 10.0), n_jobs: int = 1) -> dict:
    """Sample paths, ensemble means, terminal histograms, and KS table.

    Convergence runs integrate X^{eps, 0} (no noise); the reference law at
    time t is the OU marginal N(e^{-t} xi, sigma^2/2 (1 - e^{-2t})) with
    xi = 0 and the reference value of sigma^2.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    ou = OUAnalytic(sigma2=sigma2, xi=0.0)

    # -- single sample paths over (epsilon, delta)
    path_cols, col_names = [], []
    times_ref = None
    for k, eps in enumerate(epsilons):
        for delta in sample_path_deltas:
            sys = lorenz_system(epsilon=eps, delta=delta)
            dt = eps ** 2 * fast_step
            stride = int(round(t_spacing / dt))
            dt = t_spacing / stride
            traj = integrate_fast_slow(
                sys, [0.0], sys.reference_eta, T, dt,
                seed.child(900 + k * 10), noise_at_order_one=True,
                record_stride=stride)
            times_ref = traj.times
            path_cols.append(traj.x_path[:, 0])
            col_names.append(f"x_eps{eps:g}_delta{delta:g}")
    write_csv(out / "samplepaths.csv", ["t"] + col_names,
              ([t] + [c[i] for c in path_cols] for i, t in enumerate(times_ref)))
    files.append("samplepaths.csv")

    # -- convergence ensembles, one per epsilon (delta = 0)
    mean_rows, conv_rows = [], []
    hist_rows = []
    ks_by_eps = {}
    band_ok = {}
    terminal = {}
    for k, eps in enumerate(epsilons):
        sys = lorenz_system(epsilon=eps, delta=0.0)
        dt = eps ** 2 * fast_step
        stride = int(round(t_spacing / dt))
        dt = t_spacing / stride
        task = RunTask(system=sys, xi=np.zeros(1), T=T, dt=dt,
                       sampling="attractor", record_stride=stride)
        ens = run_ensemble(task, N, seed.child(k * (1 << 16)), n_jobs=n_jobs)
        mean = ens.x_mean()[:, 0]
        se = ens.x_stderr()[:, 0]
        theory = np.zeros_like(ens.times)
        for i, t in enumerate(ens.times):
            mean_rows.append([eps, t, mean[i], se[i], theory[i]])
        band_ok[eps] = bool(np.all(np.abs(mean[1:]) <= 3.0 * se[1:]))

        for t_ks in ks_times:
            i = int(round(t_ks / t_spacing))
            m_t, v_t = ou_moments(ou, ens.times[i])
            rep = compare_distributions(ens.x_paths[:, i, 0], (m_t, v_t),
                                        t=ens.times[i])
            conv_rows.append([eps, ens.times[i], rep.ks, rep.mean_error,
                              rep.variance_error, N])
            if np.isclose(t_ks, T):
                ks_by_eps[eps] = rep.ks
        terminal[eps] = ens.x_paths[:, -1, 0]

        # -- terminal histogram with analytic overlay
        m_T, v_T = ou_moments(ou, T)
        sd = np.sqrt(v_T)
        lo, hi = -4.0 * sd, 4.0 * sd
        counts, edges = np.histogram(terminal[eps], bins=bins, range=(lo, hi))
        masses = counts / counts.sum()
        centers = 0.5 * (edges[:-1] + edges[1:])
        pdf = _normal_pdf(centers, m_T, v_T)
        for j in range(bins):
            hist_rows.append([eps, edges[j], edges[j + 1], masses[j], pdf[j]])

    write_csv(out / "ensemble_mean.csv",
              ["epsilon", "t", "mean", "stderr", "theory"], mean_rows)
    files.append("ensemble_mean.csv")
    write_csv(out / "convergence.csv",
              ["epsilon", "t", "ks", "mean_error", "variance_error", "n"],
              conv_rows)
    files.append("convergence.csv")
    write_csv(out / "histogram_t10.csv",
              ["epsilon", "bin_left", "bin_right", "mass", "analytic_pdf"],
              hist_rows)
    files.append("histogram_t10.csv")

    m_T, v_T = ou_moments(ou, T)
    grid = np.linspace(-8.0 * np.sqrt(v_T), 8.0 * np.sqrt(v_T), 4001)
    write_csv(out / "histogram_t10_overlay.csv", ["x", "pdf"],
              ([x, p] for x, p in zip(grid, _normal_pdf(grid, m_T, v_T))))
    files.append("histogram_t10_overlay.csv")

    return {"files": files, "ks": ks_by_eps, "mean_band_ok": band_ok,
            "terminal": terminal, "sigma2": sigma2}


def lorenz_coefficient_run(seed: SeedSpec, T: float = 1e4, dt: float = 2e-4,
                           t_max: float = 5.0, lag_spacing: float = 0.01,
                           record_stride: int = 10):
    """Green-Kubo estimate of the Lorenz study's sigma^2 at x = 0."""
    sys = lorenz_system(epsilon=1.0, delta=0.0)
    params = EstimatorParams(
        T_birkhoff=T, t_max=t_max, n_lags=int(round(t_max / lag_spacing)) + 1,
        noise_replicas=1, dt=dt, seed=seed, burn_in=10.0,
        record_stride=record_stride)
    return green_kubo_diffusion(sys, [0.0], 0.0, params)


def heat_study(out_dir, seed: SeedSpec, delta: float = 1.0,
               x_grid=(-2.0, -1.0, 0.0, 1.0, 2.0),
               T_birkhoff: float = 500.0, dt: float = 1e-3,
               t_max: float = 0.8, n_lags: int = 81, noise_replicas: int = 16,
               n_origins: int = 4000, cell_grid: int = 2048) -> dict:
    """Coefficient table for the pure-noise torus fixture with the cell oracle.

    Emits one row per grid point with both the Green-Kubo and cell-problem
    values; the analytic answers are F = -x and A0 = 1/(2 pi^2 delta).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sys = heat_torus_system(delta)
    params = EstimatorParams(T_birkhoff=T_birkhoff, t_max=t_max, n_lags=n_lags,
                             noise_replicas=noise_replicas, dt=dt, seed=seed,
                             burn_in=1.0, n_origins=n_origins)
    coeffs = tabulate_model(sys, np.asarray(x_grid, dtype=float).reshape(-1, 1),
                            delta, params)

    rows = []
    cell_F, cell_A0 = [], []
    corr_files = []
    for i, x in enumerate(coeffs.x_grid[:, 0]):
        cell = solve_cell_problem_1d(sys, x, delta, cell_grid)
        Fc, A0c = coefficients_from_cell(sys, x, cell)
        cell_F.append(Fc)
        cell_A0.append(A0c)
        diag = coeffs.diagnostics[i].get("diffusion", {})
        rows.append([x, coeffs.F_values[i, 0], coeffs.F_stderr[i, 0],
                     coeffs.A0_values[i, 0, 0], coeffs.A_values[i, 0, 0],
                     Fc, A0c, int(diag.get("non_summable", False))])
        if "lag_times" in diag:
            lags = diag["lag_times"]
            vals = diag["correlation"][:, 0, 0]
            errs = diag["correlation_stderr"][:, 0, 0]
            tag = f"x{i}"
            write_csv(out / f"correlation_{tag}.csv", ["lag", "value", "stderr"],
                      zip(lags, vals, errs))
            corr_files.append(f"correlation_{tag}.csv")
            try:
                decay_fit_to_json(fit_decay(lags, vals, stderr=errs),
                                  out / f"decay_fit_{tag}.json")
                corr_files.append(f"decay_fit_{tag}.json")
            except EstimatorError:
                pass
    write_csv(out / "coefficients.csv",
              ["x", "F", "F_stderr", "A0", "A", "F_cell", "A0_cell",
               "tail_flag"], rows)

    summary = {
        "delta": delta,
        "analytic_A0": 1.0 / (2.0 * np.pi ** 2 * delta),
        "x_grid": list(map(float, coeffs.x_grid[:, 0])),
        "A0": [float(v) for v in coeffs.A0_values[:, 0, 0]],
        "A0_cell": list(map(float, cell_A0)),
        "F": [float(v) for v in coeffs.F_values[:, 0]],
        "F_cell": list(map(float, cell_F)),
        "ok": [bool(v) for v in coeffs.ok],
    }
    with open(out / "heat_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return {"files": ["coefficients.csv", "heat_summary.json"] + corr_files,
            "coeffs": coeffs, "summary": summary}


def convergence_study(out_dir, seed: SeedSpec, fixture: str = "heat_torus",
                      epsilons=(0.8, 0.4, 0.2), t_grid=None, N: int = 256,
                      centers=(0.0, 1.0), sigma2: float = None,
                      fast_step: float = 1e-3) -> dict:
    """Semigroup-convergence error table for a built-in fixture."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if t_grid is None:
        t_grid = np.linspace(0.0, 2.0, 9)
    if fixture == "heat_torus":
        system = heat_torus_system(delta=1.0)
        # the estimated diffusion feeds the limit model; the drift -x is exact
        # for this fixture (a is independent of the fast state)
        params = EstimatorParams(T_birkhoff=300.0, t_max=0.8, n_lags=81,
                                 noise_replicas=16, dt=1e-3, seed=seed.child(7),
                                 n_origins=2000)
        gk = green_kubo_diffusion(system, [0.0], 1.0, params)
        model = HomogenizedSDE(lambda x: -x,
                               lambda x: np.broadcast_to(
                                   gk.A, x.shape[:-1] + (1, 1)), 1)
    elif fixture == "lorenz":
        system = lorenz_system(epsilon=1.0, delta=0.0)
        s2 = sigma2 if sigma2 is not None else LORENZ_SIGMA2
        model = HomogenizedSDE.ornstein_uhlenbeck(s2)
    else:
        raise ValueError(f"unknown convergence fixture {fixture!r}")

    table = semigroup_convergence(system, model, gaussian_bumps(centers),
                                  epsilons, t_grid, N, seed,
                                  fast_step=fast_step)
    write_csv(out / "convergence_table.csv",
              ["epsilon", "t", "observable", "error", "stderr"], table.rows())
    return {"files": ["convergence_table.csv"], "table": table}
