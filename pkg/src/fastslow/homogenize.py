"""Drift and diffusion coefficients of the homogenized limiting SDE.

Two independent routes are provided:

* Ergodic (Green-Kubo) estimators: time averages along the frozen fast flow,
  with nested noise-replica expectations when the flow is stochastically
  regularized.  The diffusion is ``A0 = 2 * integral_0^tmax C(t) dt`` for the
  coupling autocovariance ``C``; drift corrections integrate covariances of
  ``grad b`` terms against tangent flows.
* A one-dimensional cell-problem solver (finite differences, periodic): the
  oracle counterpart producing the same coefficients by quadrature against
  the stationary density.

Every time integral is truncated at ``t_max``; a decay-model fit supplies a
tail estimate which is reported in the diagnostics, never added to the value.
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from . import _kernels as kernels
from .ergodic import (EstimatorError, N_BATCHES, DecayFit, _corr_along_path,
                      _series, centering_from_trajectory, fit_decay)
from .integrate import SeedSpec, Trajectory
from .systems import TORUS, WEAKLY_COUPLED, FastSlowSystem


class EstimatorWarning(UserWarning):
    pass


# stream blocks reserved per estimator call (base path, replica fan-out)
_STREAM_BLOCK = 1 << 22


@dataclass(frozen=True)
class EstimatorParams:
    """Tuning knobs shared by the coefficient estimators.

    ``t_max`` truncates the Green-Kubo integrals and must not exceed a tenth
    of the averaging window.  ``n_origins`` bounds the number of restart
    origins for nested expectations; tangent-flow restarts additionally
    stride by ``variational_stride``.
    """

    T_birkhoff: float = 500.0
    t_max: float = 1.0
    n_lags: int = 101
    noise_replicas: int = 16
    dt: float = 1e-3
    seed: SeedSpec = SeedSpec(0)
    burn_in: float = 1.0
    n_origins: int = 4096
    variational_stride: int = 10
    record_stride: int = 1
    lag_grid: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("T_birkhoff", "t_max", "dt", "burn_in"):
            if getattr(self, name) < 0 or (name != "burn_in" and getattr(self, name) <= 0):
                raise EstimatorError(f"{name} must be positive")
        if self.t_max > self.T_birkhoff / 10.0 + 1e-12:
            raise EstimatorError("t_max must be at most T_birkhoff / 10")
        if self.noise_replicas < 1:
            raise EstimatorError("noise_replicas must be at least 1")

    def lags(self) -> np.ndarray:
        if self.lag_grid is not None:
            return np.asarray(self.lag_grid, dtype=float)
        return np.linspace(0.0, self.t_max, self.n_lags)


def _frozen_base(system: FastSlowSystem, x, delta: float,
                 params: EstimatorParams) -> Trajectory:
    """Frozen-flow base trajectory with the burn-in discarded."""
    x = np.asarray(x, dtype=float).reshape(system.d)
    dt = params.dt
    n_burn = int(round(params.burn_in / dt))
    n_total = n_burn + int(round(params.T_birkhoff / dt))
    rec = np.arange(n_burn, n_total + 1, params.record_stride, dtype=np.int64)
    y_rec = kernels.frozen_batch(system.field, x, system.reference_eta.reshape(1, -1),
                                 np.sqrt(delta), n_total, dt, rec,
                                 params.seed.master, params.seed.stream, False)
    times = (rec - rec[0]) * dt
    meta = {"system": system.system_hash(), "dt_integration": dt,
            "record_stride": params.record_stride, "frozen_x": x.copy(),
            "delta": delta, "fast_space": system.fast_space,
            "burn_in_dropped": params.burn_in}
    x_path = np.broadcast_to(x, (len(rec), system.d))
    return Trajectory(times, x_path, y_rec[0], params.seed,
                      dt * params.record_stride, meta)


def _check_centering(system, x, base, diagnostics):
    cent = centering_from_trajectory(system, x, base)
    res, se = np.abs(cent.residual), np.maximum(cent.stderr, 1e-300)
    diagnostics["centering_residual"] = cent.residual
    diagnostics["centering_stderr"] = cent.stderr
    diagnostics["centering_warning"] = bool(np.any(res > 3.0 * se))
    if np.any(res > 10.0 * se):
        raise EstimatorError(
            f"centering condition violated: |residual| {res} exceeds 10 x SE {se}")
    if diagnostics["centering_warning"]:
        warnings.warn("centering residual above 3 x SE; coefficients may be biased",
                      EstimatorWarning, stacklevel=3)


def _snap(lags, dt):
    idx = np.unique(np.rint(np.asarray(lags, dtype=float) / dt).astype(np.int64))
    if idx[0] != 0:
        idx = np.concatenate([[0], idx])
    return idx


def _origins(base: Trajectory, n_wanted: int):
    S = len(base)
    stride = max(1, S // n_wanted)
    steps = np.arange(0, S, stride)[:n_wanted]
    return steps


def _batch_reduce(batch_integrals):
    nb = batch_integrals.shape[0]
    if nb < 2:
        return np.zeros_like(batch_integrals[0])
    return batch_integrals.std(axis=0, ddof=1) / np.sqrt(nb)


# ---------------------------------------------------------------------------
# Green-Kubo diffusion
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class GreenKuboResult:
    A0: np.ndarray
    A: np.ndarray
    diagnostics: dict


def _coupling_series(system, x, Y):
    return np.atleast_2d(_series(lambda YY: system.b(x[None, :], YY), Y).T).T \
        if False else _vector_series(system.b, x, Y)


def _vector_series(vf, x, Y):
    out = np.asarray(vf(x[None, :], Y), dtype=float)
    if out.ndim == 1:
        out = out[:, None]
    return out


def _gk_correlation(system, x, base, delta, params):
    """Coupling autocovariance C_jk(t) with per-batch values.

    Returns (lag_times, C (L,d,d), batches (nb,L,d,d), n_origins).
    """
    d = system.d
    if delta == 0.0:
        lag_idx = _snap(params.lags(), base.dt)
        B = _vector_series(system.b, x, base.y_path)
        L = len(lag_idx)
        C = np.empty((L, d, d))
        batches = None
        for j in range(d):
            for k in range(d):
                vals, _, n_used, bm = _corr_along_path(B[:, j], B[:, k], lag_idx)
                C[:, j, k] = vals
                if batches is None:
                    batches = np.empty((bm.shape[0], L, d, d))
                batches[:, :, j, k] = bm
        return lag_idx * base.dt, C, batches, n_used

    dt = base.meta["dt_integration"]
    lag_idx = _snap(params.lags(), dt)
    R = params.noise_replicas
    steps = _origins(base, params.n_origins)
    Z = base.y_path[steps]
    n = len(steps)
    Y0 = np.repeat(Z, R, axis=0)
    seed = params.seed.child(1)
    y_rec = kernels.frozen_batch(system.field, x, Y0, np.sqrt(delta),
                                 int(lag_idx.max()), dt, lag_idx,
                                 seed.master, seed.stream, False)
    L = len(lag_idx)
    B_rep = _vector_series(system.b, x, y_rec.reshape(-1, system.m))
    B_hat = B_rep.reshape(n, R, L, d).mean(axis=1)
    V = _vector_series(system.b, x, Z)
    vbar = V.mean(axis=0)
    wbar = B_hat.mean(axis=0)                       # per-lag mean, (L, d)
    prods = np.einsum("nj,nlk->nljk", V, B_hat)
    mean_prod = np.einsum("j,lk->ljk", vbar, wbar)
    C = prods.mean(axis=0) - mean_prod
    nb = min(N_BATCHES, n)
    size = n // nb
    batches = (prods[:nb * size].reshape(nb, size, L, d, d).mean(axis=1)
               - mean_prod)
    return lag_idx * dt, C, batches, n


def _psd_sqrt(A0, diagnostics):
    S = 0.5 * (A0 + A0.T)
    eigvals, eigvecs = np.linalg.eigh(S)
    scale = max(np.max(np.abs(eigvals)), 1.0)
    diagnostics["min_eigenvalue"] = float(eigvals.min())
    diagnostics["psd_violation"] = bool(eigvals.min() < -1e-8 * scale)
    lam = np.clip(eigvals, 0.0, None)
    A = (eigvecs * np.sqrt(lam)) @ eigvecs.T
    diagnostics["sym_psd"] = (eigvecs * lam) @ eigvecs.T
    return A


def green_kubo_diffusion(system: FastSlowSystem, x, delta: float,
                         params: EstimatorParams,
                         base: Optional[Trajectory] = None) -> GreenKuboResult:
    """Diffusion matrix A0 = 2 * integral of the coupling autocovariance.

    The symmetrized matrix (A0 + A0^T)/2 is eigendecomposed with negative
    eigenvalues clipped at zero; A is its symmetric PSD square root.  The
    fitted-decay tail beyond t_max lands in the diagnostics.
    """
    x = np.asarray(x, dtype=float).reshape(system.d)
    diagnostics = {"backend": kernels.BACKEND, "delta": delta, "x": x.copy()}
    if base is None:
        base = _frozen_base(system, x, delta, params)
    _check_centering(system, x, base, diagnostics)

    lag_times, C, batches, n_used = _gk_correlation(system, x, base, delta, params)
    diagnostics["n_origins"] = n_used
    diagnostics["lag_times"] = lag_times
    diagnostics["correlation"] = C
    diagnostics["correlation_stderr"] = _batch_reduce(batches)

    A0 = 2.0 * np.trapezoid(C, lag_times, axis=0)
    A0_batches = 2.0 * np.trapezoid(batches, lag_times, axis=1)
    diagnostics["A0_stderr"] = _batch_reduce(A0_batches)

    trace_series = np.trace(C, axis1=1, axis2=2) / system.d
    trace_se = _batch_reduce(np.trace(batches, axis1=2, axis2=3) / system.d)
    try:
        fit = fit_decay(lag_times, trace_series, stderr=trace_se)
    except EstimatorError:
        fit = None
    if fit is not None:
        diagnostics["decay_model"] = fit.model
        diagnostics["decay_rate"] = fit.rate
        diagnostics["decay_summable"] = fit.summable
        diagnostics["tail_estimate"] = (2.0 * system.d * fit.tail_integral(lag_times[-1])
                                        if fit.summable else np.inf)
        if not fit.summable:
            diagnostics["non_summable"] = True
            warnings.warn("fitted decay is not summable; reporting the value "
                          "truncated at t_max", EstimatorWarning, stacklevel=2)
    else:
        diagnostics["decay_model"] = None
        diagnostics["tail_estimate"] = np.nan

    A = _psd_sqrt(A0, diagnostics)
    return GreenKuboResult(A0, A, diagnostics)


# ---------------------------------------------------------------------------
# drift estimators
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DriftResult:
    value: np.ndarray
    stderr: np.ndarray
    diagnostics: dict


def drift_F1(system: FastSlowSystem, x, delta: float, params: EstimatorParams,
             base: Optional[Trajectory] = None):
    """Birkhoff average of the slow drift a(x, .) along the frozen flow."""
    x = np.asarray(x, dtype=float).reshape(system.d)
    if base is None:
        base = _frozen_base(system, x, delta, params)
    A_series = _vector_series(system.a, x, base.y_path)
    mean = A_series.mean(axis=0)
    nb = min(N_BATCHES, A_series.shape[0])
    size = A_series.shape[0] // nb
    bm = A_series[:nb * size].reshape(nb, size, -1).mean(axis=1)
    return mean, _batch_reduce(bm)


def _variational_restarts(system, x, base, delta, params, want_jy):
    """Tangent flows restarted from strided origins, replica-averaged.

    Returns (lag_times, Y (n,L,m), JX (n,L,m,d), JY (n,L,m,m) or None, Z).
    """
    dt = base.meta["dt_integration"]
    lag_idx = _snap(params.lags(), dt)
    n_wanted = max(2, params.n_origins // params.variational_stride)
    steps = _origins(base, n_wanted)
    Z = base.y_path[steps]
    n = len(steps)
    R = params.noise_replicas if delta > 0.0 else 1
    Y0 = np.repeat(Z, R, axis=0)
    seed = params.seed.child(1 + params.n_origins * params.noise_replicas)
    y_rec, jx_rec, jy_rec = kernels.variational_batch(
        system.field, x, Y0, np.sqrt(delta), int(lag_idx.max()), dt, lag_idx,
        seed.master, seed.stream, False, True, want_jy)
    L = len(lag_idx)
    m, d = system.m, system.d
    Y = y_rec.reshape(n, R, L, m)
    JX = jx_rec.reshape(n, R, L, m, d)
    JY = jy_rec.reshape(n, R, L, m, m) if want_jy else None
    return lag_idx * dt, Y, JX, JY, Z, R


def _jac_series(vf_jac, x, Y_flat, shape):
    out = np.asarray(vf_jac(x[None, :], Y_flat), dtype=float)
    # constant Jacobians may come back without the sample axis
    out = np.broadcast_to(out, (Y_flat.shape[0],) + tuple(shape[-2:]))
    return out.reshape(shape)


def _integrand_summability(lag_times, series, diagnostics, stderr=None):
    norm = np.linalg.norm(np.atleast_2d(series.T), axis=0)
    se = None if stderr is None else np.linalg.norm(np.atleast_2d(stderr.T), axis=0)
    try:
        fit = fit_decay(lag_times, norm, stderr=se)
        diagnostics["integrand_summable"] = fit.summable
        diagnostics["integrand_tail"] = (fit.tail_integral(lag_times[-1])
                                         if fit.summable else np.inf)
        if not fit.summable:
            warnings.warn("drift integrand decay is not summable; value "
                          "truncated at t_max", EstimatorWarning, stacklevel=3)
    except EstimatorError:
        diagnostics["integrand_summable"] = None
        diagnostics["integrand_tail"] = np.nan


def drift_F0_coupled(system: FastSlowSystem, x, delta: float,
                     params: EstimatorParams,
                     base: Optional[Trajectory] = None) -> DriftResult:
    """Drift correction for coupled systems.

    Integrates the covariance of ``grad_x b(phi^t) + grad_y b(phi^t) J_x(t)``
    against ``b`` over the truncation horizon, with J_x from tangent flows
    restarted at strided origins.
    """
    x = np.asarray(x, dtype=float).reshape(system.d)
    diagnostics = {"backend": kernels.BACKEND, "delta": delta,
                   "jacobian_source": ("analytic" if system.b.has_analytic_jacobians
                                       and system.g.has_analytic_jacobians
                                       else "finite_difference")}
    if base is None:
        base = _frozen_base(system, x, delta, params)
    lag_times, Y, JX, _, Z, R = _variational_restarts(system, x, base, delta,
                                                      params, want_jy=False)
    n, _, L, m = Y.shape
    d = system.d
    flat = Y.reshape(-1, m)
    bx = _jac_series(system.b.jacobian_x, x, flat, (n, R, L, d, d))
    by = _jac_series(system.b.jacobian_y, x, flat, (n, R, L, d, m))
    W = (bx + np.einsum("nrldm,nrlme->nrlde", by, JX)).mean(axis=1)  # (n,L,d,d)
    bZ = _vector_series(system.b, x, Z)

    prods = np.einsum("nlde,ne->nld", W, bZ)
    integrand = prods.mean(axis=0) - W.mean(axis=0) @ bZ.mean(axis=0)
    nb = min(N_BATCHES, n)
    size = n // nb
    bm = (prods[:nb * size].reshape(nb, size, L, d).mean(axis=1)
          - W[:nb * size].reshape(nb, size, L, d, d).mean(axis=1) @ bZ.mean(axis=0))
    value = np.trapezoid(integrand, lag_times, axis=0)
    stderr = _batch_reduce(np.trapezoid(bm, lag_times, axis=1))
    diagnostics["lag_times"] = lag_times
    diagnostics["integrand"] = integrand
    diagnostics["n_origins"] = n
    _integrand_summability(lag_times, integrand, diagnostics,
                           stderr=_batch_reduce(bm))
    return DriftResult(value, stderr, diagnostics)


def drift_weakly_coupled(system: FastSlowSystem, x, delta: float,
                         params: EstimatorParams,
                         base: Optional[Trajectory] = None) -> DriftResult:
    """Full drift for weakly-coupled systems.

    First term is the Birkhoff average of ``a``; the correction integrates
    covariances of ``grad_x b(phi^t)`` against ``b`` and, when an
    intermediate coupling ``h`` is present, of ``grad_y b(phi^t) J_y(t)``
    against ``h``.
    """
    if system.coupling_class != WEAKLY_COUPLED:
        raise EstimatorError("drift_weakly_coupled requires a weakly-coupled system")
    x = np.asarray(x, dtype=float).reshape(system.d)
    diagnostics = {"backend": kernels.BACKEND, "delta": delta,
                   "jacobian_source": ("analytic" if system.b.has_analytic_jacobians
                                       else "finite_difference")}
    if base is None:
        base = _frozen_base(system, x, delta, params)

    f1, f1_se = drift_F1(system, x, delta, params, base=base)
    has_h = system.h is not None

    if has_h:
        # required centering of grad_y b when h is present; 3 SE is a convention
        dyb = system.b.jacobian_y(x[None, :], base.y_path).reshape(len(base), -1)
        mean = dyb.mean(axis=0)
        nb = min(N_BATCHES, dyb.shape[0])
        size = dyb.shape[0] // nb
        se = _batch_reduce(dyb[:nb * size].reshape(nb, size, -1).mean(axis=1))
        flag = bool(np.any(np.abs(mean) > 3.0 * np.maximum(se, 1e-300)))
        diagnostics["dyb_centering_residual"] = mean
        diagnostics["dyb_centering_warning"] = flag
        if flag:
            warnings.warn("grad_y b centering residual above 3 x SE",
                          EstimatorWarning, stacklevel=2)

    lag_times, Y, JX, JY, Z, R = _variational_restarts(system, x, base, delta,
                                                       params, want_jy=has_h)
    n, _, L, m = Y.shape
    d = system.d
    flat = Y.reshape(-1, m)
    bx = _jac_series(system.b.jacobian_x, x, flat, (n, R, L, d, d))
    W1 = bx.mean(axis=1)
    bZ = _vector_series(system.b, x, Z)
    prods = np.einsum("nlde,ne->nld", W1, bZ)
    integrand = prods.mean(axis=0) - W1.mean(axis=0) @ bZ.mean(axis=0)
    nb = min(N_BATCHES, n)
    size = n // nb
    bm = (prods[:nb * size].reshape(nb, size, L, d).mean(axis=1)
          - W1[:nb * size].reshape(nb, size, L, d, d).mean(axis=1) @ bZ.mean(axis=0))

    if has_h:
        by = _jac_series(system.b.jacobian_y, x, flat, (n, R, L, d, m))
        W2 = np.einsum("nrldm,nrlme->nrlde", by, JY).mean(axis=1)  # (n,L,d,m)
        hZ = _vector_series(system.h, x, Z)
        prods2 = np.einsum("nldm,nm->nld", W2, hZ)
        integrand = integrand + (prods2.mean(axis=0)
                                 - W2.mean(axis=0) @ hZ.mean(axis=0))
        bm = bm + (prods2[:nb * size].reshape(nb, size, L, d).mean(axis=1)
                   - W2[:nb * size].reshape(nb, size, L, d, m).mean(axis=1)
                   @ hZ.mean(axis=0))

    second = np.trapezoid(integrand, lag_times, axis=0)
    second_se = _batch_reduce(np.trapezoid(bm, lag_times, axis=1))
    diagnostics["lag_times"] = lag_times
    diagnostics["integrand"] = integrand
    diagnostics["first_term"] = f1
    diagnostics["second_term"] = second
    _integrand_summability(lag_times, integrand, diagnostics,
                           stderr=_batch_reduce(bm))
    value = f1 + second
    stderr = np.sqrt(f1_se ** 2 + second_se ** 2)
    return DriftResult(value, stderr, diagnostics)


# ---------------------------------------------------------------------------
# one-dimensional cell-problem oracle
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CellSolution:
    """Cell-problem solution Phi and stationary density rho on a torus grid."""

    grid: np.ndarray
    Phi: np.ndarray
    rho: np.ndarray
    x: float
    delta: float

    def __post_init__(self):
        h = self.grid[1] - self.grid[0]
        if np.min(self.rho) < -1e-8:
            raise EstimatorError("stationary density has negative mass")
        if not np.isclose(h * self.rho.sum(), 1.0, atol=1e-10):
            raise EstimatorError("stationary density does not normalize")
        if abs(h * np.sum(self.Phi * self.rho)) > 1e-8:
            raise EstimatorError("cell solution is not centered")


def _periodic_operators(N: int):
    h = 1.0 / N
    main = np.full(N, -2.0)
    off = np.ones(N - 1)
    D2 = sparse.diags([off, main, off], [-1, 0, 1], format="lil")
    D2[0, N - 1] = 1.0
    D2[N - 1, 0] = 1.0
    D2 = D2.tocsr() / h ** 2
    D1 = sparse.diags([-off, off], [-1, 1], format="lil")
    D1[0, N - 1] = -1.0
    D1[N - 1, 0] = 1.0
    D1 = D1.tocsr() / (2.0 * h)
    return D1, D2


def solve_cell_problem_1d(system: FastSlowSystem, x, delta: float,
                          grid_size: int = 2048) -> CellSolution:
    """Solve -L Phi = b with L = g d/dy + (delta/2) d2/dy2 on the unit torus.

    Periodic second-order central differences; the one-dimensional null space
    is removed by augmenting with the centering constraint, and the stationary
    density solves the discrete adjoint equation.
    """
    if system.m != 1:
        raise EstimatorError("cell-problem solves are one-dimensional only")
    if system.fast_space != TORUS:
        raise EstimatorError("cell-problem solves require the torus fast space")
    if delta <= 0.0:
        raise EstimatorError("cell problem needs delta > 0 for uniform ellipticity")
    N = int(grid_size)
    h = 1.0 / N
    y = (np.arange(N) * h)[:, None]
    xv = np.asarray(x, dtype=float).reshape(1, system.d)
    g = np.asarray(system.g(xv, y), dtype=float).reshape(N)
    b = np.asarray(system.b(xv, y), dtype=float).reshape(N)

    D1, D2 = _periodic_operators(N)
    L = sparse.diags(g) @ D1 + 0.5 * delta * D2

    ones = np.ones((N, 1))
    adj = sparse.bmat([[L.T, ones], [h * ones.T, None]], format="csc")
    rhs = np.concatenate([np.zeros(N), [1.0]])
    try:
        sol = sparse_linalg.spsolve(adj, rhs)
    except RuntimeError as exc:
        raise EstimatorError(f"singular stationary-density system: {exc}") from exc
    rho = sol[:N]
    if not np.all(np.isfinite(rho)):
        raise EstimatorError("singular stationary-density system")

    cell_mat = sparse.bmat([[-L, ones], [h * rho[None, :], None]], format="csc")
    rhs = np.concatenate([b, [0.0]])
    try:
        sol = sparse_linalg.spsolve(cell_mat, rhs)
    except RuntimeError as exc:
        raise EstimatorError(f"singular cell-problem system: {exc}") from exc
    Phi = sol[:N]
    if not np.all(np.isfinite(Phi)):
        raise EstimatorError("singular cell-problem system")
    return CellSolution(y.reshape(N), Phi, np.clip(rho, 0.0, None), float(xv[0, 0]),
                        float(delta))


def coefficients_from_cell(system: FastSlowSystem, x, cell: CellSolution,
                           dx: float = 1e-4):
    """Quadrature coefficients from a cell solution (the oracle route).

    F = integral (a + grad_x Phi b) rho dy with grad_x Phi from re-solves at
    x +/- dx; A0 = 2 integral b Phi rho dy.
    """
    x = float(np.asarray(x, dtype=float).reshape(()))
    if not np.isclose(x, cell.x):
        raise EstimatorError("cell solution was computed at a different x")
    N = len(cell.grid)
    h = 1.0 / N
    y = cell.grid[:, None]
    xv = np.array([[x]])
    a = np.asarray(system.a(xv, y), dtype=float).reshape(N)
    b = np.asarray(system.b(xv, y), dtype=float).reshape(N)

    up = solve_cell_problem_1d(system, x + dx, cell.delta, N)
    dn = solve_cell_problem_1d(system, x - dx, cell.delta, N)
    dPhi_dx = (up.Phi - dn.Phi) / (2.0 * dx)

    F = h * np.sum((a + dPhi_dx * b) * cell.rho)
    A0 = 2.0 * h * np.sum(b * cell.Phi * cell.rho)
    return float(F), float(A0)


# ---------------------------------------------------------------------------
# tabulation over a grid of slow states
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class HomogenizedCoefficients:
    """Drift and diffusion tabulated over an x-grid with diagnostics."""

    x_grid: np.ndarray
    F_values: np.ndarray
    F_stderr: np.ndarray
    A0_values: np.ndarray
    A_values: np.ndarray
    ok: np.ndarray
    diagnostics: list

    def drift_fn(self):
        if self.x_grid.shape[1] != 1:
            raise EstimatorError("interpolation is implemented for d = 1 only")
        xs = self.x_grid[:, 0]

        def F(x):
            x = np.asarray(x, dtype=float)
            return np.stack([np.interp(x[..., 0], xs, self.F_values[:, 0])], axis=-1)
        return F

    def diffusion_fn(self):
        if self.x_grid.shape[1] != 1:
            raise EstimatorError("interpolation is implemented for d = 1 only")
        xs = self.x_grid[:, 0]

        def A(x):
            x = np.asarray(x, dtype=float)
            return np.interp(x[..., 0], xs, self.A_values[:, 0, 0])[..., None, None]
        return A


def tabulate_model(system: FastSlowSystem, x_grid, delta: float,
                   params: EstimatorParams) -> HomogenizedCoefficients:
    """Per-point coefficients, class-dispatched; failed points are flagged."""
    x_grid = np.atleast_2d(np.asarray(x_grid, dtype=float))
    if x_grid.shape[0] == 0:
        raise EstimatorError("x grid must be nonempty")
    if x_grid.shape[1] != system.d:
        x_grid = x_grid.reshape(-1, system.d)
    n = x_grid.shape[0]
    d = system.d
    F = np.full((n, d), np.nan)
    F_se = np.full((n, d), np.nan)
    A0 = np.full((n, d, d), np.nan)
    A = np.full((n, d, d), np.nan)
    ok = np.zeros(n, dtype=bool)
    diags = []
    for i, x in enumerate(x_grid):
        pt_params = replace(params, seed=params.seed.child(i * _STREAM_BLOCK))
        entry = {"x": x.copy()}
        try:
            base = _frozen_base(system, x, delta, pt_params)
            if system.coupling_class == WEAKLY_COUPLED:
                drift = drift_weakly_coupled(system, x, delta, pt_params, base=base)
                F_val, F_se_val = drift.value, drift.stderr
                entry["drift"] = drift.diagnostics
            else:
                f1, f1_se = drift_F1(system, x, delta, pt_params, base=base)
                f0 = drift_F0_coupled(system, x, delta, pt_params, base=base)
                F_val = f1 + f0.value
                F_se_val = np.sqrt(f1_se ** 2 + f0.stderr ** 2)
                entry["drift"] = f0.diagnostics
            gk = green_kubo_diffusion(system, x, delta, pt_params, base=base)
            entry["diffusion"] = gk.diagnostics
            F[i], F_se[i] = F_val, F_se_val
            A0[i], A[i] = gk.A0, gk.A
            ok[i] = True
        except (EstimatorError, FloatingPointError) as exc:
            entry["error"] = str(exc)
            warnings.warn(f"tabulation failed at x = {x}: {exc}",
                          EstimatorWarning, stacklevel=2)
        diags.append(entry)
    return HomogenizedCoefficients(x_grid, F, F_se, A0, A, ok, diags)
