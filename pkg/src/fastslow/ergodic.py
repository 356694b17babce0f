"""Ergodic statistics along fast trajectories.

Estimators use a fixed-origin convention: for a recorded series of length S
and a maximal lag of ``J`` samples, time origins are the first ``S - J``
samples (truncated to a multiple of the batch count), and every lag uses the
same origin set.  The lag-0 value is computed as ``v.w/n - mean(v)mean(w)``
over the origins, an exact covariance identity.  Standard errors come from
16 contiguous batch means; correlated samples make naive variances wrong.

For noisy flows (delta > 0) the inner factor E[w(phi^t(z))] is estimated by
restarting ``noise_replicas`` independent noisy flows from each origin state
rather than reading along one path, matching the nested expectation in the
coefficient formulas.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import signal

from . import _kernels as kernels
from .integrate import SeedSpec, Trajectory
from .systems import FastSlowSystem, TORUS, wrap_torus

N_BATCHES = 16

# direct per-lag products are fine below this many multiply-adds
_FFT_THRESHOLD = 1 << 22


class EstimatorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Birkhoff averages
# ---------------------------------------------------------------------------

def _series(fn: Callable, Y: np.ndarray) -> np.ndarray:
    vals = np.asarray(fn(Y), dtype=float)
    if vals.ndim == 0:
        vals = np.full(Y.shape[0], float(vals))
    if vals.shape[0] != Y.shape[0]:
        raise EstimatorError("observable is not vectorized over the sample axis")
    return vals


def _batch_stats(vals: np.ndarray):
    """Mean and batch-means standard error along axis 0."""
    n = vals.shape[0]
    nb = min(N_BATCHES, n)
    size = n // nb
    used = nb * size
    batches = vals[:used].reshape(nb, size, *vals.shape[1:]).mean(axis=1)
    mean = vals.mean(axis=0)
    if nb < 2:
        return mean, np.zeros_like(mean)
    se = batches.std(axis=0, ddof=1) / np.sqrt(nb)
    return mean, se


def birkhoff_average(observable: Callable, trajectory: Trajectory,
                     burn_in: float = 0.0):
    """Time average of an observable of the fast state over [burn_in, T].

    Returns (value, standard_error); the error comes from 16 batch means.
    """
    if burn_in >= trajectory.duration:
        raise EstimatorError("burn_in must be smaller than the trajectory duration")
    skip = int(np.ceil(burn_in / trajectory.dt - 1e-9))
    Y = trajectory.y_path[skip:]
    vals = _series(observable, Y)
    mean, se = _batch_stats(vals)
    if vals.ndim == 1:
        return float(mean), float(se)
    return mean, se


@dataclass(frozen=True)
class CenteringResult:
    residual: np.ndarray
    stderr: np.ndarray

    def within(self, k: float) -> bool:
        return bool(np.all(np.abs(self.residual) <= k * np.maximum(self.stderr, 1e-300)))


def centering_residual(system: FastSlowSystem, x, delta: float, T: float,
                       seed: SeedSpec, dt: float = 1e-3,
                       burn_in: float = 1.0) -> CenteringResult:
    """Time average of b(x, phi_x^{delta, .}) -- should vanish for valid systems."""
    from .integrate import integrate_frozen_fast

    traj = integrate_frozen_fast(system, x, system.reference_eta, delta,
                                 burn_in + T, dt, seed)
    return centering_from_trajectory(system, x, traj, burn_in)


def centering_from_trajectory(system: FastSlowSystem, x, traj: Trajectory,
                              burn_in: float = 0.0) -> CenteringResult:
    x = np.asarray(x, dtype=float).reshape(system.d)

    def b_obs(Y):
        return system.b(x[None, :], Y)

    value, se = birkhoff_average(b_obs, traj, burn_in)
    return CenteringResult(np.atleast_1d(np.asarray(value)),
                           np.atleast_1d(np.asarray(se)))


# ---------------------------------------------------------------------------
# correlation functions
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CorrelationSeries:
    """Lagged correlation estimates C(t) for observables (v, w)."""

    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    observables: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lags[0] != 0.0:
            raise EstimatorError("lag grid must start at 0")


def _snap_lags(lags, dt: float) -> np.ndarray:
    lags = np.asarray(lags, dtype=float)
    if np.any(lags < 0):
        raise EstimatorError("lags must be nonnegative")
    idx = np.rint(lags / dt).astype(np.int64)
    return idx


def _origin_count(S: int, max_idx: int) -> int:
    avail = S - max_idx
    if avail < 2:
        raise EstimatorError("max lag too large for the base trajectory")
    return avail


def _corr_along_path(V: np.ndarray, W: np.ndarray, lag_idx: np.ndarray):
    """Fixed-origin lagged covariances of two scalar series.

    Returns (values, stderr, n_origins) where values[j] estimates
    cov(V_s, W_{s + lag_j}).
    """
    S = V.shape[0]
    max_idx = int(lag_idx.max())
    avail = _origin_count(S, max_idx)
    nb = min(N_BATCHES, avail)
    size = avail // nb
    n_used = nb * size

    vbar = V[:n_used].mean()
    # per-lag mean of the shifted observable (lag 0 via np.mean so the
    # covariance identity below is bit-exact)
    csum = np.concatenate([[0.0], np.cumsum(W)])
    wbar = (csum[lag_idx + n_used] - csum[lag_idx]) / n_used
    wbar[lag_idx == 0] = W[:n_used].mean()

    L = len(lag_idx)
    if n_used * L <= _FFT_THRESHOLD:
        sums = np.empty((nb, L))
        for j, idx in enumerate(lag_idx):
            prod = V[:n_used] * W[idx:idx + n_used]
            sums[:, j] = prod.reshape(nb, size).sum(axis=1)
    else:
        # one FFT cross-correlation per origin batch; identical sums, fewer ops
        sums = np.empty((nb, L))
        for k in range(nb):
            lo = k * size
            seg_v = V[lo:lo + size]
            seg_w = W[lo:lo + size + max_idx]
            full = signal.correlate(seg_w, seg_v, mode="valid", method="fft")
            sums[k] = full[lag_idx]
    totals = sums.sum(axis=0)
    values = totals / n_used - vbar * wbar
    # exact covariance identity at lag zero
    if lag_idx[0] == 0:
        values[0] = np.dot(V[:n_used], W[:n_used]) / n_used - vbar * wbar[0]
    batch_means = sums / size - vbar * wbar
    stderr = (batch_means.std(axis=0, ddof=1) / np.sqrt(nb)
              if nb >= 2 else np.zeros(L))
    return values, stderr, n_used, batch_means


def _corr_replicas(system: FastSlowSystem, x, v_vals, w_fn, Z: np.ndarray,
                   lag_idx: np.ndarray, dt: float, delta: float,
                   replicas: int, seed: SeedSpec):
    """Nested-expectation correlations: restart `replicas` noisy flows per origin."""
    n_orig = Z.shape[0]
    n_steps = int(lag_idx.max())
    Y0 = np.repeat(Z, replicas, axis=0)
    y_rec = kernels.frozen_batch(system.field, x, Y0, np.sqrt(delta),
                                 max(n_steps, 1), dt, lag_idx,
                                 seed.master, seed.stream, False)
    y_rec = y_rec.reshape(n_orig, replicas, len(lag_idx), system.m)
    w_rep = _series(w_fn, y_rec.reshape(-1, system.m)).reshape(
        n_orig, replicas, len(lag_idx))
    w_hat = w_rep.mean(axis=1)

    vbar = v_vals.mean()
    wbar = w_hat.mean(axis=0)
    prods = v_vals[:, None] * w_hat
    values = prods.mean(axis=0) - vbar * wbar
    if lag_idx[0] == 0:
        values[0] = np.dot(v_vals, w_hat[:, 0]) / n_orig - vbar * wbar[0]
    nb = min(N_BATCHES, n_orig)
    size = n_orig // nb
    batch_means = prods[:nb * size].reshape(nb, size, -1).mean(axis=1) - vbar * wbar
    stderr = (batch_means.std(axis=0, ddof=1) / np.sqrt(nb)
              if nb >= 2 else np.zeros(len(lag_idx)))
    return values, stderr, batch_means


def estimate_correlation(v: Callable, w: Callable, base: Trajectory, lags,
                         delta: float = 0.0, noise_replicas: int = 16,
                         system: Optional[FastSlowSystem] = None,
                         seed: Optional[SeedSpec] = None,
                         n_origins: int = 2048) -> CorrelationSeries:
    """Correlation C(t) = <v(z_s) w_t(z_s)> - <v><w> along a base trajectory.

    For delta = 0, ``w_t`` is read along the path; for delta > 0 it is the
    average of ``noise_replicas`` independent noisy restarts from each origin
    (requires ``system``; replica streams derive from ``seed``, default
    ``base.seed.child(1)``).
    """
    lags = np.asarray(lags, dtype=float)
    if lags[0] != 0.0:
        raise EstimatorError("lag grid must start at 0")
    if lags.max() > base.duration / 10.0 + 1e-12:
        raise EstimatorError("max lag too large: must be at most a tenth of the base duration")

    names = (getattr(v, "__name__", "v"), getattr(w, "__name__", "w"))
    meta = {"base": dict(base.meta), "delta": delta}

    if delta == 0.0:
        lag_idx = _snap_lags(lags, base.dt)
        V = _series(v, base.y_path)
        W = _series(w, base.y_path)
        if V.ndim != 1 or W.ndim != 1:
            raise EstimatorError("estimate_correlation expects scalar observables")
        values, stderr, n_used, _ = _corr_along_path(V, W, lag_idx)
        meta.update(n_origins=n_used, origin_steps=np.arange(n_used))
        return CorrelationSeries(lag_idx * base.dt, values, stderr, names, meta)

    if noise_replicas < 1:
        raise EstimatorError("delta > 0 requires at least one noise replica")
    if system is None:
        raise EstimatorError("delta > 0 requires the system for restarted flows")
    if seed is None:
        seed = base.seed.child(1)
    dt_int = base.meta.get("dt_integration", base.dt)
    lag_idx = _snap_lags(lags, dt_int)
    max_rec = int((len(base) - 1))
    # origins strided over the usable range of the recorded path
    avail = max_rec + 1 - int(np.ceil(lag_idx.max() * dt_int / base.dt))
    if avail < 2:
        raise EstimatorError("max lag too large for the base trajectory")
    stride = max(1, avail // n_origins)
    origin_steps = np.arange(0, avail, stride)[:n_origins]
    Z = base.y_path[origin_steps]
    x = np.asarray(base.meta.get("frozen_x", np.zeros(system.d)))
    V = _series(v, Z)
    values, stderr, _ = _corr_replicas(system, x, V, w, Z, lag_idx, dt_int,
                                       delta, noise_replicas, seed)
    meta.update(n_origins=len(origin_steps), origin_steps=origin_steps,
                noise_replicas=noise_replicas)
    return CorrelationSeries(lag_idx * dt_int, values, stderr, names, meta)


# ---------------------------------------------------------------------------
# decay-of-correlation fits
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DecayFit:
    """Fitted decay model for a correlation series."""

    model: str                 # "exponential" C e^{-rate t} | "power" C t^{-rate}
    C: float
    rate: float
    summability_integral: float
    summable: bool
    residual: float
    t0: float = 0.0
    degenerate: bool = False

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        if self.degenerate:
            return np.zeros_like(t)
        if self.model == "exponential":
            return self.C * np.exp(-self.rate * t)
        return self.C * np.where(t > 0, t, np.nan) ** (-self.rate)

    def tail_integral(self, from_t: float) -> float:
        """Integral of the fitted model over [from_t, infinity)."""
        if self.degenerate:
            return 0.0
        if self.model == "exponential":
            if self.rate <= 0:
                return np.inf
            return self.C / self.rate * np.exp(-self.rate * from_t)
        if self.rate <= 1.0:
            return np.inf
        t = max(from_t, self.t0)
        return self.C * t ** (1.0 - self.rate) / (self.rate - 1.0)


def _loglin_fit(t, logc, weights=None):
    # delta-method weights value/stderr keep the noisy tail from tilting the
    # fit; residual stays unweighted so exact data reports ~0
    slope, intercept = np.polyfit(t, logc, 1, w=weights)
    resid = logc - (slope * t + intercept)
    return slope, intercept, float(np.sqrt(np.mean(resid ** 2)))


def fit_decay(series, values=None, stderr=None) -> DecayFit:
    """Least-squares decay fit in log space; best residual of the two models wins.

    Accepts a :class:`CorrelationSeries` or raw (lags, values) arrays.  When
    standard errors are available, lags buried in estimator noise (value
    below 3 SE) are excluded from the log fits.
    """
    if values is None:
        lags = np.asarray(series.lags, dtype=float)
        vals = np.asarray(series.values, dtype=float)
        if stderr is None:
            stderr = getattr(series, "stderr", None)
    else:
        lags = np.asarray(series, dtype=float)
        vals = np.asarray(values, dtype=float)

    if np.all(vals == 0.0):
        return DecayFit("exponential", 0.0, 0.0, 0.0, True, 0.0, degenerate=True)

    pos = vals > 0
    weights = None
    if stderr is not None:
        stderr = np.asarray(stderr, dtype=float)
        if np.any(stderr > 0):
            pos &= vals > 3.0 * stderr
            weights = vals / np.maximum(stderr, 1e-300)
    if np.count_nonzero(pos & (lags > 0)) < 8:
        raise EstimatorError("need at least 8 positive correlation values to fit a decay")

    t_exp = lags[pos]
    w_exp = None if weights is None else weights[pos]
    slope_e, icept_e, res_e = _loglin_fit(t_exp, np.log(vals[pos]), w_exp)
    pos_pow = pos & (lags > 0)
    t_pow = lags[pos_pow]
    w_pow = None if weights is None else weights[pos_pow]
    slope_p, icept_p, res_p = _loglin_fit(np.log(t_pow), np.log(vals[pos_pow]),
                                          w_pow)

    if res_e <= res_p:
        C, rate = float(np.exp(icept_e)), float(-slope_e)
        integral = C / rate if rate > 0 else np.inf
        return DecayFit("exponential", C, rate, integral, rate > 0, res_e)

    C, rate = float(np.exp(icept_p)), float(-slope_p)
    t0 = float(t_pow[0])
    if rate > 1.0:
        head_mask = lags <= t0
        head = float(np.trapz(vals[head_mask], lags[head_mask])) if np.count_nonzero(head_mask) > 1 else 0.0
        integral = head + C * t0 ** (1.0 - rate) / (rate - 1.0)
        summable = True
    else:
        integral, summable = np.inf, False
    return DecayFit("power", C, rate, integral, summable, res_p, t0=t0)


def correlation_to_csv(series: CorrelationSeries, path) -> None:
    """Columns: lag, value, stderr."""
    from .io import write_csv

    write_csv(path, ["lag", "value", "stderr"],
              zip(series.lags, series.values, series.stderr))


def decay_fit_to_json(fit: DecayFit, path) -> None:
    import json

    payload = {"model": fit.model, "C": fit.C, "rate": fit.rate,
               "summable": fit.summable,
               "summability_integral": (fit.summability_integral
                                        if np.isfinite(fit.summability_integral)
                                        else "inf"),
               "residual": fit.residual, "t0": fit.t0,
               "degenerate": fit.degenerate}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


def stochastic_stability_flags(det_fit: DecayFit, noisy_fit: DecayFit,
                               lags) -> np.ndarray:
    """Lags where the noisy bound exceeds the deterministic one.

    Diagnostic for the stability inequality C_delta e^{-rho_delta t} <= C(t);
    a grid check, not a proof for all t.
    """
    lags = np.asarray(lags, dtype=float)
    return noisy_fit.evaluate(lags) > det_fit.evaluate(lags) * (1.0 + 1e-9)


# ---------------------------------------------------------------------------
# noise-shift exponent (solution-operator behavior as delta -> 0)
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ShiftFit:
    slope: float
    intercept: float
    deltas: np.ndarray
    mean_shift: np.ndarray
    shifts: np.ndarray          # (n_seeds, n_deltas)


def delta_shift_exponent(system: FastSlowSystem, x, y0, T: float, deltas,
                         seeds: Sequence[SeedSpec], dt: float = 1e-4) -> ShiftFit:
    """Regression slope of log sup_t |phi^delta - phi^0| against log delta.

    Both paths share Brownian increments and Euler drift per seed, so the gap
    is purely noise-driven; the theory predicts slope ~ 1/2, exactly 1/2 when
    the fast drift vanishes.
    """
    deltas = np.asarray(deltas, dtype=float)
    if np.any(deltas <= 0.0):
        raise EstimatorError("deltas must be positive")
    if deltas.max() / deltas.min() < 1e3:
        raise EstimatorError("delta grid must span at least three decades")
    seeds = list(seeds)
    if not seeds:
        raise EstimatorError("at least one seed is required")
    master = seeds[0].master
    if any(s.master != master for s in seeds):
        raise EstimatorError("all seeds must share one master seed")
    streams = [s.stream for s in seeds]
    n_steps = int(round(T / dt))
    x = np.asarray(x, dtype=float).reshape(system.d)
    y0 = np.asarray(y0, dtype=float).reshape(system.m)
    shifts = kernels.shift_sup_batch(system.field, x, y0, np.sqrt(deltas),
                                     n_steps, dt, master, streams)
    mean_shift = shifts.mean(axis=0)
    slope, intercept = np.polyfit(np.log(deltas), np.log(mean_shift), 1)
    return ShiftFit(float(slope), float(intercept), deltas, mean_shift, shifts)


# ---------------------------------------------------------------------------
# invariant-density histograms
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DensityHistogram:
    edges: list
    masses: np.ndarray
    count: int

    def __post_init__(self):
        total = self.masses.sum()
        if self.count > 0 and not np.isclose(total, 1.0):
            raise EstimatorError("histogram masses must sum to 1")


def estimate_density(trajectory: Trajectory, bins: int, burn_in: float = 0.0,
                     bounds=None) -> DensityHistogram:
    """Normalized histogram of the fast path after burn-in.

    Torus trajectories are wrapped into [0, 1)^m; unbounded fast spaces need
    an explicit ``bounds`` box [(lo, hi), ...].
    """
    skip = int(np.ceil(burn_in / trajectory.dt - 1e-9)) if burn_in > 0 else 0
    Y = trajectory.y_path[skip:]
    if Y.shape[0] == 0:
        raise EstimatorError("empty trajectory after burn-in")
    m = Y.shape[1]
    fast_space = trajectory.meta.get("fast_space", TORUS)
    if fast_space == TORUS:
        Y = wrap_torus(Y)
        ranges = [(0.0, 1.0)] * m
    else:
        if bounds is None:
            raise EstimatorError("explicit bounds required for an unbounded fast space")
        ranges = list(bounds)
    counts, edges = np.histogramdd(Y, bins=bins, range=ranges)
    total = counts.sum()
    return DensityHistogram(list(edges), counts / total, int(total))
