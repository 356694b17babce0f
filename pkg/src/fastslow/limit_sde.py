"""Simulation of the homogenized SDE and distributional comparison tools.

The limiting slow dynamics is dX = F(X) dt + A(X) dW.  For the Lorenz case
study this is an Ornstein-Uhlenbeck process whose moments are known in closed
form; convergence of the fast-slow slow variable toward the limit is measured
by Kolmogorov-Smirnov statistics and moment errors over an epsilon grid.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from ._kernels import noise as _noise
from ._kernels.pure import _noise_blocks
from .integrate import EnsembleResult, IntegrationError, RunTask, SeedSpec, run_ensemble
from .systems import FastSlowSystem


@dataclass(eq=False)
class HomogenizedSDE:
    """Limiting SDE with callable (or tabulated + interpolated) coefficients."""

    drift: Callable
    diffusion: Callable
    d: int

    @classmethod
    def from_coefficients(cls, coeffs) -> "HomogenizedSDE":
        return cls(coeffs.drift_fn(), coeffs.diffusion_fn(), coeffs.x_grid.shape[1])

    @classmethod
    def ornstein_uhlenbeck(cls, sigma2: float) -> "HomogenizedSDE":
        sigma = np.sqrt(sigma2)
        return cls(lambda x: -x, lambda x: np.broadcast_to(
            sigma * np.eye(1), x.shape[:-1] + (1, 1)), 1)


@dataclass(frozen=True)
class OUAnalytic:
    """Ornstein-Uhlenbeck limit: dX = -X dt + sigma dW from X(0) = xi."""

    sigma2: float
    xi: float = 0.0

    def __post_init__(self):
        if self.sigma2 < 0.0:
            raise ValueError("sigma2 must be nonnegative")


def ou_moments(ou: OUAnalytic, t: float):
    """Mean and variance of the OU process at time t.

    mean = e^{-t} xi, variance = sigma^2/2 (1 - e^{-2t}).
    """
    if t < 0.0:
        raise ValueError("time must be nonnegative")
    mean = np.exp(-t) * ou.xi
    var = 0.5 * ou.sigma2 * (1.0 - np.exp(-2.0 * t))
    return float(mean), float(var)


def simulate_homogenized(model: HomogenizedSDE, xi, T: float, dt: float, N: int,
                         seed: SeedSpec, record_stride: int = 1) -> EnsembleResult:
    """Euler-Maruyama ensemble for the limiting SDE, deterministic per seed."""
    if N < 1:
        raise IntegrationError("ensemble size must be at least 1")
    n_steps = int(round(T / dt))
    if n_steps < 1:
        raise IntegrationError("T must be at least dt")
    if record_stride < 1 or n_steps % record_stride != 0:
        raise IntegrationError("record stride must divide the step count")
    d = model.d
    X = np.tile(np.asarray(xi, dtype=float).reshape(1, d), (N, 1))
    rec = np.arange(0, n_steps + 1, record_stride)
    paths = np.empty((N, len(rec), d))
    paths[:, 0] = X
    pos = 1
    sqdt = np.sqrt(dt)
    for step0, nb in _noise_blocks(N, d, n_steps):
        xi_blk = np.empty((N, nb, d))
        for i in range(N):
            xi_blk[i] = _noise.normals(seed.master, seed.stream + i, step0, nb, d)
        for j in range(nb):
            k = step0 + j
            A = model.diffusion(X)
            X = X + dt * model.drift(X) + sqdt * np.einsum("nij,nj->ni", A, xi_blk[:, j])
            if not np.all(np.isfinite(X)):
                raise FloatingPointError(
                    f"non-finite state at t={(k + 1) * dt:.6g} (step {k + 1})")
            if pos < len(rec) and rec[pos] == k + 1:
                paths[:, pos] = X
                pos += 1
    meta = {"model": "homogenized_sde", "dt_integration": dt}
    return EnsembleResult(rec * dt, paths, None, seed, meta)


# ---------------------------------------------------------------------------
# distribution comparison
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DistributionReport:
    ks: float
    mean_error: float
    variance_error: float
    n_sample: int
    n_reference: int
    t: Optional[float] = None
    mode: str = "two_sample"

    def __post_init__(self):
        if not 0.0 <= self.ks <= 1.0:
            raise ValueError("KS statistic must lie in [0, 1]")


def _normal_cdf(z):
    return 0.5 * (1.0 + special.erf(z / np.sqrt(2.0)))


def ks_two_sample(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def ks_one_sample_normal(sample, mean: float, var: float) -> float:
    x = np.sort(np.asarray(sample, dtype=float))
    n = len(x)
    cdf = _normal_cdf((x - mean) / np.sqrt(var))
    hi = np.arange(1, n + 1) / n - cdf
    lo = cdf - np.arange(0, n) / n
    return float(max(hi.max(), lo.max()))


def compare_distributions(sample, reference, t: Optional[float] = None) -> DistributionReport:
    """KS statistic plus mean/variance discrepancies.

    ``reference`` is either a second sample (two-sample KS, symmetric in its
    arguments) or an ``(mean, variance)`` tuple for a one-sample test against
    the normal law.
    """
    sample = np.asarray(sample, dtype=float).ravel()
    if len(sample) < 30:
        raise ValueError("undersized sample: need at least 30 values")
    if isinstance(reference, tuple) and len(reference) == 2 and np.isscalar(reference[0]):
        mean, var = float(reference[0]), float(reference[1])
        ks = ks_one_sample_normal(sample, mean, var)
        return DistributionReport(
            ks, abs(sample.mean() - mean), abs(sample.var(ddof=1) - var),
            len(sample), 0, t, "one_sample_normal")
    reference = np.asarray(reference, dtype=float).ravel()
    if len(reference) < 30:
        raise ValueError("undersized reference sample: need at least 30 values")
    ks = ks_two_sample(sample, reference)
    return DistributionReport(
        ks, abs(sample.mean() - reference.mean()),
        abs(sample.var(ddof=1) - reference.var(ddof=1)),
        len(sample), len(reference), t, "two_sample")


# ---------------------------------------------------------------------------
# semigroup-convergence diagnostic
# ---------------------------------------------------------------------------

def gaussian_bumps(centers: Sequence[float]) -> list:
    """Built-in observables vanishing at infinity: x -> exp(-(x - c)^2)."""
    out = []
    for c in centers:
        def f(x, c=c):
            x = np.asarray(x, dtype=float)
            return np.exp(-(x - c) ** 2)
        f.__name__ = f"gauss_{c:+g}"
        out.append(f)
    return out


@dataclass(eq=False)
class ConvergenceTable:
    """Errors |mean f(X^eps(t)) - mean f(X(t))| over (epsilon, t, f)."""

    epsilons: np.ndarray
    times: np.ndarray
    f_names: list
    errors: np.ndarray           # (n_eps, n_t, n_f); NaN marks failed cells
    stderr: np.ndarray
    notes: dict = field(default_factory=dict)

    def rows(self):
        for i, eps in enumerate(self.epsilons):
            for j, t in enumerate(self.times):
                for k, name in enumerate(self.f_names):
                    yield eps, t, name, self.errors[i, j, k], self.stderr[i, j, k]


def semigroup_convergence(system: FastSlowSystem, model: HomogenizedSDE,
                          f_set: Sequence[Callable], epsilons, t_grid,
                          N: int, seed: SeedSpec, fast_step: float = 1e-3,
                          n_reference: Optional[int] = None,
                          dt_limit: float = 1e-3) -> ConvergenceTable:
    """Error table for the convergence of observable means toward the limit.

    For each epsilon the coupled system runs an attractor-sampled ensemble
    with step ``epsilon^2 * fast_step`` (honoring the stiffness guard); the
    reference means come from an Euler-Maruyama ensemble of the limit model.
    Member blow-ups mark the whole epsilon row with NaN and a note.
    """
    if len(f_set) == 0:
        raise ValueError("f_set must be nonempty")
    epsilons = np.asarray(epsilons, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if len(t_grid) < 2 or not np.allclose(np.diff(t_grid), t_grid[1] - t_grid[0]):
        raise ValueError("t_grid must be uniform with at least two points")
    T = float(t_grid[-1])
    if not np.isclose(t_grid[0], 0.0):
        raise ValueError("t_grid must start at 0")

    n_ref = n_reference if n_reference is not None else max(N, 4096)
    t_spacing = t_grid[1] - t_grid[0]
    ref_stride = int(round(t_spacing / dt_limit))
    ref = simulate_homogenized(model, np.zeros(model.d), T, dt_limit, n_ref,
                               seed.child(1 << 20), record_stride=ref_stride)
    ref_vals = {}
    for k, f in enumerate(f_set):
        vals = f(ref.x_paths[:, :, 0])
        ref_vals[k] = vals.mean(axis=0)

    errors = np.full((len(epsilons), len(t_grid), len(f_set)), np.nan)
    stderr = np.full_like(errors, np.nan)
    notes = {}
    xi = np.zeros(system.d)
    for i, eps in enumerate(epsilons):
        sys_eps = system.with_params(epsilon=float(eps))
        dt = eps ** 2 * fast_step
        stride = int(round(t_spacing / dt))
        dt = t_spacing / stride    # land exactly on the t grid
        task = RunTask(system=sys_eps, xi=xi, T=T, dt=dt, sampling="attractor",
                       record_stride=stride)
        try:
            ens = run_ensemble(task, N, seed.child(i * (1 << 16)))
        except (IntegrationError, FloatingPointError) as exc:
            notes[float(eps)] = str(exc)
            continue
        for k, f in enumerate(f_set):
            vals = f(ens.x_paths[:, :, 0])
            errors[i, :, k] = np.abs(vals.mean(axis=0) - ref_vals[k])
            stderr[i, :, k] = vals.std(axis=0, ddof=1) / np.sqrt(N)
    return ConvergenceTable(epsilons, t_grid, [getattr(f, "__name__", f"f{k}")
                                               for k, f in enumerate(f_set)],
                            errors, stderr, notes)
