"""Time-steppers for fast-slow systems, frozen fast flows, and tangent flows.

Scheme contract: deterministic runs (delta = 0) use classic fourth-order
Runge-Kutta; stochastic runs use Euler-Maruyama with Brownian increments from
a counter-based generator, so every path is a pure function of
``(system, initial data, T, dt, SeedSpec)`` regardless of scheduling.

Noise placement follows the regularized fast equation: amplitude
``sqrt(delta)/epsilon`` on the fast components of the full system and
``sqrt(delta)`` for the frozen flow.  The order-one variant used by the
Lorenz case study (amplitude ``delta`` at epsilon power zero) is selected
with ``noise_at_order_one=True``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as kernels
from .systems import FastSlowSystem


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus a stream index; (master, stream, step) -> increment."""

    master: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.master < (1 << 64):
            raise ValueError("master seed must fit in 64 bits")
        if not 0 <= self.stream < (1 << 32):
            raise ValueError("stream index must fit in 32 bits")

    def child(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master, self.stream + offset)


@dataclass(eq=False)
class Trajectory:
    """Recorded path on a uniform time grid.

    ``dt`` is the spacing of ``times`` (the recording interval); the
    integrator step lives in ``meta['dt_integration']``.  Fast states are
    stored unwrapped even on the torus so displacement diagnostics stay
    meaningful; wrap on read for densities.
    """

    times: np.ndarray
    x_path: np.ndarray
    y_path: np.ndarray
    seed: SeedSpec
    dt: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.x_path) or len(self.times) != len(self.y_path):
            raise ValueError("times, x_path, y_path must have equal length")
        if len(self.times) > 1:
            gaps = np.diff(self.times)
            # rtol covers t = k*dt roundoff at k ~ 1e9
            if np.any(gaps <= 0) or not np.allclose(gaps, self.dt, rtol=1e-6, atol=0):
                raise ValueError("times must increase uniformly by dt")

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __len__(self) -> int:
        return len(self.times)


@dataclass(eq=False)
class TangentFlowState:
    t: float
    y: np.ndarray
    J_x: np.ndarray
    J_y: Optional[np.ndarray] = None


@dataclass(eq=False)
class VariationalFlow:
    """Sequence of tangent-flow states along one fast path."""

    times: np.ndarray
    y_path: np.ndarray
    jx_path: np.ndarray
    jy_path: Optional[np.ndarray]
    seed: SeedSpec
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> TangentFlowState:
        jy = None if self.jy_path is None else self.jy_path[i]
        return TangentFlowState(float(self.times[i]), self.y_path[i],
                                self.jx_path[i], jy)


@dataclass(eq=False)
class EnsembleResult:
    times: np.ndarray
    x_paths: np.ndarray
    y_paths: Optional[np.ndarray]
    seed: SeedSpec
    meta: dict = field(default_factory=dict)

    @property
    def n_members(self) -> int:
        return self.x_paths.shape[0]

    def terminal_x(self) -> np.ndarray:
        return self.x_paths[:, -1, :]

    def x_mean(self) -> np.ndarray:
        return self.x_paths.mean(axis=0)

    def x_stderr(self) -> np.ndarray:
        n = self.n_members
        return self.x_paths.std(axis=0, ddof=1) / np.sqrt(n)


def _steps(T: float, dt: float) -> int:
    if dt <= 0.0:
        raise IntegrationError("dt must be positive")
    n = int(round(T / dt))
    if n < 1:
        raise IntegrationError("T must be at least dt")
    return n


def _rec_steps(n_steps: int, stride: int) -> np.ndarray:
    if stride < 1 or n_steps % stride != 0:
        raise IntegrationError(
            f"record stride {stride} must divide the step count {n_steps}")
    return np.arange(0, n_steps + 1, stride, dtype=np.int64)


def _noise_amp(system: FastSlowSystem, noise_at_order_one: bool) -> float:
    if system.delta == 0.0:
        return 0.0
    if noise_at_order_one:
        return system.delta
    return np.sqrt(system.delta) / system.epsilon


def integrate_fast_slow(system: FastSlowSystem, xi, eta, T: float, dt: float,
                        seed: SeedSpec, noise_at_order_one: bool = False,
                        record_stride: int = 1) -> Trajectory:
    """Integrate the full coupled system from (xi, eta) for duration T.

    Enforces the stiffness guard dt <= epsilon^2 / 10.
    """
    eps = system.epsilon
    if dt > eps * eps / 10.0 * (1.0 + 1e-12):
        raise IntegrationError(
            f"dt too large: stability guard requires dt <= epsilon^2/10 = "
            f"{eps * eps / 10.0:.6g}")
    n_steps = _steps(T, dt)
    rec = _rec_steps(n_steps, record_stride)
    xi = np.asarray(xi, dtype=float).reshape(1, system.d)
    eta = np.asarray(eta, dtype=float).reshape(1, system.m)
    amp = _noise_amp(system, noise_at_order_one)
    x_rec, y_rec = kernels.coupled_batch(system.field, xi, eta, eps, amp,
                                         n_steps, dt, rec, seed.master, seed.stream)
    scheme = "rk4" if amp == 0.0 else "euler_maruyama"
    meta = {"system": system.system_hash(), "scheme": scheme,
            "dt_integration": dt, "record_stride": record_stride,
            "noise_amp": amp, "noise_at_order_one": bool(noise_at_order_one),
            "fast_space": system.fast_space}
    return Trajectory(rec * dt, x_rec[0], y_rec[0], seed, dt * record_stride, meta)


def integrate_frozen_fast(system: FastSlowSystem, x, y0, delta: float, T: float,
                          dt: float, seed: SeedSpec, record_stride: int = 1,
                          em_drift: bool = False) -> Trajectory:
    """Integrate the frozen-x fast flow dy = g(x, y) dt + sqrt(delta) dV.

    ``em_drift`` forces Euler drift at delta = 0 so a deterministic reference
    shares its discretization with noisy companions.
    """
    if delta < 0.0:
        raise IntegrationError("delta must be nonnegative")
    n_steps = _steps(T, dt)
    rec = _rec_steps(n_steps, record_stride)
    x = np.asarray(x, dtype=float).reshape(system.d)
    y0 = np.asarray(y0, dtype=float).reshape(1, system.m)
    amp = np.sqrt(delta)
    y_rec = kernels.frozen_batch(system.field, x, y0, amp, n_steps, dt, rec,
                                 seed.master, seed.stream, em_drift)
    scheme = "rk4" if (amp == 0.0 and not em_drift) else "euler_maruyama"
    meta = {"system": system.system_hash(), "scheme": scheme,
            "dt_integration": dt, "record_stride": record_stride,
            "frozen_x": x.copy(), "delta": delta,
            "fast_space": system.fast_space}
    x_path = np.broadcast_to(x, (len(rec), system.d))
    return Trajectory(rec * dt, x_path, y_rec[0], seed, dt * record_stride, meta)


def integrate_variational(system: FastSlowSystem, x, y0, delta: float, T: float,
                          dt: float, seed: SeedSpec, record_stride: int = 1,
                          em_drift: bool = False, want_jy: bool = True) -> VariationalFlow:
    """Fast path plus tangent flows J_x = grad_x phi and J_y = grad_y phi.

    Both Jacobians ride along the same noise realization as the base path:
    dJ_x/dt = grad_x g + grad_y g J_x with J_x(0) = 0, and J_y satisfies the
    same equation without the source, J_y(0) = I.
    """
    if delta < 0.0:
        raise IntegrationError("delta must be nonnegative")
    n_steps = _steps(T, dt)
    rec = _rec_steps(n_steps, record_stride)
    x = np.asarray(x, dtype=float).reshape(system.d)
    y0 = np.asarray(y0, dtype=float).reshape(1, system.m)
    amp = np.sqrt(delta)
    y_rec, jx_rec, jy_rec = kernels.variational_batch(
        system.field, x, y0, amp, n_steps, dt, rec, seed.master, seed.stream,
        em_drift, True, want_jy)
    meta = {"system": system.system_hash(), "dt_integration": dt,
            "jacobian_source": ("analytic" if system.g.has_analytic_jacobians
                                else "finite_difference")}
    return VariationalFlow(rec * dt, y_rec[0], jx_rec[0],
                           None if jy_rec is None else jy_rec[0], seed, meta)


@dataclass(eq=False)
class RunTask:
    """Descriptor for an ensemble of coupled runs."""

    system: FastSlowSystem
    xi: np.ndarray
    T: float
    dt: float
    eta: Optional[np.ndarray] = None
    sampling: str = "attractor"      # "attractor" | "fixed"
    burn_in: float = 10.0
    spread: float = 1.0
    burn_in_dt: float = 1e-3
    noise_at_order_one: bool = False
    record_stride: int = 1
    keep_fast: bool = False


def sample_fast_states(system: FastSlowSystem, n: int, seed: SeedSpec,
                       burn_in: float = 10.0, spread: float = 1.0,
                       dt: float = 1e-3, delta: float = 0.0) -> np.ndarray:
    """Draw n fast states by iterating the frozen flow at epsilon = 1.

    The orbit starts from a seed-drawn perturbation of the reference point
    (so deterministic flows still yield seed-dependent samples), discards
    ``burn_in`` time units, then records one state every ``spread`` units.
    """
    from ._kernels import noise

    x0 = np.zeros(system.d)
    y0 = np.asarray(system.reference_eta, dtype=float)
    # separate stream for the start-point draw; the burn-in flow itself may
    # consume noise from seed.stream when delta > 0
    pert = noise.normals(seed.master, seed.stream + (1 << 20), 0, 1, system.m)[0]
    y_start = y0 + 1e-3 * (1.0 + np.abs(y0)) * pert
    stride = max(1, int(round(spread / dt)))
    n_burn = int(round(burn_in / dt))
    n_steps = n_burn + (n - 1) * stride
    rec = n_burn + stride * np.arange(n, dtype=np.int64)
    y_rec = kernels.frozen_batch(system.field, x0, y_start.reshape(1, -1),
                                 np.sqrt(delta), n_steps, dt, rec,
                                 seed.master, seed.stream, False)
    return y_rec[0]


def run_ensemble(task: RunTask, N: int, seed: SeedSpec,
                 n_jobs: int = 1) -> EnsembleResult:
    """Run N independent members with stream indices seed.stream .. +N-1.

    Initial fast states are attractor samples from the frozen flow (stream
    seed.stream + N) unless ``task.sampling == 'fixed'``.  Member failures
    carry the member index.
    """
    if N < 1:
        raise IntegrationError("ensemble size must be at least 1")
    system = task.system
    if task.sampling == "fixed":
        eta0 = task.eta if task.eta is not None else system.reference_eta
        etas = np.tile(np.asarray(eta0, dtype=float).reshape(1, -1), (N, 1))
    elif task.sampling == "attractor":
        etas = sample_fast_states(system, N, seed.child(N), task.burn_in,
                                  task.spread, task.burn_in_dt, system.delta)
    else:
        raise IntegrationError(f"unknown sampling mode {task.sampling!r}")

    n_steps = _steps(task.T, task.dt)
    rec = _rec_steps(n_steps, task.record_stride)
    times = rec * task.dt
    x_paths = np.empty((N, len(rec), system.d))
    y_paths = np.empty((N, len(rec), system.m)) if task.keep_fast else None
    amp = _noise_amp(system, task.noise_at_order_one)
    xi = np.asarray(task.xi, dtype=float).reshape(1, system.d)
    eps = system.epsilon
    block = 64

    def run_block(i0: int):
        i1 = min(i0 + block, N)
        X0 = np.tile(xi, (i1 - i0, 1))
        try:
            xr, yr = kernels.coupled_batch(system.field, X0, etas[i0:i1], eps,
                                           amp, n_steps, task.dt, rec,
                                           seed.master, seed.stream + i0)
        except FloatingPointError:
            # rerun one by one to attribute the blow-up to a member
            for i in range(i0, i1):
                try:
                    kernels.coupled_batch(system.field, xi, etas[i:i + 1], eps,
                                          amp, n_steps, task.dt, rec,
                                          seed.master, seed.stream + i)
                except FloatingPointError as exc:
                    raise IntegrationError(f"ensemble member {i}: {exc}") from exc
            raise
        x_paths[i0:i1] = xr
        if y_paths is not None:
            y_paths[i0:i1] = yr

    starts = range(0, N, block)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(run_block, starts))
    else:
        for i0 in starts:
            run_block(i0)

    meta = {"system": system.system_hash(), "sampling": task.sampling,
            "etas": etas, "noise_amp": amp, "dt_integration": task.dt}
    return EnsembleResult(times, x_paths, y_paths, seed, meta)
