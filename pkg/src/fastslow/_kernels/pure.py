"""Pure numpy integrator backend.

Implements the same kernel API as the compiled extension, vectorized over the
member axis.  Step semantics (shared contract):

* ``amp == 0`` and ``em_drift`` false: classic fourth-order Runge-Kutta.
* ``amp > 0``: Euler-Maruyama; the fast state gains ``amp * sqrt(dt) * xi``
  per step with ``xi`` standard normal from the counter-based stream.
* ``em_drift`` true: Euler drift even for ``amp == 0`` (used when a
  deterministic reference path must share discretization with a noisy one).

``rec_steps`` is a sorted array of step indices to record; index ``k`` means
the state after ``k`` steps (``k = 0`` is the initial state).
"""

import numpy as np

from . import noise

# Soft cap on doubles held by one noise block; chunks are split when a batch
# would exceed it (re-drawing chunk prefixes is cheap next to stepping).
_BLOCK_DOUBLES = 1 << 25


def _noise_blocks(n_members, m, n_steps):
    """Yield (step0, block_len) pairs covering [0, n_steps)."""
    per_step = max(1, n_members * m)
    block = max(1, min(noise.CHUNK, _BLOCK_DOUBLES // per_step))
    step0 = 0
    while step0 < n_steps:
        # never straddle a chunk boundary
        in_chunk = noise.CHUNK - (step0 % noise.CHUNK)
        take = min(block, in_chunk, n_steps - step0)
        yield step0, take
        step0 += take


def _batch_noise(master, stream0, n_members, step0, n, m):
    out = np.empty((n_members, n, m))
    for i in range(n_members):
        out[i] = noise.normals(master, stream0 + i, step0, n, m)
    return out


class _Recorder:
    def __init__(self, rec_steps, arrays):
        self.rec_steps = np.asarray(rec_steps, dtype=np.int64)
        self.arrays = arrays
        self.pos = 0

    def record(self, step, *states):
        while self.pos < len(self.rec_steps) and self.rec_steps[self.pos] == step:
            for arr, state in zip(self.arrays, states):
                arr[:, self.pos] = state
            self.pos += 1


def _coupled_rhs(field, eps, X, Y):
    xdot = field.a(X, Y) + field.b(X, Y) / eps
    ydot = field.g(X, Y) / (eps * eps)
    if field.h is not None:
        ydot = ydot + field.h(X, Y) / eps
    if field.r is not None:
        ydot = ydot + field.r(X, Y)
    return xdot, ydot


def coupled_batch(field, X0, Y0, eps, amp, n_steps, dt, rec_steps, master, stream0):
    X = np.array(X0, dtype=float)
    Y = np.array(Y0, dtype=float)
    n = X.shape[0]
    rec_steps = np.asarray(rec_steps, dtype=np.int64)
    X_rec = np.empty((n, len(rec_steps), field.d))
    Y_rec = np.empty((n, len(rec_steps), field.m))
    rec = _Recorder(rec_steps, (X_rec, Y_rec))
    rec.record(0, X, Y)

    if amp == 0.0:
        for k in range(n_steps):
            k1x, k1y = _coupled_rhs(field, eps, X, Y)
            k2x, k2y = _coupled_rhs(field, eps, X + 0.5 * dt * k1x, Y + 0.5 * dt * k1y)
            k3x, k3y = _coupled_rhs(field, eps, X + 0.5 * dt * k2x, Y + 0.5 * dt * k2y)
            k4x, k4y = _coupled_rhs(field, eps, X + dt * k3x, Y + dt * k3y)
            X = X + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            Y = Y + (dt / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            _check_finite(X, Y, k, dt)
            rec.record(k + 1, X, Y)
        return X_rec, Y_rec

    scale = amp * np.sqrt(dt)
    for step0, nb in _noise_blocks(n, field.m, n_steps):
        xi = _batch_noise(master, stream0, n, step0, nb, field.m)
        for j in range(nb):
            k = step0 + j
            xdot, ydot = _coupled_rhs(field, eps, X, Y)
            X = X + dt * xdot
            Y = Y + dt * ydot + scale * xi[:, j]
            _check_finite(X, Y, k, dt)
            rec.record(k + 1, X, Y)
    return X_rec, Y_rec


def frozen_batch(field, x, Y0, amp, n_steps, dt, rec_steps, master, stream0,
                 em_drift=False):
    Y = np.array(Y0, dtype=float)
    n = Y.shape[0]
    x = np.asarray(x, dtype=float).reshape(1, field.d)
    rec_steps = np.asarray(rec_steps, dtype=np.int64)
    Y_rec = np.empty((n, len(rec_steps), field.m))
    rec = _Recorder(rec_steps, (Y_rec,))
    rec.record(0, Y)

    def g(Y):
        return field.g(x, Y)

    if amp == 0.0 and not em_drift:
        for k in range(n_steps):
            k1 = g(Y)
            k2 = g(Y + 0.5 * dt * k1)
            k3 = g(Y + 0.5 * dt * k2)
            k4 = g(Y + dt * k3)
            Y = Y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            _check_finite(Y, Y, k, dt)
            rec.record(k + 1, Y)
        return Y_rec

    scale = amp * np.sqrt(dt)
    for step0, nb in _noise_blocks(n, field.m, n_steps):
        xi = _batch_noise(master, stream0, n, step0, nb, field.m) if amp != 0.0 else None
        for j in range(nb):
            k = step0 + j
            Y = Y + dt * g(Y)
            if xi is not None:
                Y = Y + scale * xi[:, j]
            _check_finite(Y, Y, k, dt)
            rec.record(k + 1, Y)
    return Y_rec


def variational_batch(field, x, Y0, amp, n_steps, dt, rec_steps, master, stream0,
                      em_drift=False, want_jx=True, want_jy=False):
    Y = np.array(Y0, dtype=float)
    n = Y.shape[0]
    m, d = field.m, field.d
    x = np.asarray(x, dtype=float).reshape(1, d)
    JX = np.zeros((n, m, d))
    JY = np.broadcast_to(np.eye(m), (n, m, m)).copy()
    rec_steps = np.asarray(rec_steps, dtype=np.int64)
    Y_rec = np.empty((n, len(rec_steps), m))
    JX_rec = np.empty((n, len(rec_steps), m, d)) if want_jx else None
    JY_rec = np.empty((n, len(rec_steps), m, m)) if want_jy else None

    arrays, states = [Y_rec], None
    if want_jx:
        arrays.append(JX_rec)
    if want_jy:
        arrays.append(JY_rec)
    rec = _Recorder(rec_steps, tuple(arrays))

    def pack_states(Y, JX, JY):
        out = [Y]
        if want_jx:
            out.append(JX)
        if want_jy:
            out.append(JY)
        return out

    rec.record(0, *pack_states(Y, JX, JY))

    def g(Y):
        return field.g(x, Y)

    def jacs(Y):
        gx = field.g_jac_x(x, Y)
        gy = field.g_jac_y(x, Y)
        return gx, gy

    def full_rhs(Y, JX, JY):
        gx, gy = jacs(Y)
        dY = g(Y)
        dJX = gx + np.einsum("nij,njk->nik", gy, JX)
        dJY = np.einsum("nij,njk->nik", gy, JY)
        return dY, dJX, dJY

    if amp == 0.0 and not em_drift:
        for k in range(n_steps):
            k1 = full_rhs(Y, JX, JY)
            k2 = full_rhs(Y + 0.5 * dt * k1[0], JX + 0.5 * dt * k1[1], JY + 0.5 * dt * k1[2])
            k3 = full_rhs(Y + 0.5 * dt * k2[0], JX + 0.5 * dt * k2[1], JY + 0.5 * dt * k2[2])
            k4 = full_rhs(Y + dt * k3[0], JX + dt * k3[1], JY + dt * k3[2])
            Y = Y + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            JX = JX + (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            JY = JY + (dt / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            _check_finite(Y, JX, k, dt)
            rec.record(k + 1, *pack_states(Y, JX, JY))
        return Y_rec, JX_rec, JY_rec

    scale = amp * np.sqrt(dt)
    for step0, nb in _noise_blocks(n, m, n_steps):
        xi = _batch_noise(master, stream0, n, step0, nb, m) if amp != 0.0 else None
        for j in range(nb):
            k = step0 + j
            dY, dJX, dJY = full_rhs(Y, JX, JY)
            Y = Y + dt * dY
            if xi is not None:
                Y = Y + scale * xi[:, j]
            JX = JX + dt * dJX
            JY = JY + dt * dJY
            _check_finite(Y, JX, k, dt)
            rec.record(k + 1, *pack_states(Y, JX, JY))
    return Y_rec, JX_rec, JY_rec


def shift_sup_batch(field, x, y0, amps, n_steps, dt, master, streams):
    """Sup-norm gap between noisy and zero-noise paths sharing increments.

    All paths (including the zero-noise reference) use Euler drift so the
    gap is driven by the noise alone.  Returns shape (len(streams), len(amps)).
    """
    amps = np.asarray(amps, dtype=float)
    x = np.asarray(x, dtype=float).reshape(1, field.d)
    y0 = np.asarray(y0, dtype=float)
    out = np.empty((len(streams), len(amps)))
    sqdt = np.sqrt(dt)
    for si, stream in enumerate(streams):
        # row 0 is the zero-noise reference path
        Y = np.tile(y0, (len(amps) + 1, 1))
        scales = np.concatenate([[0.0], amps * sqdt])[:, None]
        sup = np.zeros(len(amps))
        for step0, nb in _noise_blocks(1, field.m, n_steps):
            xi = noise.normals(master, stream, step0, nb, field.m)
            for j in range(nb):
                Y = Y + dt * field.g(x, Y) + scales * xi[j]
                gap = np.max(np.abs(Y[1:] - Y[0]), axis=1)
                np.maximum(sup, gap, out=sup)
        out[si] = sup
    return out


def _check_finite(A, B, step, dt):
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise FloatingPointError(
            f"non-finite state at t={ (step + 1) * dt :.6g} (step {step + 1})")
