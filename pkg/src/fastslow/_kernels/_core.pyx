# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled integrator kernels for the built-in field kinds.

Mirrors the step semantics of the pure backend (see pure.py); the wrappers
here accept the same arguments and return the same arrays.  Only fields with
``kind != KIND_CALLABLE`` are supported; dispatch happens one level up.
"""

import numpy as np

from . import noise as _noise

from libc.math cimport sin, cos

DEF MAXD = 8

cdef double TWO_PI = 6.283185307179586476925287
cdef int KIND_TRIG = 1
cdef int KIND_LORENZ = 2


# ---------------------------------------------------------------------------
# field evaluation (kept in lockstep with fields.py)
# ---------------------------------------------------------------------------

cdef inline void f_a(int kind, const double* p, const double* x, const double* y,
                     double* out) noexcept nogil:
    if kind == KIND_TRIG:
        out[0] = p[0] * x[0] + (p[1] * sin(TWO_PI * y[0]) + p[2] * cos(TWO_PI * y[0]) + p[3])
    else:
        out[0] = -x[0]


cdef inline void f_b(int kind, const double* p, const double* x, const double* y,
                     double* out) noexcept nogil:
    if kind == KIND_TRIG:
        out[0] = (p[4] * x[0] + p[5]) * sin(TWO_PI * y[0]) + p[6] * cos(TWO_PI * y[0])
    else:
        out[0] = p[3] * y[1]


cdef inline void f_g(int kind, const double* p, const double* x, const double* y,
                     double* out) noexcept nogil:
    if kind == KIND_TRIG:
        out[0] = p[7] + p[8] * sin(TWO_PI * y[0])
    else:
        out[0] = p[0] * (y[1] - y[0])
        out[1] = p[1] * y[0] - y[1] - y[0] * y[2]
        out[2] = y[0] * y[1] - p[2] * y[2]


cdef inline void f_h(int kind, const double* p, const double* x, const double* y,
                     double* out) noexcept nogil:
    # LORENZ has no intermediate coupling
    if kind == KIND_TRIG:
        out[0] = p[9] * sin(TWO_PI * y[0]) + p[10] * cos(TWO_PI * y[0])
    else:
        out[0] = 0.0
        out[1] = 0.0
        out[2] = 0.0


cdef inline void f_r(int kind, const double* p, const double* x, const double* y,
                     double* out) noexcept nogil:
    if kind == KIND_TRIG:
        out[0] = p[11] * x[0]
    else:
        out[0] = x[0] * y[2]
        out[1] = -x[0]
        out[2] = x[0] * y[0] * y[1]


cdef inline void coupled_rhs(int kind, const double* p, int d, int m,
                             double eps, const double* x, const double* y,
                             double* xdot, double* ydot) noexcept nogil:
    cdef double buf[MAXD]
    cdef double eps2 = eps * eps
    cdef int i
    f_a(kind, p, x, y, xdot)
    f_b(kind, p, x, y, buf)
    for i in range(d):
        xdot[i] = xdot[i] + buf[i] / eps
    f_g(kind, p, x, y, ydot)
    for i in range(m):
        ydot[i] = ydot[i] / eps2
    f_h(kind, p, x, y, buf)
    for i in range(m):
        ydot[i] = ydot[i] + buf[i] / eps
    f_r(kind, p, x, y, buf)
    for i in range(m):
        ydot[i] = ydot[i] + buf[i]


cdef inline bint not_finite(const double* v, int n) noexcept nogil:
    cdef int i
    for i in range(n):
        if v[i] != v[i] or v[i] > 1e308 or v[i] < -1e308:
            return True
    return False


# ---------------------------------------------------------------------------
# coupled fast-slow system
# ---------------------------------------------------------------------------

cdef long long rk4_coupled_run(int kind, const double* p, int d, int m, double eps,
                               double dt, long long n_steps,
                               double* x, double* y,
                               const long long* rec, long long n_rec, long long* pos,
                               double* xrec, double* yrec) noexcept nogil:
    cdef double k1x[MAXD]
    cdef double k1y[MAXD]
    cdef double k2x[MAXD]
    cdef double k2y[MAXD]
    cdef double k3x[MAXD]
    cdef double k3y[MAXD]
    cdef double k4x[MAXD]
    cdef double k4y[MAXD]
    cdef double tx[MAXD]
    cdef double ty[MAXD]
    cdef double acc
    cdef long long k
    cdef int i
    for k in range(n_steps):
        coupled_rhs(kind, p, d, m, eps, x, y, k1x, k1y)
        for i in range(d):
            tx[i] = x[i] + 0.5 * dt * k1x[i]
        for i in range(m):
            ty[i] = y[i] + 0.5 * dt * k1y[i]
        coupled_rhs(kind, p, d, m, eps, tx, ty, k2x, k2y)
        for i in range(d):
            tx[i] = x[i] + 0.5 * dt * k2x[i]
        for i in range(m):
            ty[i] = y[i] + 0.5 * dt * k2y[i]
        coupled_rhs(kind, p, d, m, eps, tx, ty, k3x, k3y)
        for i in range(d):
            tx[i] = x[i] + dt * k3x[i]
        for i in range(m):
            ty[i] = y[i] + dt * k3y[i]
        coupled_rhs(kind, p, d, m, eps, tx, ty, k4x, k4y)
        for i in range(d):
            acc = k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]
            x[i] = x[i] + (dt / 6.0) * acc
        for i in range(m):
            acc = k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]
            y[i] = y[i] + (dt / 6.0) * acc
        if not_finite(x, d) or not_finite(y, m):
            return k + 1
        if pos[0] < n_rec and rec[pos[0]] == k + 1:
            for i in range(d):
                xrec[pos[0] * d + i] = x[i]
            for i in range(m):
                yrec[pos[0] * m + i] = y[i]
            pos[0] += 1
    return 0


cdef long long em_coupled_chunk(int kind, const double* p, int d, int m, double eps,
                                double dt, double scale, long long step0, long long nb,
                                const double* xi,
                                double* x, double* y,
                                const long long* rec, long long n_rec, long long* pos,
                                double* xrec, double* yrec) noexcept nogil:
    cdef double xdot[MAXD]
    cdef double ydot[MAXD]
    cdef long long j, k
    cdef int i
    for j in range(nb):
        k = step0 + j
        coupled_rhs(kind, p, d, m, eps, x, y, xdot, ydot)
        for i in range(d):
            x[i] = x[i] + dt * xdot[i]
        for i in range(m):
            y[i] = (y[i] + dt * ydot[i]) + scale * xi[j * m + i]
        if not_finite(x, d) or not_finite(y, m):
            return k + 1
        if pos[0] < n_rec and rec[pos[0]] == k + 1:
            for i in range(d):
                xrec[pos[0] * d + i] = x[i]
            for i in range(m):
                yrec[pos[0] * m + i] = y[i]
            pos[0] += 1
    return 0


def coupled_batch(field, X0, Y0, double eps, double amp, long long n_steps,
                  double dt, rec_steps, master, stream0):
    cdef int kind = field.kind
    cdef int d = field.d
    cdef int m = field.m
    if d > MAXD or m > MAXD:
        raise ValueError("compiled backend supports at most 8 state components")
    cdef double[::1] params = np.ascontiguousarray(field.params, dtype=np.float64)
    X = np.array(X0, dtype=np.float64)
    Y = np.array(Y0, dtype=np.float64)
    cdef double[:, ::1] X0v = np.ascontiguousarray(X)
    cdef double[:, ::1] Y0v = np.ascontiguousarray(Y)
    cdef long long N = X0v.shape[0]
    rec = np.asarray(rec_steps, dtype=np.int64)
    cdef long long[::1] recv = np.ascontiguousarray(rec)
    cdef long long R = recv.shape[0]
    X_rec = np.empty((N, R, d))
    Y_rec = np.empty((N, R, m))
    cdef double[:, :, ::1] Xr = X_rec
    cdef double[:, :, ::1] Yr = Y_rec
    cdef double xs[MAXD]
    cdef double ys[MAXD]
    cdef long long i, pos, status, step0, nb
    cdef int j
    cdef double scale = amp * np.sqrt(dt)
    cdef double[:, ::1] xi
    cdef const double* pp = &params[0]
    cdef const long long* rp = &recv[0] if R > 0 else NULL

    for i in range(N):
        for j in range(d):
            xs[j] = X0v[i, j]
        for j in range(m):
            ys[j] = Y0v[i, j]
        pos = 0
        while pos < R and recv[pos] == 0:
            for j in range(d):
                Xr[i, pos, j] = xs[j]
            for j in range(m):
                Yr[i, pos, j] = ys[j]
            pos += 1
        status = 0
        if amp == 0.0:
            with nogil:
                status = rk4_coupled_run(kind, pp, d, m, eps, dt, n_steps, xs, ys,
                                         rp, R, &pos, &Xr[i, 0, 0], &Yr[i, 0, 0])
        else:
            for step0, nb in _chunks(n_steps):
                xi = _noise.normals(master, stream0 + i, step0, nb, m)
                with nogil:
                    status = em_coupled_chunk(kind, pp, d, m, eps, dt, scale,
                                              step0, nb, &xi[0, 0], xs, ys,
                                              rp, R, &pos, &Xr[i, 0, 0], &Yr[i, 0, 0])
                if status:
                    break
        if status:
            _raise_blowup(status, dt)
    return X_rec, Y_rec


# ---------------------------------------------------------------------------
# frozen fast flow
# ---------------------------------------------------------------------------

cdef long long rk4_frozen_run(int kind, const double* p, int d, int m,
                              double dt, long long n_steps,
                              const double* x, double* y,
                              const long long* rec, long long n_rec, long long* pos,
                              double* yrec) noexcept nogil:
    cdef double k1[MAXD]
    cdef double k2[MAXD]
    cdef double k3[MAXD]
    cdef double k4[MAXD]
    cdef double ty[MAXD]
    cdef double acc
    cdef long long k
    cdef int i
    for k in range(n_steps):
        f_g(kind, p, x, y, k1)
        for i in range(m):
            ty[i] = y[i] + 0.5 * dt * k1[i]
        f_g(kind, p, x, ty, k2)
        for i in range(m):
            ty[i] = y[i] + 0.5 * dt * k2[i]
        f_g(kind, p, x, ty, k3)
        for i in range(m):
            ty[i] = y[i] + dt * k3[i]
        f_g(kind, p, x, ty, k4)
        for i in range(m):
            acc = k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]
            y[i] = y[i] + (dt / 6.0) * acc
        if not_finite(y, m):
            return k + 1
        if pos[0] < n_rec and rec[pos[0]] == k + 1:
            for i in range(m):
                yrec[pos[0] * m + i] = y[i]
            pos[0] += 1
    return 0


cdef long long em_frozen_chunk(int kind, const double* p, int d, int m,
                               double dt, double scale, long long step0, long long nb,
                               const double* xi,
                               const double* x, double* y,
                               const long long* rec, long long n_rec, long long* pos,
                               double* yrec) noexcept nogil:
    cdef double gv[MAXD]
    cdef long long j, k
    cdef int i
    for j in range(nb):
        k = step0 + j
        f_g(kind, p, x, y, gv)
        for i in range(m):
            y[i] = y[i] + dt * gv[i]
        if scale != 0.0:
            for i in range(m):
                y[i] = y[i] + scale * xi[j * m + i]
        if not_finite(y, m):
            return k + 1
        if pos[0] < n_rec and rec[pos[0]] == k + 1:
            for i in range(m):
                yrec[pos[0] * m + i] = y[i]
            pos[0] += 1
    return 0


def frozen_batch(field, x, Y0, double amp, long long n_steps, double dt,
                 rec_steps, master, stream0, em_drift=False):
    cdef int kind = field.kind
    cdef int d = field.d
    cdef int m = field.m
    if d > MAXD or m > MAXD:
        raise ValueError("compiled backend supports at most 8 state components")
    cdef double[::1] params = np.ascontiguousarray(field.params, dtype=np.float64)
    cdef double[::1] xv = np.ascontiguousarray(np.asarray(x, dtype=np.float64).reshape(d))
    Y = np.array(Y0, dtype=np.float64)
    cdef double[:, ::1] Y0v = np.ascontiguousarray(Y)
    cdef long long N = Y0v.shape[0]
    rec = np.asarray(rec_steps, dtype=np.int64)
    cdef long long[::1] recv = np.ascontiguousarray(rec)
    cdef long long R = recv.shape[0]
    Y_rec = np.empty((N, R, m))
    cdef double[:, :, ::1] Yr = Y_rec
    cdef double ys[MAXD]
    cdef long long i, pos, status, step0, nb
    cdef int j
    cdef bint em = bool(em_drift)
    cdef double scale = amp * np.sqrt(dt)
    cdef double[:, ::1] xi
    cdef const double* pp = &params[0]
    cdef const long long* rp = &recv[0] if R > 0 else NULL

    for i in range(N):
        for j in range(m):
            ys[j] = Y0v[i, j]
        pos = 0
        while pos < R and recv[pos] == 0:
            for j in range(m):
                Yr[i, pos, j] = ys[j]
            pos += 1
        status = 0
        if amp == 0.0 and not em:
            with nogil:
                status = rk4_frozen_run(kind, pp, d, m, dt, n_steps, &xv[0], ys,
                                        rp, R, &pos, &Yr[i, 0, 0])
        elif amp == 0.0:
            with nogil:
                status = em_frozen_chunk(kind, pp, d, m, dt, 0.0, 0, n_steps,
                                         NULL, &xv[0], ys, rp, R, &pos, &Yr[i, 0, 0])
        else:
            for step0, nb in _chunks(n_steps):
                xi = _noise.normals(master, stream0 + i, step0, nb, m)
                with nogil:
                    status = em_frozen_chunk(kind, pp, d, m, dt, scale, step0, nb,
                                             &xi[0, 0], &xv[0], ys,
                                             rp, R, &pos, &Yr[i, 0, 0])
                if status:
                    break
        if status:
            _raise_blowup(status, dt)
    return Y_rec


# ---------------------------------------------------------------------------
# noisy-vs-deterministic gap (shared increments, Euler drift everywhere)
# ---------------------------------------------------------------------------

cdef long long shift_chunk(int kind, const double* p, int d, int m, int n_amps,
                           double dt, const double* scales, long long nb,
                           const double* xi, const double* x,
                           double* Y, double* sup) noexcept nogil:
    # Y holds n_amps + 1 states of size m; row 0 is the zero-noise reference.
    cdef double gv[MAXD]
    cdef long long j
    cdef int q, i
    cdef double gap, diff
    for j in range(nb):
        for q in range(n_amps + 1):
            f_g(kind, p, x, Y + q * m, gv)
            for i in range(m):
                Y[q * m + i] = (Y[q * m + i] + dt * gv[i]) + scales[q] * xi[j * m + i]
        if not_finite(Y, (n_amps + 1) * m):
            return j + 1
        for q in range(n_amps):
            gap = 0.0
            for i in range(m):
                diff = Y[(q + 1) * m + i] - Y[i]
                if diff < 0.0:
                    diff = -diff
                if diff > gap:
                    gap = diff
            if gap > sup[q]:
                sup[q] = gap
    return 0


def shift_sup_batch(field, x, y0, amps, long long n_steps, double dt, master, streams):
    cdef int kind = field.kind
    cdef int d = field.d
    cdef int m = field.m
    amps_arr = np.asarray(amps, dtype=np.float64)
    cdef int K = amps_arr.shape[0]
    if (K + 1) * m > 64:
        raise ValueError("too many noise amplitudes for the compiled backend")
    cdef double[::1] params = np.ascontiguousarray(field.params, dtype=np.float64)
    cdef double[::1] xv = np.ascontiguousarray(np.asarray(x, dtype=np.float64).reshape(d))
    cdef double[::1] y0v = np.ascontiguousarray(np.asarray(y0, dtype=np.float64).reshape(m))
    out = np.empty((len(streams), K))
    cdef double[:, ::1] outv = out
    cdef double Ybuf[64]
    cdef double scbuf[16]
    cdef double supbuf[16]
    cdef double sqdt = np.sqrt(dt)
    cdef long long status, step0, nb
    cdef int q, i, si
    cdef double[:, ::1] xi
    cdef const double* pp = &params[0]

    scbuf[0] = 0.0
    for q in range(K):
        scbuf[q + 1] = amps_arr[q] * sqdt
    for si in range(len(streams)):
        stream = streams[si]
        for q in range(K + 1):
            for i in range(m):
                Ybuf[q * m + i] = y0v[i]
        for q in range(K):
            supbuf[q] = 0.0
        for step0, nb in _chunks(n_steps):
            xi = _noise.normals(master, stream, step0, nb, m)
            with nogil:
                status = shift_chunk(kind, pp, d, m, K, dt, scbuf, nb,
                                     &xi[0, 0], &xv[0], Ybuf, supbuf)
            if status:
                _raise_blowup(step0 + status, dt)
        for q in range(K):
            outv[si, q] = supbuf[q]
    return out


def _chunks(long long n_steps):
    cdef long long step0 = 0
    out = []
    while step0 < n_steps:
        take = min(_noise.CHUNK, n_steps - step0)
        out.append((step0, take))
        step0 += take
    return out


def _raise_blowup(long long step, double dt):
    raise FloatingPointError(
        f"non-finite state at t={step * dt:.6g} (step {step})")
