"""Integrator kernels: compiled extension with a pure numpy fallback.

The compiled core is selected at import when available; set the environment
variable ``FASTSLOW_PURE=1`` to force the numpy backend.  Systems built from
arbitrary Python callables always run on the pure backend regardless of the
selected core.
"""

import os

from . import pure

_compiled = None
if not os.environ.get("FASTSLOW_PURE"):
    try:
        from . import _core as _compiled
    except ImportError:
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "pure"


def _impl(field):
    if _compiled is not None and field.compiled_ok():
        return _compiled
    return pure


def coupled_batch(field, X0, Y0, eps, amp, n_steps, dt, rec_steps, master, stream0):
    return _impl(field).coupled_batch(field, X0, Y0, eps, amp, n_steps, dt,
                                      rec_steps, master, stream0)


def frozen_batch(field, x, Y0, amp, n_steps, dt, rec_steps, master, stream0,
                 em_drift=False):
    return _impl(field).frozen_batch(field, x, Y0, amp, n_steps, dt, rec_steps,
                                     master, stream0, em_drift)


def variational_batch(field, x, Y0, amp, n_steps, dt, rec_steps, master, stream0,
                      em_drift=False, want_jx=True, want_jy=False):
    # tangent flows are numpy-vectorized over members; their cost is dominated
    # by the compiled base-path runs
    return pure.variational_batch(field, x, Y0, amp, n_steps, dt, rec_steps,
                                  master, stream0, em_drift, want_jx, want_jy)


def shift_sup_batch(field, x, y0, amps, n_steps, dt, master, streams):
    return _impl(field).shift_sup_batch(field, x, y0, amps, n_steps, dt,
                                        master, streams)
