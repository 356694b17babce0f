"""Field descriptions shared by the compiled and pure integrator backends.

A :class:`FieldSpec` bundles the right-hand-side callables of a fast-slow
system with an integer ``kind`` tag.  Built-in kinds (:data:`KIND_TRIG`,
:data:`KIND_LORENZ`) additionally carry a flat parameter vector so the
compiled backend can evaluate them without touching Python; the reference
numpy implementations below are the single source of truth for what each
parameter means.  ``KIND_CALLABLE`` systems always run on the pure backend.

All evaluators are vectorized over a leading batch axis: ``x`` has shape
``(..., d)``, ``y`` has shape ``(..., m)``, returns follow suit.  Jacobians
return ``(..., out_dim, d)`` / ``(..., out_dim, m)``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

KIND_CALLABLE = 0
KIND_TRIG = 1
KIND_LORENZ = 2

TWO_PI = 2.0 * np.pi

# Parameter slots for KIND_TRIG (d = m = 1, fast space = unit torus):
#   a(x,y) = aX*x + aS*sin(2πy) + aC*cos(2πy) + a0
#   b(x,y) = (bXS*x + bS)*sin(2πy) + bC*cos(2πy)
#   g(x,y) = g0 + gS*sin(2πy)
#   h(x,y) = hS*sin(2πy) + hC*cos(2πy)
#   r(x,y) = rX*x
TRIG_SLOTS = ("aX", "aS", "aC", "a0", "bXS", "bS", "bC", "g0", "gS", "hS", "hC", "rX")

# Parameter slots for KIND_LORENZ (d = 1, m = 3, unbounded fast space):
#   a = -x, b = c*y2, g = classic Lorenz drift with (s, rho, beta),
#   h = 0, r = (x*y3, -x, x*y1*y2)
LORENZ_SLOTS = ("s", "rho", "beta", "c")


@dataclass(frozen=True)
class FieldSpec:
    kind: int
    d: int
    m: int
    params: np.ndarray
    a: Callable
    b: Callable
    g: Callable
    h: Optional[Callable] = None
    r: Optional[Callable] = None
    g_jac_x: Optional[Callable] = None
    g_jac_y: Optional[Callable] = None

    def compiled_ok(self) -> bool:
        return self.kind != KIND_CALLABLE


def trig_params(**coeffs: float) -> np.ndarray:
    unknown = set(coeffs) - set(TRIG_SLOTS)
    if unknown:
        raise ValueError(f"unknown trig coefficients: {sorted(unknown)}")
    return np.array([float(coeffs.get(name, 0.0)) for name in TRIG_SLOTS])


def trig_field(params: np.ndarray) -> FieldSpec:
    aX, aS, aC, a0, bXS, bS, bC, g0, gS, hS, hC, rX = params

    def a(x, y):
        return aX * x + (aS * np.sin(TWO_PI * y) + aC * np.cos(TWO_PI * y) + a0)

    def b(x, y):
        return (bXS * x + bS) * np.sin(TWO_PI * y) + bC * np.cos(TWO_PI * y)

    def g(x, y):
        return g0 + gS * np.sin(TWO_PI * y) + 0.0 * y

    def h(x, y):
        return hS * np.sin(TWO_PI * y) + hC * np.cos(TWO_PI * y)

    def r(x, y):
        return rX * x + 0.0 * y

    def g_jac_x(x, y):
        return np.zeros(y.shape + (1,))

    def g_jac_y(x, y):
        return (TWO_PI * gS * np.cos(TWO_PI * y))[..., None]

    return FieldSpec(KIND_TRIG, 1, 1, np.asarray(params, dtype=float),
                     a, b, g, h, r, g_jac_x, g_jac_y)


def lorenz_params(s: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0,
                  c: float = 4.0 / 90.0) -> np.ndarray:
    return np.array([s, rho, beta, c], dtype=float)


def lorenz_field(params: np.ndarray) -> FieldSpec:
    s, rho, beta, c = params

    def a(x, y):
        return -x

    def b(x, y):
        return c * y[..., 1:2]

    def g(x, y):
        y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
        return np.stack([s * (y2 - y1), rho * y1 - y2 - y1 * y3, y1 * y2 - beta * y3],
                        axis=-1)

    def r(x, y):
        y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
        x0 = x[..., 0]
        return np.stack([x0 * y3, -x0, x0 * y1 * y2], axis=-1)

    def g_jac_x(x, y):
        return np.zeros(y.shape[:-1] + (3, 1))

    def g_jac_y(x, y):
        y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
        zero = np.zeros_like(y1)
        one = np.ones_like(y1)
        row1 = np.stack([-s * one, s * one, zero], axis=-1)
        row2 = np.stack([rho - y3, -one, -y1], axis=-1)
        row3 = np.stack([y2, y1, -beta * one], axis=-1)
        return np.stack([row1, row2, row3], axis=-2)

    return FieldSpec(KIND_LORENZ, 1, 3, np.asarray(params, dtype=float),
                     a, b, g, None, r, g_jac_x, g_jac_y)


def callable_field(d: int, m: int, a: Callable, b: Callable, g: Callable,
                   h: Optional[Callable] = None, r: Optional[Callable] = None,
                   g_jac_x: Optional[Callable] = None,
                   g_jac_y: Optional[Callable] = None) -> FieldSpec:
    return FieldSpec(KIND_CALLABLE, d, m, np.empty(0), a, b, g, h, r,
                     g_jac_x, g_jac_y)
