"""Fast-slow system definitions and built-in fixtures.

A system couples a slow variable x in R^d to a fast variable y (on the unit
torus or in R^m) through up to five vector fields:

    dx/dt = a(x,y) + (1/eps) b(x,y)
    dy/dt = (1/eps^2) g(x,y) + (1/eps) h(x,y) + r(x,y)

``h`` and ``r`` only appear in weakly-coupled systems, where ``g`` must not
depend on x.  Noise enters through the integrators, never through the fields.
"""

import hashlib
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._kernels import fields as _fields

GENERAL = "general"
WEAKLY_COUPLED = "weakly_coupled"
SKEW_PRODUCT = "skew_product"
COUPLING_CLASSES = (GENERAL, WEAKLY_COUPLED, SKEW_PRODUCT)

TORUS = "torus_unit"
UNBOUNDED = "unbounded"
FAST_SPACES = (TORUS, UNBOUNDED)

_PROBE_TOL = 1e-12
_FD_STEP = 1e-6


class SystemError(ValueError):
    """Raised when a system description violates its invariants."""


def _fd_jacobian(fn, wrt: int):
    """Central finite-difference Jacobian of fn(x, y) in argument ``wrt``."""

    def jac(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        base = np.asarray(fn(x, y), dtype=float)
        arg = (x, y)[wrt]
        n = arg.shape[-1]
        out = np.empty(base.shape + (n,))
        for j in range(n):
            h = _FD_STEP * (1.0 + np.abs(arg[..., j:j + 1]))
            hi = arg.copy()
            lo = arg.copy()
            hi[..., j:j + 1] += h
            lo[..., j:j + 1] -= h
            args_hi = (hi, y) if wrt == 0 else (x, hi)
            args_lo = (lo, y) if wrt == 0 else (x, lo)
            out[..., j] = (np.asarray(fn(*args_hi)) - np.asarray(fn(*args_lo))) / (2.0 * h)
        return out

    return jac


@dataclass(frozen=True, eq=False)
class VectorField:
    """One vector field of a fast-slow system with optional analytic Jacobians."""

    role: str
    fn: Callable
    jac_x: Optional[Callable] = None
    jac_y: Optional[Callable] = None

    @property
    def has_analytic_jacobians(self) -> bool:
        return self.jac_x is not None and self.jac_y is not None

    def jacobian_x(self, x, y):
        if self.jac_x is not None:
            return np.asarray(self.jac_x(x, y), dtype=float)
        return _fd_jacobian(self.fn, 0)(x, y)

    def jacobian_y(self, x, y):
        if self.jac_y is not None:
            return np.asarray(self.jac_y(x, y), dtype=float)
        return _fd_jacobian(self.fn, 1)(x, y)

    def __call__(self, x, y):
        return np.asarray(self.fn(x, y), dtype=float)


@dataclass(frozen=True, eq=False)
class FastSlowSystem:
    d: int
    m: int
    a: VectorField
    b: VectorField
    g: VectorField
    h: Optional[VectorField]
    r: Optional[VectorField]
    epsilon: float
    delta: float
    coupling_class: str
    fast_space: str
    field: _fields.FieldSpec
    name: str = "custom"
    reference_eta: np.ndarray = None

    def with_params(self, epsilon: float = None, delta: float = None) -> "FastSlowSystem":
        """Copy of this system with replaced scale parameters."""
        eps = self.epsilon if epsilon is None else float(epsilon)
        dlt = self.delta if delta is None else float(delta)
        if eps <= 0.0:
            raise SystemError("nonpositive epsilon")
        if dlt < 0.0:
            raise SystemError("negative delta")
        return replace(self, epsilon=eps, delta=dlt)

    def system_hash(self) -> str:
        ident = (self.name, self.d, self.m, self.coupling_class, self.fast_space,
                 f"{self.epsilon:.17g}", f"{self.delta:.17g}",
                 tuple(f"{p:.17g}" for p in self.field.params))
        return hashlib.sha256(repr(ident).encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class CaseStudy:
    """A system builder plus the reference data its study is checked against."""

    name: str
    build: Callable[..., FastSlowSystem]
    xi: np.ndarray
    eta: np.ndarray
    constants: dict
    description: str


@dataclass(eq=False)
class SystemSpec:
    """Structured description consumed by :func:`make_system`."""

    d: int
    m: int
    a: Callable
    b: Callable
    g: Callable
    h: Optional[Callable] = None
    r: Optional[Callable] = None
    epsilon: float = 1.0
    delta: float = 0.0
    coupling_class: str = GENERAL
    fast_space: str = TORUS
    a_jac_x: Optional[Callable] = None
    a_jac_y: Optional[Callable] = None
    b_jac_x: Optional[Callable] = None
    b_jac_y: Optional[Callable] = None
    g_jac_x: Optional[Callable] = None
    g_jac_y: Optional[Callable] = None
    reference_eta: Optional[np.ndarray] = None
    name: str = "custom"


def _probe(fn, x, y, want_dim, label):
    out = np.asarray(fn(x, y), dtype=float)
    if out.shape != (want_dim,):
        raise SystemError(
            f"dimension mismatch: {label}(x, y) returned shape {out.shape}, "
            f"expected ({want_dim},)")
    if not np.all(np.isfinite(out)):
        raise SystemError(f"{label}(x, y) returned non-finite values")
    return out


def make_system(spec: SystemSpec) -> FastSlowSystem:
    """Validate a system description and build a :class:`FastSlowSystem`.

    Checks dimension consistency, positivity of epsilon, and that systems
    tagged skew-product or weakly-coupled really have an x-independent fast
    drift (probed at two x values).
    """
    if spec.epsilon <= 0.0:
        raise SystemError("nonpositive epsilon")
    if spec.delta < 0.0:
        raise SystemError("negative delta")
    if spec.coupling_class not in COUPLING_CLASSES:
        raise SystemError(f"unknown coupling class {spec.coupling_class!r}")
    if spec.fast_space not in FAST_SPACES:
        raise SystemError(f"unknown fast space {spec.fast_space!r}")
    if spec.coupling_class in (SKEW_PRODUCT, GENERAL) and (spec.h or spec.r):
        raise SystemError("intermediate fields h, r require coupling_class weakly_coupled")

    eta = (np.zeros(spec.m) if spec.reference_eta is None
           else np.asarray(spec.reference_eta, dtype=float))
    if eta.shape != (spec.m,):
        raise SystemError("dimension mismatch: reference_eta")
    if spec.fast_space == TORUS and np.any((eta < 0.0) | (eta >= 1.0)):
        raise SystemError("reference_eta outside the unit torus")
    x0 = np.zeros(spec.d)

    _probe(spec.a, x0, eta, spec.d, "a")
    _probe(spec.b, x0, eta, spec.d, "b")
    _probe(spec.g, x0, eta, spec.m, "g")
    if spec.h is not None:
        _probe(spec.h, x0, eta, spec.m, "h")
    if spec.r is not None:
        _probe(spec.r, x0, eta, spec.m, "r")

    if spec.coupling_class in (SKEW_PRODUCT, WEAKLY_COUPLED):
        for y_probe in (eta, eta + 0.378419):
            g0 = np.asarray(spec.g(np.zeros(spec.d), y_probe), dtype=float)
            g1 = np.asarray(spec.g(np.ones(spec.d), y_probe), dtype=float)
            if np.max(np.abs(g1 - g0)) > _PROBE_TOL:
                raise SystemError("x-dependent fast drift")

    g_jac_x = spec.g_jac_x if spec.g_jac_x is not None else _fd_jacobian(spec.g, 0)
    g_jac_y = spec.g_jac_y if spec.g_jac_y is not None else _fd_jacobian(spec.g, 1)
    fieldspec = _fields.callable_field(spec.d, spec.m, spec.a, spec.b, spec.g,
                                       spec.h, spec.r, g_jac_x, g_jac_y)
    return FastSlowSystem(
        d=spec.d, m=spec.m,
        a=VectorField("slow_drift", spec.a, spec.a_jac_x, spec.a_jac_y),
        b=VectorField("fast_coupling", spec.b, spec.b_jac_x, spec.b_jac_y),
        g=VectorField("fast_drift", spec.g, spec.g_jac_x, spec.g_jac_y),
        h=VectorField("intermediate", spec.h) if spec.h is not None else None,
        r=VectorField("slow_scale_fast", spec.r) if spec.r is not None else None,
        epsilon=float(spec.epsilon), delta=float(spec.delta),
        coupling_class=spec.coupling_class, fast_space=spec.fast_space,
        field=fieldspec, name=spec.name, reference_eta=eta)


# ---------------------------------------------------------------------------
# built-in fixtures (compiled field kinds)
# ---------------------------------------------------------------------------

def trig_torus_system(epsilon: float = 1.0, delta: float = 0.0,
                      name: str = "trig_torus", reference_eta: float = 0.0,
                      **coeffs: float) -> FastSlowSystem:
    """Torus family with trigonometric fields, the compile-time extension point.

    Coefficient slots (all default 0):
      a = aX*x + aS*sin(2 pi y) + aC*cos(2 pi y) + a0
      b = (bXS*x + bS)*sin(2 pi y) + bC*cos(2 pi y)
      g = g0 + gS*sin(2 pi y)
      h = hS*sin(2 pi y) + hC*cos(2 pi y)
      r = rX*x
    Runs on the compiled backend when available.
    """
    if epsilon <= 0.0:
        raise SystemError("nonpositive epsilon")
    if delta < 0.0:
        raise SystemError("negative delta")
    params = _fields.trig_params(**coeffs)
    fs = _fields.trig_field(params)
    has_h = params[9] != 0.0 or params[10] != 0.0
    has_r = params[11] != 0.0
    cls = WEAKLY_COUPLED if (has_h or has_r) else SKEW_PRODUCT
    return FastSlowSystem(
        d=1, m=1,
        a=VectorField("slow_drift", fs.a, jac_x=_trig_a_jac_x(params),
                      jac_y=_trig_a_jac_y(params)),
        b=VectorField("fast_coupling", fs.b, jac_x=_trig_b_jac_x(params),
                      jac_y=_trig_b_jac_y(params)),
        g=VectorField("fast_drift", fs.g, jac_x=fs.g_jac_x, jac_y=fs.g_jac_y),
        h=VectorField("intermediate", fs.h, jac_x=_zero_jac(1),
                      jac_y=_trig_h_jac_y(params)) if has_h else None,
        r=VectorField("slow_scale_fast", fs.r) if has_r else None,
        epsilon=float(epsilon), delta=float(delta),
        coupling_class=cls, fast_space=TORUS, field=fs, name=name,
        reference_eta=np.array([float(reference_eta)]))


def _zero_jac(n):
    def jac(x, y):
        return np.zeros(np.asarray(y).shape[:-1] + (n, n))
    return jac


def _trig_a_jac_x(p):
    def jac(x, y):
        return np.full(np.asarray(y).shape[:-1] + (1, 1), p[0])
    return jac


def _trig_a_jac_y(p):
    w = _fields.TWO_PI

    def jac(x, y):
        y = np.asarray(y)
        return (w * (p[1] * np.cos(w * y) - p[2] * np.sin(w * y)))[..., None]
    return jac


def _trig_b_jac_x(p):
    w = _fields.TWO_PI

    def jac(x, y):
        y = np.asarray(y)
        return (p[4] * np.sin(w * y))[..., None]
    return jac


def _trig_b_jac_y(p):
    w = _fields.TWO_PI

    def jac(x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return (w * ((p[4] * x + p[5]) * np.cos(w * y) - p[6] * np.sin(w * y)))[..., None]
    return jac


def _trig_h_jac_y(p):
    w = _fields.TWO_PI

    def jac(x, y):
        y = np.asarray(y)
        return (w * (p[9] * np.cos(w * y) - p[10] * np.sin(w * y)))[..., None]
    return jac


def heat_torus_system(delta: float) -> FastSlowSystem:
    """Analytic test fixture: pure-noise fast dynamics on the unit torus.

    a = -x, b = sin(2 pi y), g = 0.  The stationary fast density is uniform,
    so the centering condition holds exactly and every homogenized
    coefficient has a closed form.
    """
    if delta <= 0.0:
        raise SystemError("nonpositive delta")
    return trig_torus_system(delta=delta, name="heat_torus", aX=-1.0, bS=1.0)


LORENZ_REFERENCE_ETA = np.array([13.93, 20.06, 26.87])


def lorenz_system(epsilon: float, delta: float = 0.0) -> FastSlowSystem:
    """Weakly-coupled system driven by the classical Lorenz equations.

    d = 1, m = 3: a = -x, b = (4/90) y2, fast drift the Lorenz field with
    s = 10, rho = 28, beta = 8/3, h = 0, r = (x y3, -x, x y1 y2).  Integrated
    in R^3 (not wrapped to a torus).
    """
    if epsilon <= 0.0:
        raise SystemError("nonpositive epsilon")
    if delta < 0.0:
        raise SystemError("negative delta")
    params = _fields.lorenz_params()
    fs = _fields.lorenz_field(params)
    c = params[3]

    def b_jac_x(x, y):
        return np.zeros(np.asarray(y).shape[:-1] + (1, 1))

    def b_jac_y(x, y):
        y = np.asarray(y)
        out = np.zeros(y.shape[:-1] + (1, 3))
        out[..., 0, 1] = c
        return out

    def a_jac_x(x, y):
        return np.full(np.asarray(y).shape[:-1] + (1, 1), -1.0)

    def a_jac_y(x, y):
        return np.zeros(np.asarray(y).shape[:-1] + (1, 3))

    return FastSlowSystem(
        d=1, m=3,
        a=VectorField("slow_drift", fs.a, jac_x=a_jac_x, jac_y=a_jac_y),
        b=VectorField("fast_coupling", fs.b, jac_x=b_jac_x, jac_y=b_jac_y),
        g=VectorField("fast_drift", fs.g, jac_x=fs.g_jac_x, jac_y=fs.g_jac_y),
        h=None,
        r=VectorField("slow_scale_fast", fs.r),
        epsilon=float(epsilon), delta=float(delta),
        coupling_class=WEAKLY_COUPLED, fast_space=UNBOUNDED, field=fs,
        name="lorenz", reference_eta=LORENZ_REFERENCE_ETA.copy())


def evaluate_rhs(system: FastSlowSystem, x, y):
    """Deterministic right-hand side (slow rate, fast rate) at one point.

    slow = a + b/eps, fast = g/eps^2 + h/eps + r; noise is added by the
    integrators, never here.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise SystemError("non-finite state")
    eps = system.epsilon
    slow = system.a(x, y) + system.b(x, y) / eps
    fast = system.g(x, y) / eps ** 2
    if system.h is not None:
        fast = fast + system.h(x, y) / eps
    if system.r is not None:
        fast = fast + system.r(x, y)
    if not (np.all(np.isfinite(slow)) and np.all(np.isfinite(fast))):
        raise SystemError("non-finite evaluation")
    return slow, fast


def wrap_torus(y):
    """Map fast states to the fundamental domain [0, 1)^m (read-only view)."""
    return np.mod(y, 1.0)


# ---------------------------------------------------------------------------
# case studies and config loading
# ---------------------------------------------------------------------------

def lorenz_case_study() -> CaseStudy:
    return CaseStudy(
        name="lorenz",
        build=lorenz_system,
        xi=np.array([0.0]),
        eta=LORENZ_REFERENCE_ETA.copy(),
        constants={"sigma2": 0.126},
        description=("Lorenz-driven weakly-coupled system whose slow variable "
                     "converges to an Ornstein-Uhlenbeck process with "
                     "sigma^2 about 0.126."))


def heat_case_study() -> CaseStudy:
    a0 = 1.0 / (2.0 * np.pi ** 2)
    return CaseStudy(
        name="heat_torus",
        build=lambda epsilon=1.0, delta=1.0: heat_torus_system(delta).with_params(epsilon=epsilon),
        xi=np.array([0.0]),
        eta=np.array([0.0]),
        constants={"A0": a0, "F0_at_x1": a0 / 2.0, "corr_rate": 2.0 * np.pi ** 2},
        description=("Pure-noise torus fixture with uniform stationary "
                     "density; all homogenized coefficients are analytic."))


CASE_STUDIES = {"lorenz": lorenz_case_study, "heat_torus": heat_case_study}

_FIXTURES = {
    "lorenz": lambda epsilon=1.0, delta=0.0, **kw: lorenz_system(epsilon, delta),
    "heat_torus": lambda epsilon=1.0, delta=1.0, **kw: heat_torus_system(delta).with_params(epsilon=epsilon),
    "trig_torus": lambda epsilon=1.0, delta=0.0, **kw: trig_torus_system(epsilon, delta, **kw),
}


def system_from_config(cfg: dict) -> FastSlowSystem:
    """Build a named fixture from a configuration table.

    ``cfg`` must contain ``fixture`` naming a built-in; remaining keys are
    parameter overrides (epsilon, delta, and coefficient slots for the trig
    family).
    """
    cfg = dict(cfg)
    try:
        fixture = cfg.pop("fixture")
    except KeyError:
        raise SystemError("system table requires a 'fixture' name") from None
    try:
        builder = _FIXTURES[fixture]
    except KeyError:
        raise SystemError(
            f"unknown fixture {fixture!r}; built-ins: {sorted(_FIXTURES)}") from None
    try:
        return builder(**cfg)
    except TypeError as exc:
        raise SystemError(f"bad parameters for fixture {fixture!r}: {exc}") from None
