"""Domain types for vector fields, class-K gauges and Lyapunov pairs.

Fields and Lyapunov functions act on arrays of shape ``(..., n)`` so that
certification grids can be evaluated in one call. Black-box evaluators
that only accept a single point set ``vectorized=False``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, NotInvertible, QuadratureFailure, UndefinedAtPoint

Array = np.ndarray


class Regularity(enum.Enum):
    SMOOTH = "smooth"
    LIPSCHITZ_OFF_ORIGIN = "lipschitz_off_origin"
    SET_VALUED_AT_ORIGIN = "set_valued_at_origin"


def _apply_rowwise(fn, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.asarray(fn(x), dtype=float)
    flat = x.reshape(-1, x.shape[-1])
    out = [np.asarray(fn(row), dtype=float) for row in flat]
    return np.stack(out).reshape(x.shape[:-1] + out[0].shape)


@dataclass(frozen=True)
class FieldDescription:
    """A vector field on R^n.

    ``discontinuities`` lists the points (1D only) where the field jumps;
    they are excluded from Filippov hull grids and drive sliding detection.
    """

    n: int
    evaluator: Callable[[Array], Array]
    regularity: Regularity = Regularity.SMOOTH
    equilibrium: Optional[Array] = None
    discontinuities: tuple = ()
    vectorized: bool = True
    name: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        eq = np.zeros(self.n) if self.equilibrium is None else np.asarray(self.equilibrium, float)
        if eq.shape != (self.n,):
            raise DimensionMismatch(f"equilibrium has shape {eq.shape}, expected ({self.n},)")
        object.__setattr__(self, "equilibrium", eq)

    def __call__(self, x):
        if self.vectorized:
            return np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=float)
        return _apply_rowwise(self.evaluator, x)

    def is_discontinuity(self, x) -> bool:
        return any(x == d for d in self.discontinuities)


def eval_field(field: FieldDescription, x) -> Array:
    """Evaluate a field at a single point with dimension and set-valuedness checks."""
    x = np.asarray(x, dtype=float)
    if x.shape != (field.n,):
        raise DimensionMismatch(f"point has shape {x.shape}, field dimension is {field.n}")
    if field.regularity is Regularity.SET_VALUED_AT_ORIGIN and np.array_equal(x, field.equilibrium):
        raise UndefinedAtPoint(f"field {field.name or '<anonymous>'} is set-valued at {x}")
    if field.n == 1 and field.is_discontinuity(x[0]):
        raise UndefinedAtPoint(f"field is set-valued at the declared discontinuity {x[0]}")
    return field(x)


@dataclass(frozen=True)
class SetValuedSample:
    x: Array
    vertices: tuple

    def __post_init__(self):
        if not self.vertices:
            raise ValueError("hull must be nonempty")


HULL_GRID = 1001


def filippov_hull_1d(field: FieldDescription, x: float, delta: float) -> SetValuedSample:
    """Grid approximation of the Filippov set of a scalar field at ``x``.

    The field is sampled on 1001 points of [x - delta, x + delta] with the
    declared discontinuities (and a set-valued equilibrium) removed; the
    hull of a scalar field is the interval [ess-inf, ess-sup].
    """
    if field.n != 1:
        raise DimensionMismatch("filippov_hull_1d needs a scalar field")
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = float(np.asarray(x, dtype=float).reshape(-1)[0])
    grid = np.linspace(x - delta, x + delta, HULL_GRID)
    excluded = list(field.discontinuities)
    if field.regularity is Regularity.SET_VALUED_AT_ORIGIN:
        excluded.append(float(field.equilibrium[0]))
    keep = np.ones(grid.size, dtype=bool)
    for d in excluded:
        keep &= grid != d
    values = np.asarray(field(grid[keep, None]), dtype=float).reshape(-1)
    lo, hi = float(values.min()), float(values.max())
    verts = (np.array([lo]),) if lo == hi else (np.array([lo]), np.array([hi]))
    return SetValuedSample(np.array([x]), verts)


@dataclass(frozen=True)
class ClassKFn:
    """A class-K (or K-infinity) gauge r -> forward(r).

    ``inverse`` is an optional closed form; ``classk_inverse`` never uses it.
    """

    forward: Callable
    derivative: Optional[Callable] = None
    is_kinfty: bool = True
    inverse: Optional[Callable] = None
    name: str = ""

    def __call__(self, r):
        return self.forward(r)

    def inv(self, y, tol: float = 1e-13):
        if self.inverse is not None:
            return self.inverse(y)
        if np.ndim(y) == 0:
            return classk_inverse(self, float(y), tol)
        return np.vectorize(lambda v: classk_inverse(self, v, tol))(y)

    def deriv(self, r):
        if self.derivative is not None:
            return self.derivative(r)
        r = np.asarray(r, dtype=float)
        h = 1e-6 * np.maximum(1.0, r)
        lo = np.maximum(r - h, 0.0)
        return (self.forward(r + h) - self.forward(lo)) / (r + h - lo)


def sqrt_gauge() -> ClassKFn:
    """gamma(r) = r^(1/2), the default normalizing gauge."""
    return ClassKFn(
        forward=np.sqrt,
        derivative=_half_inv_sqrt,
        inverse=np.square,
        name="sqrt",
    )


def _half_inv_sqrt(r):
    with np.errstate(divide="ignore"):
        return 0.5 / np.sqrt(r)


def power_gauge(p: float) -> ClassKFn:
    return ClassKFn(
        forward=lambda r: np.power(r, p),
        derivative=lambda r: p * np.power(r, p - 1.0),
        inverse=lambda y: np.power(y, 1.0 / p),
        name=f"pow{p:g}",
    )


MAX_BRACKET_EXP = 60
MIN_BRACKET_HALVINGS = 1100


def classk_inverse(g: ClassKFn, y: float, tol: float) -> float:
    """Solve forward(r) = y by geometric bracketing around [0, 1] and bisection.

    The residual tolerance is relative for targets below 1.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not g.is_kinfty:
        raise NotInvertible("gauge is not declared K-infinity")
    y = float(y)
    if y < 0:
        raise NotInvertible("negative target for a class-K gauge")
    if y == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    f_lo, f_hi = float(g.forward(lo)), float(g.forward(hi))
    # shrink the bracket for small targets so bisection starts near the root
    for _ in range(MIN_BRACKET_HALVINGS):
        f_half = float(g.forward(0.5 * hi))
        if f_half < y or 0.5 * hi == 0.0:
            lo, f_lo = 0.5 * hi, f_half
            break
        hi, f_hi = 0.5 * hi, f_half
    tol_y = tol * min(1.0, y)
    k = 0
    while f_hi < y:
        k += 1
        if k > MAX_BRACKET_EXP:
            raise NotInvertible(f"no bracket for y={y} below 2^{MAX_BRACKET_EXP}")
        lo, f_lo = hi, f_hi
        hi = 2.0 ** k
        f_hi = float(g.forward(hi))
        if not f_hi > f_lo:
            raise NotInvertible(f"gauge not increasing on [{lo}, {hi}]")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f_mid = float(g.forward(mid))
        if not f_lo <= f_mid <= f_hi:
            raise NotInvertible(f"monotonicity violated near r={mid}")
        if abs(f_mid - y) <= tol_y:
            return mid
        if mid in (lo, hi):
            break
        if f_mid < y:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return lo if abs(f_lo - y) <= abs(f_hi - y) else hi


def _simpson_weights(m: int) -> Array:
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def gamma_from_alpha(alpha: Callable, quad_steps: int = 256, tol: float = 1e-13) -> ClassKFn:
    """gamma = h^{-1} with h(r) = int_0^r alpha, by composite Simpson.

    The returned derivative is gamma'(r) = 1 / alpha(gamma(r)).
    """
    if quad_steps < 64:
        raise ValueError("quad_steps must be at least 64")
    m = quad_steps + (quad_steps % 2)
    u = np.linspace(0.0, 1.0, m + 1)
    w = _simpson_weights(m)

    def h(r):
        r = float(r)
        if r == 0.0:
            return 0.0
        vals = np.asarray(alpha(u * r), dtype=float)
        if vals.shape != u.shape:
            vals = np.broadcast_to(vals, u.shape)
        if not np.all(np.isfinite(vals)):
            raise QuadratureFailure(f"non-finite integrand on [0, {r}]")
        return float(r / m * np.dot(w, vals))

    h_fn = ClassKFn(forward=h, derivative=alpha, name="h")

    def gamma(y):
        if np.ndim(y) == 0:
            return classk_inverse(h_fn, float(y), tol)
        return np.vectorize(lambda v: classk_inverse(h_fn, v, tol))(y)

    def dgamma(y):
        with np.errstate(divide="ignore"):
            return 1.0 / np.asarray(alpha(gamma(y)), dtype=float)

    return ClassKFn(forward=gamma, derivative=dgamma, inverse=h, name="h_inverse")


def gamma_capital(gamma: ClassKFn, r: float, quad_steps: int = 256) -> float:
    """Gamma(r) = int_0^r 1/gamma'(rho) d rho on a mesh graded towards 0.

    With rho = r u^2 the integrand becomes 2 r u / gamma'(r u^2), which is
    smooth for gauges like sqrt, so Simpson in u recovers full order.
    """
    r = float(r)
    if r == 0.0:
        return 0.0
    m = max(64, quad_steps + (quad_steps % 2))
    u = np.linspace(0.0, 1.0, m + 1)
    rho = r * u * u
    d = np.asarray(gamma.deriv(rho), dtype=float)
    with np.errstate(divide="ignore"):
        inv_d = np.where(np.isinf(d), 0.0, 1.0 / d)
    vals = inv_d * 2.0 * r * u
    if not np.all(np.isfinite(vals)):
        raise QuadratureFailure("1/gamma' is not integrable on the mesh")
    return float(np.dot(_simpson_weights(m), vals) / m)


def _fd_gradient(V, x):
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    h = 1e-5 * np.maximum(1.0, np.linalg.norm(x, axis=-1))[..., None]
    g = np.empty_like(x)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        g[..., i] = (np.asarray(V(x + h * e)) - np.asarray(V(x - h * e))) / (2.0 * h[..., 0])
    return g


@dataclass(frozen=True)
class LyapunovPair:
    """Candidate strong Lyapunov pair (V, W); gradV falls back to central differences."""

    V: Callable
    W: Callable
    gradV: Optional[Callable] = None
    name: str = ""

    def grad(self, x):
        if self.gradV is not None:
            return np.asarray(self.gradV(np.asarray(x, dtype=float)), dtype=float)
        return _fd_gradient(self.V, x)


def fd_gradient(V: Callable, x) -> Array:
    """Central differences with step 1e-5 * max(1, |x|)."""
    return _fd_gradient(V, x)


def quadratic_pair(P=None, n: int = 2, w_scale: float = 0.5, Q=None) -> LyapunovPair:
    """V = 1/2 x^T P x with W = w_scale * x^T Q x (Q defaults to the identity)."""
    P = np.eye(n) if P is None else np.asarray(P, dtype=float)
    Q = np.eye(P.shape[0]) if Q is None else np.asarray(Q, dtype=float)
    return LyapunovPair(
        V=lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, P, x),
        gradV=lambda x: x @ P.T,
        W=lambda x: w_scale * np.einsum("...i,ij,...j->...", x, Q, x),
        name="quadratic",
    )


# ---- invariant checks ------------------------------------------------------


def check_classk(g: ClassKFn, grid: Optional[Sequence[float]] = None) -> bool:
    """forward(0) = 0, strictly increasing on the grid, unbounded if K-infinity."""
    grid = np.linspace(0.0, 10.0, 201) if grid is None else np.asarray(grid, dtype=float)
    vals = np.array([float(g.forward(r)) for r in grid])
    if float(g.forward(0.0)) != 0.0 or np.any(np.diff(vals) <= 0):
        return False
    if g.is_kinfty:
        tail = np.array([float(g.forward(10.0 ** k)) for k in range(1, 7)])
        if np.any(np.diff(tail) <= 0) or tail[-1] <= 10 * tail[0]:
            return False
    return True


def annulus_points(n: int, count: int, r_min: float, r_max: float, skip: int = 0) -> Array:
    """Deterministic low-discrepancy points with r_min <= |x| <= r_max.

    Directions come from Halton points pushed through the normal quantile
    function; radii are log-uniform so that the inner rim is well covered.
    """
    from scipy.special import ndtri

    from ._backend import halton

    u = halton(count, n + 1, skip=skip + 20)
    if n == 1:
        direction = np.where(u[:, :1] < 0.5, -1.0, 1.0)
    elif n == 2:
        ang = 2.0 * math.pi * u[:, 0]
        direction = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        z = ndtri(np.clip(u[:, :n], 1e-12, 1 - 1e-12))
        direction = z / np.linalg.norm(z, axis=1, keepdims=True)
    radius = r_min * (r_max / r_min) ** u[:, n]
    return direction * radius[:, None]


def check_pair_positivity(pair: LyapunovPair, n: int, count: int = 1000,
                          r_min: float = 1e-3, r_max: float = 10.0) -> bool:
    x = annulus_points(n, count, r_min, r_max)
    V = np.asarray(pair.V(x))
    W = np.asarray(pair.W(x))
    v0 = float(np.asarray(pair.V(np.zeros(n))))
    return v0 == 0.0 and bool(np.all(V > 0)) and bool(np.all(W > 0))


def check_sublevel_proxy(pair: LyapunovPair, n: int, radii=None, directions: int = 256) -> bool:
    """inf of V over spheres |x| = R must strictly increase with R."""
    radii = np.geomspace(0.05, 20.0, 24) if radii is None else np.asarray(radii, dtype=float)
    u = annulus_points(n, directions, 1.0, 1.0 + 1e-12)
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    mins = np.array([float(np.min(pair.V(R * u))) for R in radii])
    return bool(np.all(np.diff(mins) > 0))
