"""Normalizing coordinate change T with V(T^{-1}(y)) = gamma(|y|).

T(x) = gamma^{-1}(V(x)) Q(x), where Q radially projects the point where the
normalized gradient flow of V through x meets the level set V = c. Level
sets must be star-shaped about the origin so that the radial projection is
a homeomorphism onto the unit sphere.
"""
from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .core import ClassKFn, LyapunovPair, annulus_points, sqrt_gauge
from .errors import DegenerateJacobian, GradientVanished, NotInvertible, StarShapeViolated
from .integrate import IntegratorConfig, integrate_time_dependent

PSI_CONFIG = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13, max_step=10.0)
GRAD_FLOOR = 1e-10
STAR_DIRECTIONS = 256
CACHE_SIZE = 16384


class _LRU:
    def __init__(self, size):
        self.size = size
        self.data = OrderedDict()

    def get(self, key, make):
        if key in self.data:
            self.data.move_to_end(key)
            return self.data[key]
        val = make()
        self.data[key] = val
        if len(self.data) > self.size:
            self.data.popitem(last=False)
        return val


@dataclass(frozen=True)
class NormalizerData:
    pair: LyapunovPair
    n: int
    c: float = 1.0
    gamma: ClassKFn = dc_field(default_factory=sqrt_gauge)
    orientation_flip: bool = False
    r_max: float = 1e3
    cfg: IntegratorConfig = PSI_CONFIG
    _cache: _LRU = dc_field(default_factory=lambda: _LRU(CACHE_SIZE), compare=False, repr=False)

    def with_flip(self, flip: bool) -> "NormalizerData":
        return NormalizerData(self.pair, self.n, self.c, self.gamma, flip, self.r_max, self.cfg)


def _grad(pair, x):
    g = pair.grad(x)
    gg = float(np.dot(g, g))
    if gg < GRAD_FLOOR ** 2:
        raise GradientVanished(f"|grad V| < {GRAD_FLOOR:g} at {x}")
    return g, gg


def psi_flow(pair: LyapunovPair, x, tau: float, cfg: IntegratorConfig = PSI_CONFIG) -> np.ndarray:
    """Flow of x' = grad V / |grad V|^2 for time tau (backwards when tau < 0).

    Along it V grows at unit rate: V(psi(tau, x)) = V(x) + tau.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.any(x):
        raise GradientVanished("the normalized gradient flow is undefined at the origin")
    if tau == 0.0:
        return x.copy()
    sign = 1.0 if tau > 0 else -1.0

    def f(t, y):
        g, gg = _grad(pair, y)
        return sign * g / gg

    traj = integrate_time_dependent(f, x, 0.0, abs(float(tau)), cfg)
    return traj.final


def _polish(pair, y, c, steps=2):
    for _ in range(steps):
        g, gg = _grad(pair, y)
        y = y + (c - float(pair.V(y))) * g / gg
    return y


def project_to_level(nd: NormalizerData, x) -> np.ndarray:
    """pi_c(x) = psi(c - V(x), x) followed by Newton steps along grad V."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = psi_flow(nd.pair, x, nd.c - float(nd.pair.V(x)), nd.cfg)
    return _polish(nd.pair, y, nd.c)


def reflect_last(u) -> np.ndarray:
    u = np.array(u, dtype=float)
    u[..., -1] = -u[..., -1]
    return u


def sphere_map(nd: NormalizerData, x) -> np.ndarray:
    """Q(x): unit vector of pi_c(x), reflected in the last coordinate when flipped."""
    p = project_to_level(nd, x)
    q = p / np.linalg.norm(p)
    return reflect_last(q) if nd.orientation_flip else q


def level_point(nd: NormalizerData, u) -> np.ndarray:
    """S^{-1}(u): the point r u with V(r u) = c."""
    u = np.asarray(u, dtype=float).reshape(-1)
    u = u / np.linalg.norm(u)
    c = nd.c

    def g(r):
        return float(nd.pair.V(r * u)) - c

    hi = 1.0
    while g(hi) < 0:
        hi *= 2.0
        if hi > nd.r_max:
            raise StarShapeViolated(f"level {c} not reached along {u} within radius {nd.r_max}")
    r = brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return r * u


def _key(x):
    return np.asarray(x, dtype=float).tobytes()


def build_T(nd: NormalizerData, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.any(x):
        return np.zeros_like(x)
    return nd._cache.get(("T", _key(x)),
                         lambda: float(nd.gamma.inv(float(nd.pair.V(x)))) * sphere_map(nd, x))


def invert_T(nd: NormalizerData, y) -> np.ndarray:
    """T^{-1}(y) = psi(gamma(|y|) - c, S^{-1}(u)) with u the (unreflected) direction of y."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.any(y):
        return np.zeros_like(y)

    def make():
        r = float(np.linalg.norm(y))
        u = y / r
        if nd.orientation_flip:
            u = reflect_last(u)
        p = level_point(nd, u)
        x = psi_flow(nd.pair, p, float(nd.gamma(r)) - nd.c, nd.cfg)
        return x

    return nd._cache.get(("Tinv", _key(y)), make)


def fd_jacobian(fn: Callable, x, step: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    h = step * max(1.0, float(np.linalg.norm(x)))
    J = np.empty((np.asarray(fn(x)).size, x.size))
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        J[:, i] = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * h)
    return J


def orientation_sign(fn: Callable, x, step: float = 1e-5) -> int:
    """Sign of det of the central-difference Jacobian of ``fn`` at ``x``."""
    d = float(np.linalg.det(fd_jacobian(fn, x, step)))
    if abs(d) < 1e-10:
        raise DegenerateJacobian(f"|det DT| = {abs(d):.3e} at {x}")
    return 1 if d > 0 else -1


def check_star_shaped(pair: LyapunovPair, n: int, c: float, r_max: float = 1e3,
                      directions: int = STAR_DIRECTIONS, radii: int = 600) -> None:
    """Every sampled ray must cross V = c exactly once on (0, r_max]."""
    u = annulus_points(n, directions, 1.0, 1.0)
    u = u / np.linalg.norm(u, axis=1, keepdims=True)
    r = np.geomspace(1e-6, r_max, radii)
    for d in u:
        vals = np.asarray(pair.V(r[:, None] * d), dtype=float) - c
        crossings = int(np.count_nonzero(np.diff(np.sign(vals)) != 0))
        if crossings != 1:
            raise StarShapeViolated(f"ray along {d} crosses level {c} {crossings} times")


ORIENTATION_PROBES = 5


def make_normalizer(pair: LyapunovPair, n: int, c: float = 1.0, gamma: Optional[ClassKFn] = None,
                    auto_orient: bool = True, check_star: bool = True,
                    r_max: float = 1e3) -> NormalizerData:
    """Validated NormalizerData; with ``auto_orient`` the reflection is added when T reverses orientation."""
    if c <= 0:
        raise ValueError("reference level must be positive")
    gamma = sqrt_gauge() if gamma is None else gamma
    if check_star:
        check_star_shaped(pair, n, c, r_max)
    nd = NormalizerData(pair, n, c, gamma, False, r_max)
    if auto_orient and n >= 1:
        probes = annulus_points(n, ORIENTATION_PROBES, 0.5, 2.0)
        signs = [orientation_sign(lambda x: build_T(nd, x), p) for p in probes]
        if sum(signs) < 0:
            nd = nd.with_flip(True)
    return nd


def conjugated_field(nd: NormalizerData, y) -> np.ndarray:
    """F~(y) = -DT(x) grad V(x) at x = T^{-1}(y), DT by a central difference along grad V."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.any(y):
        return np.zeros_like(y)

    def make():
        x = invert_T(nd, y)
        g, gg = _grad(nd.pair, x)
        norm = math.sqrt(gg)
        u = g / norm
        h = 1e-5 * max(1.0, float(np.linalg.norm(x)))
        d = (build_T(nd, x + h * u) - build_T(nd, x - h * u)) / (2.0 * h)
        return -norm * d

    return nd._cache.get(("F", _key(y)), make)


def conjugated_field_description(nd: NormalizerData):
    from .core import FieldDescription, Regularity
    return FieldDescription(nd.n, lambda y: conjugated_field(nd, y), Regularity.LIPSCHITZ_OFF_ORIGIN,
                            vectorized=False, name="conjugated")


def pulled_back_dissipation(nd: NormalizerData, y) -> float:
    """W~_V(y) = |grad V(T^{-1}(y))|^2."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.any(y):
        return 0.0
    g = nd.pair.grad(invert_T(nd, y))
    return float(np.dot(g, g))


def _rowwise(fn):
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return fn(x)
        flat = x.reshape(-1, x.shape[-1])
        return np.array([fn(row) for row in flat]).reshape(x.shape[:-1])
    return wrapped


# The decrease inequalities of both pairs below hold with equality for this
# construction of T, so the dissipation is halved to keep a strict margin.
W_FACTOR = 0.5


def gauge_pair(nd: NormalizerData, w_factor: float = W_FACTOR) -> LyapunovPair:
    """V_gamma(y) = gamma(|y|) with W = w_factor * W~_V."""
    gam = nd.gamma

    def grad(y):
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, gam.deriv(r) * y / np.where(r > 0, r, 1.0), 0.0)

    return LyapunovPair(V=lambda y: gam(np.linalg.norm(np.asarray(y, dtype=float), axis=-1)),
                        gradV=grad,
                        W=_rowwise(lambda y: w_factor * pulled_back_dissipation(nd, y)),
                        name="gauge")


def canonical_weight(nd: NormalizerData, y) -> float:
    """a(y) = |y| / gamma'(|y|), continuous with a(0) = 0 when 1/gamma' is class K."""
    r = float(np.linalg.norm(y))
    if r == 0.0:
        return 0.0
    return r / float(nd.gamma.deriv(r))


def canonical_pair(nd: NormalizerData, w_factor: float = W_FACTOR) -> LyapunovPair:
    """V_q = |y|^2 / 2 with W_q = w_factor * a(y) W~_V(y)."""
    return LyapunovPair(
        V=lambda y: 0.5 * np.einsum("...i,...i->...", y, y),
        gradV=lambda y: np.asarray(y, dtype=float),
        W=_rowwise(lambda y: w_factor * canonical_weight(nd, y) * pulled_back_dissipation(nd, y)),
        name="canonical")


def conjugated_field_closed_form(nd: NormalizerData, y) -> np.ndarray:
    """-(gamma^{-1})'(V(x)) |grad V(x)|^2 Q(x), x = T^{-1}(y).

    Moving x along grad V follows the normalized gradient flow, which leaves
    Q unchanged, so DT(x) grad V(x) only has the radial gauge term.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    r = float(np.linalg.norm(y))
    if r == 0.0:
        return np.zeros_like(y)
    x = invert_T(nd, y)
    g = nd.pair.grad(x)
    dinv = 1.0 / float(nd.gamma.deriv(r))
    return -dinv * float(np.dot(g, g)) * y / r


def export_warp_grid(nd: NormalizerData, points, out) -> None:
    """CSV with columns x1..xn, T1..Tn."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(n)] + [f"T{i + 1}" for i in range(n)])
        for p in points:
            w.writerow([repr(float(v)) for v in p] + [repr(float(v)) for v in build_T(nd, p)])
