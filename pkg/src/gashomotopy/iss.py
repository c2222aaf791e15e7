"""Disturbed systems x' = f(x, d): simulation, ISS-type bounds, L2 gain and
the disturbance-gauge construction turning an ISES system into one with
dissipation rate -V + |v|^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtri

from . import _backend
from .core import ClassKFn, LyapunovPair, classk_inverse
from .errors import UnboundedSup
from .integrate import DEFAULT_CONFIG, IntegratorConfig, Trajectory, integrate_time_dependent
from .lyapunov import Certificate, _make


@dataclass(frozen=True)
class DisturbedSystem:
    """x' = f(x, d) with f acting on batches ``(..., n)`` x ``(..., m)``."""

    f: Callable
    n: int
    m: int
    d_radius: float = math.inf
    name: str = ""

    def __call__(self, x, d):
        return np.asarray(self.f(np.asarray(x, dtype=float), np.asarray(d, dtype=float)), dtype=float)


def canonical_system(n: int = 2) -> DisturbedSystem:
    return DisturbedSystem(lambda x, d: -x + d, n, n, name="canonical")


def example_no_canonical() -> DisturbedSystem:
    """x' = -x + R d with the orientation-reversing R = diag(1, -1)."""
    R = np.diag([1.0, -1.0])
    return DisturbedSystem(lambda x, d: -x + d @ R.T, 2, 2, name="ex4_1")


# ---- disturbance signals ---------------------------------------------------

CONSTANT = "constant"
SINUSOID = "sinusoid"
PIECEWISE = "piecewise_constant"
RANDOM_HOLD = "random_hold"


@dataclass(frozen=True)
class DisturbanceSignal:
    """Bounded input signal; piecewise kinds expose their jump times.

    ``values[k]`` holds on [times[k], times[k+1]); ``times[0]`` must be 0 and
    the last value holds forever.
    """

    kind: str
    m: int
    sup_norm: float
    value: Optional[np.ndarray] = None
    amplitude: Optional[np.ndarray] = None
    omega: float = 1.0
    phase: float = 0.0
    times: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __call__(self, t):
        t = float(t)
        if self.kind == CONSTANT:
            return self.value.copy()
        if self.kind == SINUSOID:
            return self.amplitude * math.sin(self.omega * t + self.phase)
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.values[max(k, 0)].copy()

    def left(self, t):
        """Left limit d(t-), equal to d(t) away from jumps."""
        t = float(t)
        if self.kind in (CONSTANT, SINUSOID):
            return self(t)
        k = int(np.searchsorted(self.times, t, side="left")) - 1
        return self.values[max(k, 0)].copy()

    def breakpoints(self, t0: float, t1: float) -> list:
        if self.times is None:
            return []
        return [float(b) for b in self.times if t0 < b < t1]


def constant_signal(value) -> DisturbanceSignal:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    return DisturbanceSignal(CONSTANT, v.size, float(np.linalg.norm(v)), value=v)


def sinusoid_signal(amplitude, omega: float = 1.0, phase: float = 0.0) -> DisturbanceSignal:
    a = np.atleast_1d(np.asarray(amplitude, dtype=float))
    return DisturbanceSignal(SINUSOID, a.size, float(np.linalg.norm(a)), amplitude=a,
                             omega=float(omega), phase=float(phase))


def piecewise_signal(times, values) -> DisturbanceSignal:
    times = np.asarray(times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if times.size != values.shape[0] or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("piecewise signal needs increasing times starting at 0, one value each")
    return DisturbanceSignal(PIECEWISE, values.shape[1], float(np.max(np.linalg.norm(values, axis=1))),
                             times=times, values=values)


def random_hold_signal(m: int, sup_norm: float, hold: float, t_end: float, seed: int) -> DisturbanceSignal:
    """Values uniform in the ball of radius ``sup_norm``, redrawn every ``hold`` time units."""
    rng = np.random.default_rng(np.uint64(seed))
    k = int(math.ceil(t_end / hold)) + 1
    z = rng.standard_normal((k, m))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = sup_norm * rng.random(k) ** (1.0 / m)
    times = hold * np.arange(k)
    return DisturbanceSignal(RANDOM_HOLD, m, float(sup_norm), times=times, values=z * r[:, None],
                             seed=int(seed))


# ---- simulation ------------------------------------------------------------

SAMPLE_DT = 1e-2


def simulate_disturbed(sys: DisturbedSystem, x0, d: DisturbanceSignal, t_end: float,
                       cfg: IntegratorConfig = DEFAULT_CONFIG, sample_dt: float = SAMPLE_DT) -> Trajectory:
    """Trajectory of x' = f(x, d(t)) sampled every ``sample_dt`` plus the jump times of d.

    Each constant stretch of a piecewise signal is integrated on its own, so
    no step straddles a jump.
    """
    x = np.asarray(x0, dtype=float).reshape(sys.n)
    cuts = [0.0] + d.breakpoints(0.0, t_end) + [float(t_end)]
    n_grid = int(round(t_end / sample_dt))
    grid = np.union1d(np.linspace(0.0, t_end, n_grid + 1), cuts[1:-1])
    times, states = [], []
    for a, b in zip(cuts, cuts[1:]):
        if d.kind in (CONSTANT, SINUSOID):
            def f(t, y):
                return sys(y, d(t))
        else:
            seg = d(a)

            def f(t, y, seg=seg):
                return sys(y, seg)

        traj = integrate_time_dependent(f, x, a, b, cfg)
        sel = grid[(grid >= a) & (grid < b)] if b < t_end else grid[grid >= a]
        times.append(sel)
        states.append(traj.at(sel))
        x = traj.final
    times = np.concatenate(times)
    states = np.vstack(states)
    inputs = np.array([d(t) for t in times])
    return Trajectory(times, states, [], inputs=inputs)


# ---- bound checks ----------------------------------------------------------


@dataclass(frozen=True)
class ISSBoundSpec:
    """|x(t)| <= max(M e^{-a t} |x0|, alpha(|d|_inf))."""

    M: float
    a: float
    alpha: ClassKFn

    def __post_init__(self):
        if self.M < 1 or self.a <= 0:
            raise ValueError("need M >= 1 and a > 0")


BOUND_SLACK = 1e-9


def check_ises_bound(sys: DisturbedSystem, spec: ISSBoundSpec, batch, t_grid,
                     cfg: IntegratorConfig = DEFAULT_CONFIG) -> Certificate:
    """Exponential ISS estimate at every grid time for every (x0, d) in the batch."""
    batch = list(batch)
    if not batch:
        raise ValueError("batch must be nonempty")
    t_grid = np.asarray(t_grid, dtype=float)
    margins, points = [], []
    for x0, d in batch:
        x0 = np.asarray(x0, dtype=float)
        traj = simulate_disturbed(sys, x0, d, float(t_grid[-1]), cfg)
        xs = traj.at(t_grid)
        norm = np.linalg.norm(xs, axis=1)
        bound = np.maximum(spec.M * np.exp(-spec.a * t_grid) * np.linalg.norm(x0),
                           float(spec.alpha(d.sup_norm)))
        m = norm - bound - BOUND_SLACK * (1.0 + bound)
        i = int(np.argmax(m))
        margins.append(float(m[i]))
        points.append(np.concatenate([[t_grid[i]], x0]))
    return _make("ises_bound", len(batch), margins, points, 0.0)


L2_SLACK = 1e-6


def l2_prefix_sums(traj: Trajectory, d: DisturbanceSignal):
    """Prefix trapezoid integrals of |x|^2 and of |d|^2 (one-sided at jumps)."""
    t = traj.times
    dt = np.diff(t)
    xx = np.einsum("ij,ij->i", traj.states, traj.states)
    lhs = np.concatenate([[0.0], np.cumsum(0.5 * dt * (xx[:-1] + xx[1:]))])
    right = np.array([np.dot(v, v) for v in (d(tt) for tt in t[:-1])])
    left = np.array([np.dot(v, v) for v in (d.left(tt) for tt in t[1:])])
    dd = np.concatenate([[0.0], np.cumsum(0.5 * dt * (right + left))])
    return lhs, dd


def check_l2_gain(traj: Trajectory, d: DisturbanceSignal, max_gap: float = SAMPLE_DT + 1e-12) -> Certificate:
    """int |x|^2 <= |x0|^2 + int |d|^2 at every prefix, up to 1e-6 (1 + RHS)."""
    if np.max(np.diff(traj.times)) > max_gap:
        raise ValueError("trajectory sampling is too coarse for the quadrature")
    lhs, dd = l2_prefix_sums(traj, d)
    rhs = float(np.dot(traj.states[0], traj.states[0])) + dd
    margins = lhs - rhs - L2_SLACK * (1.0 + rhs)
    points = [np.array([t]) for t in traj.times]
    return _make("l2_gain", len(margins), margins, points, 0.0)


# ---- disturbance gauge -----------------------------------------------------


def ball_samples(dim: int, count: int, radius: float, u: np.ndarray) -> np.ndarray:
    """Map points of [0,1)^(dim+1) to the closed ball of the given radius."""
    if dim == 1:
        return radius * (2.0 * u[:, :1] - 1.0)
    z = ndtri(np.clip(u[:, :dim], 1e-12, 1 - 1e-12))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * (radius * u[:, dim] ** (1.0 / dim))[:, None]


def _clip_ball(v, radius):
    nv = float(np.linalg.norm(v))
    return v if nv <= radius else v * (radius / nv)


def _sup_at(sys: DisturbedSystem, a_r: float, r: float, samples: int, polish_steps: int) -> float:
    n, m = sys.n, sys.m
    u = _backend.halton(samples, n + m + 2, skip=20)
    xi = ball_samples(n, samples, a_r, u[:, : n + 1])
    du = ball_samples(m, samples, r, u[:, n + 1:])

    def J(x, d):
        return 2.0 * np.einsum("...i,...i->...", sys(x, d), x) + np.einsum("...i,...i->...", x, x)

    vals = J(xi, du)
    k = int(np.argmax(vals))
    best, x, d = float(vals[k]), xi[k].copy(), du[k].copy()
    step = 0.25 * max(a_r, r)
    for _ in range(polish_steps):
        improved = False
        for blk, rad in ((0, a_r), (1, r)):
            vec = x if blk == 0 else d
            for i in range(vec.size):
                for sgn in (1.0, -1.0):
                    trial = vec.copy()
                    trial[i] += sgn * step
                    trial = _clip_ball(trial, rad)
                    val = float(J(trial, d) if blk == 0 else J(x, trial))
                    if val > best:
                        best, improved = val, True
                        if blk == 0:
                            x = vec = trial
                        else:
                            d = vec = trial
        if not improved:
            step *= 0.5
    return best


def estimate_alpha_tilde(sys: DisturbedSystem, alpha: ClassKFn, r_grid: Sequence[float],
                         search_samples: int = 512, polish_steps: int = 50) -> ClassKFn:
    """Lower estimate of sup {2<f(xi,u),xi> + |xi|^2 : |xi| <= alpha(r), |u| <= r}.

    Each grid value comes from quasi-random sampling plus coordinate-ascent
    polish; the running maximum makes the result monotone, and it is
    interpolated piecewise as a power law (exact for power gauges).
    """
    r_grid = np.asarray(sorted(float(r) for r in r_grid if r > 0), dtype=float)
    sups = []
    for r in r_grid:
        v = _sup_at(sys, float(alpha(r)), r, search_samples, polish_steps)
        if not v < 1e12:
            raise UnboundedSup(f"sup estimate {v:g} at r={r:g}")
        sups.append(max(v, 0.0))
    env = np.maximum.accumulate(np.array(sups))
    for i in range(env.size):
        floor = env[i - 1] if i else 0.0
        if env[i] <= floor:
            env[i] = floor + 1e-12 * max(1.0, floor)
    lr, lv = np.log(r_grid), np.log(env)
    if r_grid.size == 1:
        lr, lv = np.array([lr[0] - 1.0, lr[0]]), np.array([lv[0] - 1.0, lv[0]])
    p_lo = (lv[1] - lv[0]) / (lr[1] - lr[0])
    p_hi = (lv[-1] - lv[-2]) / (lr[-1] - lr[-2])

    def fwd(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            x = np.log(r)
        out = np.interp(x, lr, lv)
        out = np.where(x < lr[0], lv[0] + p_lo * (x - lr[0]), out)
        out = np.where(x > lr[-1], lv[-1] + p_hi * (x - lr[-1]), out)
        return np.where(r > 0, np.exp(out), 0.0)

    return ClassKFn(forward=fwd, name="alpha_tilde")


def scaled(g: ClassKFn, factor: float) -> ClassKFn:
    return ClassKFn(forward=lambda r: factor * g(r), name=f"{factor:g}*{g.name}")


def build_R_transform(alpha_tilde: ClassKFn, z, flip: bool = False) -> np.ndarray:
    """R(z) = alpha~(|z|)^{1/2} z/|z|, last coordinate of the direction reflected if ``flip``."""
    z = np.asarray(z, dtype=float).reshape(-1)
    r = float(np.linalg.norm(z))
    if r == 0.0:
        return np.zeros_like(z)
    u = z / r
    if flip:
        u[-1] = -u[-1]
    return math.sqrt(float(alpha_tilde(r))) * u


def invert_R_transform(alpha_tilde: ClassKFn, v, flip: bool = False, tol: float = 1e-13) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return np.zeros_like(v)
    u = v / nv
    if flip:
        u[-1] = -u[-1]
    return classk_inverse(alpha_tilde, nv * nv, tol) * u


def transformed_system(sys: DisturbedSystem, alpha_tilde: ClassKFn, flip: bool = False) -> DisturbedSystem:
    """f^(x, v) = f(x, R^{-1}(v))."""
    def f(x, v):
        v = np.asarray(v, dtype=float)
        if v.ndim == 1:
            return sys(x, invert_R_transform(alpha_tilde, v, flip))
        d = np.array([invert_R_transform(alpha_tilde, row, flip) for row in v.reshape(-1, v.shape[-1])])
        return sys(x, d.reshape(v.shape))

    return DisturbedSystem(f, sys.n, sys.m, name=f"{sys.name}_R")


def dissipation_grid(n: int, m: int, count: int, x_radius: float, d_radius: float, skip: int = 0):
    """Quasi-random (x, d) pairs filling the product of two balls."""
    u = _backend.halton(count, n + m + 2, skip=20 + skip)
    return ball_samples(n, count, x_radius, u[:, : n + 1]), ball_samples(m, count, d_radius, u[:, n + 1:])


def dissipation_check(sys: DisturbedSystem, pair: LyapunovPair, supply_rate: Callable, grid) -> Certificate:
    """<grad V(x), f(x, d)> <= supply_rate(x, d) at every sampled pair."""
    xs, ds = grid
    lhs = np.einsum("...i,...i->...", pair.grad(xs), sys(xs, ds))
    m = lhs - np.asarray(supply_rate(xs, ds), dtype=float)
    # rounding in both sides scales with their magnitude
    m = m - 1e-12 * (1.0 + np.abs(lhs))
    return _make("dissipation", len(m), m, np.concatenate([xs, ds], axis=1), 0.0)


def squared_norm_pair(n: int) -> LyapunovPair:
    """V = |x|^2 with W = V."""
    return LyapunovPair(V=lambda x: np.einsum("...i,...i->...", x, x),
                        gradV=lambda x: 2.0 * np.asarray(x, dtype=float),
                        W=lambda x: np.einsum("...i,...i->...", x, x), name="squared_norm")
