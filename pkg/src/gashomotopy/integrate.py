"""Trajectories and time-t maps.

Integration uses an embedded Dormand-Prince 5(4) pair with 4th-order dense
output. Two additions handle the finite-time-convergent fields of the
examples: a snap into the equilibrium once the state is inside a tiny ball
with an inward-pointing field, and, for scalar fields with declared jump
points, a side-locked evaluation that turns jump crossings into exact
root-finding problems followed by Filippov sliding or transversal passage.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import _backend
from .core import ClassKFn, FieldDescription, classk_inverse, gamma_capital
from .errors import BlowUp, DimensionMismatch, StepUnderflow

SLIDING_ONSET = "SlidingOnset"
EXTINCTION = "Extinction"
LEVEL_HIT = "LevelHit"
TRUNCATED = "Truncated"


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = 0.1
    snap_radius: float = 1e-9
    max_steps: int = 1_000_000
    blowup: float = 1e12

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "snap_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.snap_radius >= 1e-3:
            raise ValueError("snap_radius must be below 1e-3")

    def replace(self, **changes) -> "IntegratorConfig":
        from dataclasses import replace
        return replace(self, **changes)


DEFAULT_CONFIG = IntegratorConfig()


@dataclass
class Trajectory:
    """Accepted integration steps with dense-output data.

    ``dense_k[i]`` holds the stage derivatives of the step from ``times[i]``
    to ``times[i+1]`` (NaN for steps without RK data, e.g. a snap or a
    sliding hold, which interpolate linearly); ``dense_h[i]`` is the full
    step size the stages belong to, which can exceed the stored interval
    when a step was cut at a jump crossing.
    """

    times: np.ndarray
    states: np.ndarray
    events: list = dc_field(default_factory=list)
    dense_k: Optional[np.ndarray] = None
    dense_h: Optional[np.ndarray] = None
    inputs: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.times.shape[0] != self.states.shape[0]:
            raise ValueError("times and states differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def event_times(self, tag: str) -> list:
        return [t for t, g in self.events if g == tag]

    def at(self, t) -> np.ndarray:
        """States at arbitrary times in [times[0], times[-1]] via dense output."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((t_arr.size, self.n))
        for j, tj in enumerate(t_arr):
            i = int(np.searchsorted(self.times, tj, side="right")) - 1
            i = min(max(i, 0), len(self.times) - 1)
            if i == len(self.times) - 1 or tj == self.times[i]:
                out[j] = self.states[i]
                continue
            t0, t1 = self.times[i], self.times[i + 1]
            K = None if self.dense_k is None else self.dense_k[i]
            if K is None or not np.all(np.isfinite(K)):
                w = (tj - t0) / (t1 - t0)
                out[j] = (1 - w) * self.states[i] + w * self.states[i + 1]
            else:
                h = self.dense_h[i]
                out[j] = _backend.dense_eval(self.states[i], K, h, (tj - t0) / h)
        return out if np.ndim(t) else out[0]

    def resample(self, times) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        inputs = None
        if self.inputs is not None:
            idx = np.clip(np.searchsorted(self.times, times, side="right") - 1, 0, len(self.times) - 1)
            inputs = self.inputs[idx]
        return Trajectory(times, self.at(times), list(self.events), inputs=inputs)

    def to_csv(self, path, input_columns: bool = True) -> None:
        """Write ``t,x1..xn[,d1..dm],event`` with one row per stored step."""
        tags = {}
        for t, g in self.events:
            idx = int(np.argmin(np.abs(self.times - t)))
            tags.setdefault(idx, []).append(g)
        header = ["t"] + [f"x{i + 1}" for i in range(self.n)]
        with_d = input_columns and self.inputs is not None
        if with_d:
            header += [f"d{i + 1}" for i in range(self.inputs.shape[1])]
        header.append("event")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i, t in enumerate(self.times):
                row = [_fmt(t)] + [_fmt(v) for v in self.states[i]]
                if with_d:
                    row += [_fmt(v) for v in self.inputs[i]]
                row.append(";".join(tags.get(i, [])))
                w.writerow(row)


def _fmt(v: float) -> str:
    return repr(float(v))


class _Builder:
    def __init__(self, t0, x0, n):
        self.times = [float(t0)]
        self.states = [np.array(x0, dtype=float).reshape(n)]
        self.ks = []
        self.hs = []
        self.events = []
        self.n = n

    @property
    def t(self):
        return self.times[-1]

    @property
    def x(self):
        return self.states[-1]

    def extend(self, ts, xs, ks, hs):
        for i in range(1, len(ts)):
            self.times.append(float(ts[i]))
            self.states.append(np.array(xs[i]))
            self.ks.append(ks[i - 1])
            self.hs.append(hs[i - 1])

    def hold(self, t_end, x):
        if t_end > self.t:
            self.times.append(float(t_end))
            self.states.append(np.array(x, dtype=float))
            self.ks.append(np.full((7, self.n), np.nan))
            self.hs.append(np.nan)

    def build(self, inputs=None) -> Trajectory:
        k = np.array(self.ks) if self.ks else np.empty((0, 7, self.n))
        return Trajectory(np.array(self.times), np.array(self.states), self.events,
                          k, np.array(self.hs, dtype=float), inputs)


def _run(builder, f_t, t_end, cfg, eq, lo=-math.inf, hi=math.inf, snap=True,
         project=None, first_step=0.0):
    ts, xs, ks, hs, status, h_next = _backend.dopri45(
        f_t, builder.t, builder.x, float(t_end), cfg.rel_tol, cfg.abs_tol, cfg.max_step,
        first_step, cfg.snap_radius if snap else 0.0, eq, lo, hi, cfg.blowup,
        cfg.max_steps, project)
    builder.extend(ts, xs, ks, hs)
    if status == _backend.BLOWUP:
        raise BlowUp(f"state norm exceeded {cfg.blowup:g} near t={builder.t:g}")
    if status == _backend.UNDERFLOW:
        raise StepUnderflow(f"step size underflow at t={builder.t!r}")
    if status == _backend.TRUNCATED:
        builder.events.append((builder.t, TRUNCATED))
    return status, h_next


def _interval_around(x, points):
    lo = max((p for p in points if p < x), default=-math.inf)
    hi = min((p for p in points if p > x), default=math.inf)
    return lo, hi


def _one_sided(field, d):
    """Left and right limits of a scalar field at a jump point."""
    left = float(np.asarray(field(np.array([np.nextafter(d, -math.inf)]))).reshape(-1)[0])
    right = float(np.asarray(field(np.array([np.nextafter(d, math.inf)]))).reshape(-1)[0])
    return left, right


def integrate(field: FieldDescription, x0, t_end: float, cfg: IntegratorConfig = DEFAULT_CONFIG,
              t0: float = 0.0) -> Trajectory:
    """Integrate ``x' = field(x)`` from ``x0`` over [t0, t_end]."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (field.n,):
        raise DimensionMismatch(f"x0 has shape {x0.shape}, field dimension is {field.n}")
    eq = field.equilibrium
    b = _Builder(t0, x0, field.n)
    if np.array_equal(x0, eq):
        b.hold(t_end, eq)
        return b.build()

    if field.n != 1 or not field.discontinuities:
        def f_t(t, y):
            return field(y)

        status, _ = _run(b, f_t, t_end, cfg, eq)
        if status == _backend.SNAPPED:
            _snap(b, eq, t_end)
        return b.build()

    jumps = sorted(float(d) for d in field.discontinuities)
    x = float(x0[0])
    h_next = 0.0
    if x in jumps:
        interval = _resolve_at_jump(field, x, jumps)
        if interval is None:
            _slide(b, x, eq, t_end, start=True)
            return b.build()
    else:
        interval = _interval_around(x, jumps)
    while True:
        lo, hi = interval
        lo_in = np.nextafter(lo, math.inf) if math.isfinite(lo) else lo
        hi_in = np.nextafter(hi, -math.inf) if math.isfinite(hi) else hi

        def f_t(t, y, lo_in=lo_in, hi_in=hi_in):
            return field(np.clip(y, lo_in, hi_in))

        status, h_next = _run(b, f_t, t_end, cfg, eq, lo, hi, first_step=h_next)
        if status == _backend.SNAPPED:
            _snap(b, eq, t_end)
            return b.build()
        if status != _backend.CROSSED:
            return b.build()
        d = hi if b.x[0] >= hi else lo
        _cut_at_crossing(b, d)
        interval = _resolve_at_jump(field, d, jumps)
        if interval is None:
            _slide(b, d, eq, t_end)
            return b.build()
        if b.t >= t_end:
            return b.build()


def _resolve_at_jump(field, d, jumps):
    """Interval to continue into from a jump point, or None to slide there."""
    left, right = _one_sided(field, d)
    if min(left, right) <= 0.0 <= max(left, right):
        return None
    lo, hi = _interval_around(d, jumps)
    return (d, hi) if right > 0 else (lo, d)


def _cut_at_crossing(b, d):
    x_prev = b.states[-2]
    K, h = b.ks[-1], b.hs[-1]

    def g(theta):
        return float(_backend.dense_eval(x_prev, K, h, theta)[0]) - d

    g0, g1 = g(0.0), g(1.0)
    if g0 == 0.0:
        theta = 0.0
    elif g0 * g1 > 0:
        theta = 1.0
    else:
        theta = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    t_hit = b.times[-2] + theta * h
    if t_hit <= b.times[-2]:
        b.times.pop()
        b.states.pop()
        b.ks.pop()
        b.hs.pop()
        b.states[-1] = np.array([d])
    else:
        b.times[-1] = t_hit
        b.states[-1] = np.array([d])


def _slide(b, d, eq, t_end, start=False):
    b.states[-1] = np.array([d])
    b.events.append((b.t, SLIDING_ONSET))
    if np.array_equal(np.array([d]), eq):
        b.events.append((b.t, EXTINCTION))
    b.hold(t_end, np.array([d]))


def _snap(b, eq, t_end):
    b.states[-1] = np.array(eq, dtype=float)
    if b.ks:
        b.ks[-1] = np.full_like(b.ks[-1], np.nan)
    b.events.append((b.t, EXTINCTION))
    b.hold(t_end, eq)


def integrate_time_dependent(f: Callable, x0, t0: float, t_end: float,
                             cfg: IntegratorConfig = DEFAULT_CONFIG, project=None,
                             snap: bool = False, eq=None) -> Trajectory:
    """Integrate ``x' = f(t, x)``; ``project`` is applied after every accepted step."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    eq = np.zeros(x0.size) if eq is None else np.asarray(eq, dtype=float)
    b = _Builder(t0, x0, x0.size)
    status, _ = _run(b, f, t_end, cfg, eq, snap=snap, project=project)
    if status == _backend.SNAPPED:
        _snap(b, eq, t_end)
    return b.build()


def flow_map(field: FieldDescription, x0, t: float, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Time-t map x0 -> phi^t(x0)."""
    return integrate(field, x0, t, cfg).final


def level_hit(traj: Trajectory, fn: Callable, value: float) -> Trajectory:
    """Truncate a trajectory where ``fn`` first crosses ``value`` (LevelHit event).

    The crossing time is located by root-finding on the dense output.
    """
    vals = np.asarray(fn(traj.states), dtype=float) - value
    sgn = np.sign(vals)
    idx = np.nonzero(sgn[1:] * sgn[0] <= 0)[0]
    if sgn[0] == 0:
        return Trajectory(traj.times[:1], traj.states[:1], [(traj.times[0], LEVEL_HIT)])
    if idx.size == 0:
        return traj
    i = int(idx[0])
    t0, t1 = traj.times[i], traj.times[i + 1]
    t_hit = brentq(lambda t: float(fn(traj.at(t))) - value, t0, t1, xtol=1e-14)
    keep = i + 1
    times = np.append(traj.times[:keep], t_hit) if t_hit > t0 else traj.times[:keep]
    states = np.vstack([traj.states[:keep], traj.at(t_hit)]) if t_hit > t0 else traj.states[:keep]
    dk = dh = None
    if traj.dense_k is not None and t_hit > t0:
        dk = traj.dense_k[:keep]
        dh = traj.dense_h[:keep]
    events = [e for e in traj.events if e[0] <= t_hit] + [(t_hit, LEVEL_HIT)]
    return Trajectory(times, states, events, dk, dh)


# ---- closed-form semiflows -------------------------------------------------


def closed_semiflow_sign(x: float, t: float) -> float:
    """Semiflow of x' = -sgn(x): linear transit to 0 at unit speed, then rest."""
    if x < 0:
        return min(0.0, x + t)
    if x > 0:
        return max(0.0, x - t)
    return 0.0


SERIES_THRESHOLD = 1e-4


def _one_minus_exp_over_s(s, t):
    """(1 - e^{-st}) / s, by its Taylor series for tiny s."""
    if s < SERIES_THRESHOLD:
        st = s * t
        return t * (1.0 - st / 2.0 + st * st / 6.0 - st ** 3 / 24.0 + st ** 4 / 120.0)
    return -math.expm1(-s * t) / s


def closed_semiflow_blend(x: float, t: float, s: float) -> float:
    """Semiflow of x' = -(1 - s) sgn(x) - s x, s in [0, 1]."""
    if s < 0 or s > 1:
        raise ValueError("s must lie in [0, 1]")
    if x == 0:
        return 0.0
    decay = math.exp(-s * t)
    pull = (1.0 - s) * _one_minus_exp_over_s(s, t)
    if x < 0:
        return min(0.0, decay * x + pull)
    return max(0.0, decay * x - pull)


def closed_semiflow_radial(x, t: float, gamma: ClassKFn, quad_steps: int = 256) -> np.ndarray:
    """Semiflow of x' = -grad gamma(|x|): radius Gamma^{-1}(Gamma(|x|) - t), 0 after extinction."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r == 0.0:
        return np.zeros_like(x)
    G = gamma_capital(gamma, r, quad_steps)
    if t >= G:
        return np.zeros_like(x)
    cap = ClassKFn(forward=lambda rho: gamma_capital(gamma, rho, quad_steps))
    r_t = classk_inverse(cap, G - t, 1e-14)
    return r_t * x / r


def extinction_time(gamma: ClassKFn, r: float, quad_steps: int = 256) -> float:
    return gamma_capital(gamma, r, quad_steps)


def extended_flow(path, s: float, x0, t: float, cfg: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """Flow of the frozen-s extended system (s' = 0); returns the x-block only."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return integrate(path.field_at(s), x0, t, cfg)
