"""Pure-Python kernels (reference implementation and fallback).

API mirrors ``_ckernels``: ``dopri45``, ``halton``, ``angle_increments``.
"""
import math

import numpy as np

# Dormand-Prince 5(4) tableau.
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array(A[6] + [0.0])
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])

# Dense output (4th order), y(t + theta h) = y + h * K^T P [theta, theta^2, theta^3, theta^4].
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

DONE, SNAPPED, CROSSED, BLOWUP, UNDERFLOW, TRUNCATED = range(6)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


def _rms(v):
    return math.sqrt(float(np.dot(v, v)) / v.size)


def _call(f, t, y):
    return np.asarray(f(t, y), dtype=float).reshape(y.shape)


def initial_step(f, t0, y0, f0, direction_end, rtol, atol, max_step):
    scale = atol + np.abs(y0) * rtol
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, direction_end)
    y1 = y0 + h0 * f0
    f1 = _call(f, t0 + h0, y1)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step, direction_end)


def dopri45(f, t0, x0, t_end, rtol, atol, max_step, first_step, snap_radius,
            eq, lo, hi, blowup, max_steps, project=None):
    """Adaptive Dormand-Prince integration of ``x' = f(t, x)`` on [t0, t_end].

    Stops early on: snapping into the ``snap_radius`` ball around ``eq`` with
    an inward-pointing field (SNAPPED), leaving the open interval ``(lo, hi)``
    in 1D (CROSSED; the crossing step is included), blow-up, step underflow
    or step-count exhaustion.

    Returns ``(ts, xs, ks, hs, status, h_next)``; ``ks[i]`` holds the seven
    stage derivatives of step ``i`` for dense output.
    """
    y = np.array(x0, dtype=float)
    n = y.size
    eq = np.asarray(eq, dtype=float)
    t = float(t0)
    ts = [t]
    xs = [y.copy()]
    ks = []
    hs = []
    if t_end <= t:
        return np.array(ts), np.array(xs), np.empty((0, 7, n)), np.empty(0), DONE, 0.0
    fy = _call(f, t, y)
    h = first_step if first_step > 0 else initial_step(
        f, t, y, fy, t_end - t, rtol, atol, max_step)
    status = DONE
    attempts = 0
    K = np.empty((7, n))
    while t < t_end:
        if attempts >= max_steps:
            status = TRUNCATED
            break
        attempts += 1
        h = min(h, max_step)
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        if h < 2.0 * np.spacing(max(abs(t), 1.0)):
            if not last:
                status = UNDERFLOW
                break
            # sub-ulp remainder: an Euler step is exact to roundoff
            y = y + h * fy
            if project is not None:
                y = np.asarray(project(y), dtype=float)
            ks.append(np.tile(fy, (7, 1)))
            hs.append(h)
            t = t_end
            ts.append(t)
            xs.append(y.copy())
            break
        K[0] = fy
        for s in range(1, 7):
            a = A[s]
            dy = a[0] * K[0]
            for j in range(1, s):
                if a[j] != 0.0:
                    dy = dy + a[j] * K[j]
            ys = y + h * dy
            if s == 6:
                y_new = ys
            K[s] = _call(f, t + C[s] * h, ys)
        err = h * (E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = _rms(err / scale)
        if not np.isfinite(en):
            if not np.all(np.isfinite(y_new)):
                if _rms(y) * math.sqrt(n) > blowup or h < 1e-12:
                    status = BLOWUP
                    break
            h *= MIN_FACTOR
            continue
        if en <= 1.0:
            factor = MAX_FACTOR if en == 0.0 else min(MAX_FACTOR, SAFETY * en ** -0.2)
            t_new = t_end if last else t + h
            if project is not None:
                y_new = np.asarray(project(y_new), dtype=float)
                f_new = _call(f, t_new, y_new)
            else:
                f_new = K[6].copy()
            ks.append(K.copy())
            hs.append(h)
            t = t_new
            y = y_new
            fy = f_new
            ts.append(t)
            xs.append(y.copy())
            h = h * factor
            if not np.all(np.isfinite(y)) or math.sqrt(float(np.dot(y, y))) > blowup:
                status = BLOWUP
                break
            if n == 1 and (y[0] <= lo or y[0] >= hi):
                status = CROSSED
                break
            if snap_radius > 0.0:
                d = y - eq
                if math.sqrt(float(np.dot(d, d))) < snap_radius and float(np.dot(d, fy)) < 0.0:
                    status = SNAPPED
                    break
        else:
            h *= max(MIN_FACTOR, SAFETY * en ** -0.2)
    ks_arr = np.array(ks) if ks else np.empty((0, 7, n))
    return np.array(ts), np.array(xs), ks_arr, np.array(hs), status, h


def dense_eval(x0, K, h, theta):
    """Dense-output state at fraction ``theta`` of a step of size ``h``."""
    theta = np.asarray(theta, dtype=float)
    powers = np.stack([theta, theta ** 2, theta ** 3, theta ** 4], axis=-1)
    Q = K.T @ P  # (n, 4)
    return x0 + h * (powers @ Q.T)


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


def halton(n_points, dim, skip=0):
    """First ``n_points`` Halton points in [0, 1)^dim after skipping ``skip``."""
    if dim > len(_PRIMES):
        raise ValueError(f"halton supports dim <= {len(_PRIMES)}")
    idx = np.arange(skip + 1, skip + n_points + 1, dtype=np.int64)
    out = np.empty((n_points, dim))
    for d in range(dim):
        base = _PRIMES[d]
        i = idx.copy()
        f = np.full(n_points, 1.0)
        r = np.zeros(n_points)
        while np.any(i > 0):
            f = f / base
            r = r + f * (i % base)
            i = i // base
        out[:, d] = r
    return out


def angle_increments(angles):
    """Wrapped successive increments of a closed angle sequence.

    Returns ``(total, max_abs_increment)`` with each increment mapped into
    (-pi, pi]; the sequence is closed by the wrap from last to first.
    """
    a = np.asarray(angles, dtype=float)
    d = np.diff(np.append(a, a[0]))
    d = (d + math.pi) % (2 * math.pi) - math.pi
    return float(d.sum()), float(np.max(np.abs(d)))
