# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same API and semantics as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, pow, isfinite, nextafter, fmod, M_PI

cnp.import_array()

DEF NSTAGE = 7

cdef double[7] C_ = [0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0]
cdef double[7][6] A_ = [
    [0, 0, 0, 0, 0, 0],
    [1.0 / 5, 0, 0, 0, 0, 0],
    [3.0 / 40, 9.0 / 40, 0, 0, 0, 0],
    [44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0],
    [19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0],
    [9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0],
    [35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84],
]
cdef double[7] E_ = [-71.0 / 57600, 0.0, 71.0 / 16695, -71.0 / 1920,
                     17253.0 / 339200, -22.0 / 525, 1.0 / 40]

DEF DONE = 0
DEF SNAPPED = 1
DEF CROSSED = 2
DEF BLOWUP = 3
DEF UNDERFLOW = 4
DEF TRUNCATED = 5

DEF SAFETY = 0.9
DEF MIN_FACTOR = 0.2
DEF MAX_FACTOR = 10.0


cdef inline void _call(object f, double t, double[::1] y, double[::1] out) except *:
    cdef Py_ssize_t i, n = y.shape[0]
    cdef cnp.ndarray yarr = np.empty(n)
    cdef double[::1] yv = yarr
    for i in range(n):
        yv[i] = y[i]
    cdef double[::1] r = np.ascontiguousarray(f(t, yarr), dtype=np.float64).reshape(n)
    for i in range(n):
        out[i] = r[i]


cdef inline double _spacing(double t):
    t = fabs(t)
    if t < 1.0:
        t = 1.0
    return nextafter(t, 2.0 * t) - t


cdef double _initial_step(object f, double t0, double[::1] y0, double[::1] f0,
                          double span, double rtol, double atol, double max_step) except -1.0:
    cdef Py_ssize_t i, n = y0.shape[0]
    cdef double d0 = 0.0, d1 = 0.0, d2 = 0.0, sc, h0, h1
    cdef double[::1] y1 = np.empty(n)
    cdef double[::1] f1 = np.empty(n)
    for i in range(n):
        sc = atol + fabs(y0[i]) * rtol
        d0 += (y0[i] / sc) ** 2
        d1 += (f0[i] / sc) ** 2
    d0 = sqrt(d0 / n)
    d1 = sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    if h0 > span:
        h0 = span
    for i in range(n):
        y1[i] = y0[i] + h0 * f0[i]
    _call(f, t0 + h0, y1, f1)
    for i in range(n):
        sc = atol + fabs(y0[i]) * rtol
        d2 += ((f1[i] - f0[i]) / sc) ** 2
    d2 = sqrt(d2 / n) / h0
    if d1 < d2:
        d1 = d2
    if d1 <= 1e-15:
        h1 = h0 * 1e-3
        if h1 < 1e-6:
            h1 = 1e-6
    else:
        h1 = pow(0.01 / d1, 0.2)
    h1 = min(100 * h0, h1)
    return min(h1, max_step, span)


def dopri45(f, double t0, x0, double t_end, double rtol, double atol,
            double max_step, double first_step, double snap_radius,
            eq, double lo, double hi, double blowup, long max_steps,
            project=None):
    cdef double[::1] y = np.array(x0, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t n = y.shape[0]
    cdef double[::1] eqv = np.ascontiguousarray(eq, dtype=np.float64).reshape(n)
    cdef double t = t0, h, t_new, en, sc, acc, factor, nrm, dot
    cdef Py_ssize_t i, s, j
    cdef long attempts = 0
    cdef int status = DONE
    cdef bint last
    cdef double[::1] fy = np.empty(n)
    cdef double[::1] ys = np.empty(n)
    cdef double[::1] ynew = np.empty(n)
    cdef cnp.ndarray Karr
    cdef double[:, ::1] K
    ts = [t]
    xs = [np.asarray(y).copy()]
    ks = []
    hs = []
    if t_end <= t:
        return (np.array(ts), np.array(xs), np.empty((0, NSTAGE, n)),
                np.empty(0), DONE, 0.0)
    _call(f, t, y, fy)
    if first_step > 0:
        h = first_step
    else:
        h = _initial_step(f, t, y, fy, t_end - t, rtol, atol, max_step)
    Karr = np.empty((NSTAGE, n))
    K = Karr
    while t < t_end:
        if attempts >= max_steps:
            status = TRUNCATED
            break
        attempts += 1
        if h > max_step:
            h = max_step
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        if h < 2.0 * _spacing(t):
            if not last:
                status = UNDERFLOW
                break
            # sub-ulp remainder: an Euler step is exact to roundoff
            for i in range(n):
                y[i] = y[i] + h * fy[i]
            if project is not None:
                pr = np.ascontiguousarray(project(np.asarray(y).copy()),
                                          dtype=np.float64).reshape(n)
                for i in range(n):
                    y[i] = pr[i]
            ks.append(np.tile(np.asarray(fy), (NSTAGE, 1)))
            hs.append(h)
            t = t_end
            ts.append(t)
            xs.append(np.asarray(y).copy())
            break
        for i in range(n):
            K[0, i] = fy[i]
        for s in range(1, NSTAGE):
            for i in range(n):
                acc = 0.0
                for j in range(s):
                    acc += A_[s][j] * K[j, i]
                ys[i] = y[i] + h * acc
            if s == NSTAGE - 1:
                for i in range(n):
                    ynew[i] = ys[i]
            _call(f, t + C_[s] * h, ys, K[s])
        en = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(NSTAGE):
                acc += E_[j] * K[j, i]
            sc = atol + rtol * max(fabs(y[i]), fabs(ynew[i]))
            en += (h * acc / sc) ** 2
        en = sqrt(en / n)
        if not isfinite(en):
            nrm = 0.0
            for i in range(n):
                nrm += y[i] * y[i]
            if sqrt(nrm) > blowup or h < 1e-12:
                status = BLOWUP
                break
            h *= MIN_FACTOR
            continue
        if en <= 1.0:
            if en == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, SAFETY * pow(en, -0.2))
            t_new = t_end if last else t + h
            ks.append(Karr.copy())
            hs.append(h)
            if project is not None:
                pr = np.ascontiguousarray(project(np.asarray(ynew).copy()),
                                          dtype=np.float64).reshape(n)
                for i in range(n):
                    y[i] = pr[i]
                _call(f, t_new, y, fy)
            else:
                for i in range(n):
                    y[i] = ynew[i]
                    fy[i] = K[NSTAGE - 1, i]
            t = t_new
            ts.append(t)
            xs.append(np.asarray(y).copy())
            h = h * factor
            nrm = 0.0
            for i in range(n):
                nrm += y[i] * y[i]
            if not isfinite(nrm) or sqrt(nrm) > blowup:
                status = BLOWUP
                break
            if n == 1 and (y[0] <= lo or y[0] >= hi):
                status = CROSSED
                break
            if snap_radius > 0.0:
                nrm = 0.0
                dot = 0.0
                for i in range(n):
                    nrm += (y[i] - eqv[i]) ** 2
                    dot += (y[i] - eqv[i]) * fy[i]
                if sqrt(nrm) < snap_radius and dot < 0.0:
                    status = SNAPPED
                    break
        else:
            factor = SAFETY * pow(en, -0.2)
            if factor < MIN_FACTOR:
                factor = MIN_FACTOR
            h *= factor
    ks_arr = np.array(ks) if ks else np.empty((0, NSTAGE, n))
    return np.array(ts), np.array(xs), ks_arr, np.array(hs), status, h


cdef int[20] PRIMES_ = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43,
                        47, 53, 59, 61, 67, 71]


def halton(Py_ssize_t n_points, Py_ssize_t dim, Py_ssize_t skip=0):
    if dim > 20:
        raise ValueError("halton supports dim <= 20")
    out = np.empty((n_points, dim))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t k, d
    cdef long long i, base
    cdef double f, r
    for d in range(dim):
        base = PRIMES_[d]
        for k in range(n_points):
            i = skip + k + 1
            f = 1.0
            r = 0.0
            while i > 0:
                f /= base
                r += f * (i % base)
                i //= base
            o[k, d] = r
    return out


def angle_increments(angles):
    cdef double[::1] a = np.ascontiguousarray(angles, dtype=np.float64)
    cdef Py_ssize_t i, m = a.shape[0]
    cdef double d, total = 0.0, mx = 0.0, two_pi = 2.0 * M_PI
    for i in range(m):
        d = a[(i + 1) % m] - a[i] + M_PI
        d = fmod(d, two_pi)
        if d < 0:
            d += two_pi
        d -= M_PI
        total += d
        if fabs(d) > mx:
            mx = fabs(d)
    return total, mx
