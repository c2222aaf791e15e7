"""Planar fields transported to the sphere minus the north pole by the
stereographic chart.
"""
from __future__ import annotations

import csv

import numpy as np

from .core import FieldDescription, LyapunovPair, annulus_points
from .errors import AtProjectionPole, NearProjectionPole
from .integrate import DEFAULT_CONFIG, IntegratorConfig, Trajectory, integrate_time_dependent
from .lyapunov import Certificate, _fmt, _make

NORTH = np.array([0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, -1.0])
UNIT_TOL = 1e-10
POLE_CAP = 1e-6


def _as_sphere_point(p):
    p = np.asarray(p, dtype=float)
    if np.any(np.abs(np.linalg.norm(p, axis=-1) - 1.0) > UNIT_TOL):
        raise ValueError("point is not on the unit sphere")
    return p


def stereo_fwd(p) -> np.ndarray:
    """Projection from the north pole onto the equatorial plane."""
    p = _as_sphere_point(p)
    den = 1.0 - p[..., 2]
    if np.any(den <= 0.0):
        raise AtProjectionPole("the north pole has no stereographic image")
    return p[..., :2] / den[..., None]


def stereo_inv(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    s = np.einsum("...i,...i->...", x, x)[..., None]
    return np.concatenate([2.0 * x, s - 1.0], axis=-1) / (1.0 + s)


def stereo_inv_jacobian(x) -> np.ndarray:
    """3x2 Jacobian of the inverse chart at a plane point."""
    x = np.asarray(x, dtype=float).reshape(2)
    s = float(np.dot(x, x))
    q = 1.0 + s
    top = 2.0 * np.eye(2) / q - 4.0 * np.outer(x, x) / q ** 2
    bottom = 4.0 * x / q ** 2
    return np.vstack([top, bottom])


def stereo_fwd_jacobian(p) -> np.ndarray:
    """2x3 Jacobian of the chart at a sphere point."""
    p = np.asarray(p, dtype=float).reshape(3)
    den = 1.0 - p[2]
    if den <= 0.0:
        raise AtProjectionPole("the north pole has no stereographic image")
    return np.array([[1.0 / den, 0.0, p[0] / den ** 2],
                     [0.0, 1.0 / den, p[1] / den ** 2]])


def pushforward(field: FieldDescription, p) -> np.ndarray:
    """Tangent vector D(chart^{-1}) field at the chart image of p."""
    p = np.asarray(p, dtype=float).reshape(3)
    x = stereo_fwd(p)
    return stereo_inv_jacobian(x) @ field(x)


def pushforward_batch(field: FieldDescription, ps) -> np.ndarray:
    """Vectorized pushforward for rows of unit vectors."""
    ps = _as_sphere_point(np.atleast_2d(ps))
    x = stereo_fwd(ps)
    v = field(x)
    s = np.einsum("ij,ij->i", x, x)
    q = 1.0 + s
    xv = np.einsum("ij,ij->i", x, v)
    top = 2.0 * v / q[:, None] - 4.0 * x * (xv / q ** 2)[:, None]
    bottom = 4.0 * xv / q ** 2
    return np.concatenate([top, bottom[:, None]], axis=1)


def simulate_on_sphere(field2d: FieldDescription, p0, t_end: float,
                       cfg: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """Integrate the pushed-forward field, renormalizing after every step."""
    p0 = _as_sphere_point(np.asarray(p0, dtype=float).reshape(3))

    def f(t, p):
        if 1.0 - p[2] < POLE_CAP:
            raise NearProjectionPole(f"trajectory entered the {POLE_CAP:g} cap at the north pole")
        return pushforward(field2d, p / np.linalg.norm(p))

    def project(p):
        return p / np.linalg.norm(p)

    if 1.0 - p0[2] < POLE_CAP:
        raise NearProjectionPole("initial point is inside the north-pole cap")
    return integrate_time_dependent(f, p0, 0.0, float(t_end), cfg, project=project)


def chart_lyapunov(p):
    """|chart(p)|^2 / 2."""
    x = stereo_fwd(p)
    return 0.5 * np.einsum("...i,...i->...", x, x)


def chart_certificate(path, s_grid=None, annulus=(1e-2, 10.0), N: int = 1024) -> Certificate:
    """Decrease of each chart pair along the pushed-forward field, read back through the chart.

    At every s the sphere field is sampled at chart preimages of annulus
    points, mapped back by the forward chart Jacobian, and tested against
    the pair of the planar path at that s.
    """
    s_grid = np.linspace(0.0, 1.0, 21) if s_grid is None else np.asarray(s_grid, dtype=float)
    x = annulus_points(2, N, annulus[0], annulus[1])
    ps = stereo_inv(x)
    rows, witnesses, worst, total = [], [], -np.inf, 0
    for s in s_grid:
        field = path.field_at(float(s))
        pair: LyapunovPair = path.lyap_at(float(s))
        v = pushforward_batch(field, ps)
        pulled = np.array([stereo_fwd_jacobian(p) @ w for p, w in zip(ps, v)])
        m = np.einsum("ij,ij->i", pair.grad(x), pulled) + np.asarray(pair.W(x), dtype=float)
        cert = _make("chart", N, m, ps, 0.0)
        rows.append((_fmt(s), cert.worst_margin, cert.verdict))
        worst = max(worst, cert.worst_margin)
        total += N
        for w in cert.witnesses[:1]:
            witnesses.append(np.concatenate([[s], w]))
    return Certificate("chart_decrease", total, float(worst), 0.0,
                       "fail" if witnesses else "pass", witnesses[:5], rows)


def sphere_homotopy():
    """Planar path X -> -x -> Y (through the canonical field), certified by |x|^2/2."""
    from . import registry
    from .homotopies import concatenate, reverse, straight_line

    X, Y = registry.get("ex3_7_X"), registry.get("ex3_7_Y")
    a = straight_line(X.field, X.pair, labels=("ex3_7_X", "canonical"))
    b = straight_line(Y.field, Y.pair, labels=("ex3_7_Y", "canonical"))
    return concatenate([a, reverse(b)])


def sphere_trajectory_to_csv(traj: Trajectory, out) -> None:
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "p1", "p2", "p3"])
        for t, p in zip(traj.times, traj.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in p])
