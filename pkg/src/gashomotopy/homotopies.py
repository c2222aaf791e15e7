"""Homotopy families of vector fields, each with a per-s Lyapunov recipe."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .core import FieldDescription, LyapunovPair, annulus_points, quadratic_pair
from .errors import CertificationFailed, EndpointMismatch, NotHurwitz, NotSPD, SpuriousCriticalPoint
from .index import hurwitz_check, lyapunov_equation
from .integrate import DEFAULT_CONFIG, IntegratorConfig, flow_map
from .lyapunov import check_decrease_grid


@dataclass(frozen=True)
class HomotopyPath:
    """s -> field_at(s) on [0, 1] with the pair certifying each s."""

    field_at: Callable[[float], FieldDescription]
    lyap_at: Callable[[float], LyapunovPair]
    endpoints_label: tuple = ("", "")
    n: int = 0
    name: str = ""


def _check_s(s):
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    return s


def _sq_norm(v):
    return np.einsum("...i,...i->...", v, v)


def _neg_grad_field(pair: LyapunovPair, n: int, name: str = "", equilibrium=None) -> FieldDescription:
    return FieldDescription(n, lambda x: -pair.grad(x), equilibrium=equilibrium, name=name)


# ---- straight line to the gradient flow -----------------------------------


def straight_line(X: FieldDescription, pair: LyapunovPair, check: bool = True,
                  annulus=(1e-2, 10.0), N: int = 1024, labels=("X", "-gradV")) -> HomotopyPath:
    """(1 - s) X - s grad V, certified by V with W_s = (1 - s) W + |grad V|^2 / 2.

    The decrement bound along the path is
    <grad V, (1-s)X - s grad V> <= -(1-s) W - s |grad V|^2, so W_s leaves a
    margin of at least s |grad V|^2 / 2.
    """
    if check:
        cert = check_decrease_grid(X, pair, annulus, N)
        if not cert.passed:
            raise CertificationFailed("pair does not certify the starting field", cert)
    end = _neg_grad_field(pair, X.n, name=labels[1], equilibrium=X.equilibrium)

    def field_at(s):
        s = _check_s(s)
        if s == 0.0:
            return X
        if s == 1.0:
            return end
        return FieldDescription(
            X.n, lambda x: (1.0 - s) * X(x) - s * pair.grad(x),
            regularity=X.regularity, equilibrium=X.equilibrium,
            discontinuities=X.discontinuities, name=f"{X.name}@{s:g}")

    def lyap_at(s):
        s = _check_s(s)
        return LyapunovPair(
            V=pair.V, gradV=pair.grad,
            W=lambda x: (1.0 - s) * pair.W(x) + 0.5 * s * _sq_norm(pair.grad(x)),
            name=f"{pair.name}@{s:g}")

    return HomotopyPath(field_at, lyap_at, tuple(labels), X.n, f"straight_line({X.name})")


# ---- interpolated potentials ----------------------------------------------


def interpolated_pair(V0: LyapunovPair, V1: LyapunovPair, s: float) -> LyapunovPair:
    """V(.; s) = (1 - s) V0 + s V1 with W = |grad V(.; s)|^2 / 2."""
    s = _check_s(s)

    def grad(x):
        return (1.0 - s) * V0.grad(x) + s * V1.grad(x)

    return LyapunovPair(V=lambda x: (1.0 - s) * np.asarray(V0.V(x)) + s * np.asarray(V1.V(x)),
                        gradV=grad, W=lambda x: 0.5 * _sq_norm(grad(x)), name=f"interp@{s:g}")


CRITICAL_TOL = 1e-8


def find_spurious_critical_point(pair: LyapunovPair, n: int, annulus=(1e-2, 10.0), N: int = 2048):
    """Search the annulus for a zero of grad V off the origin.

    The worst grid point by |grad V| / |x| is polished by bounded
    minimisation of |grad V|^2; returns the point or None.
    """
    r_min, r_max = annulus
    x = annulus_points(n, N, r_min, r_max)
    ratio = np.linalg.norm(pair.grad(x), axis=1) / np.linalg.norm(x, axis=1)
    for i in np.argsort(ratio)[:3]:
        res = minimize(lambda z: float(_sq_norm(pair.grad(z))), x[i], method="L-BFGS-B",
                       bounds=[(-r_max, r_max)] * n, options={"ftol": 1e-30, "gtol": 1e-14})
        z = res.x
        if np.linalg.norm(z) >= 0.5 * r_min and math.sqrt(_sq_norm(pair.grad(z))) < CRITICAL_TOL:
            return z
    return None


def gradient_interpolation(V0: LyapunovPair, V1: LyapunovPair, n: int, check: bool = True,
                           s_check: Sequence[float] = tuple(np.linspace(0, 1, 21)),
                           annulus=(1e-2, 10.0), N: int = 2048,
                           labels=("-gradV0", "-gradV1")) -> HomotopyPath:
    """s -> -grad((1 - s) V0 + s V1), certified by the interpolated potential."""
    if check:
        for s in s_check:
            z = find_spurious_critical_point(interpolated_pair(V0, V1, s), n, annulus, N)
            if z is not None:
                raise SpuriousCriticalPoint(f"grad V(.; {s:g}) vanishes off the origin", s, z)

    def field_at(s):
        p = interpolated_pair(V0, V1, s)
        return FieldDescription(n, lambda x: -p.grad(x), name=f"interp@{s:g}")

    return HomotopyPath(field_at, lambda s: interpolated_pair(V0, V1, s), tuple(labels), n,
                        "gradient_interpolation")


# ---- flow-based homotopy ---------------------------------------------------

FLOW_CAP = 1.0 - 1e-3
FLOW_SERIES = 1e-8


def flow_homotopy(X: FieldDescription, s: float, x, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """(phi^{s/(1-s)}(x) - x) / s, with X at s = 0 and -x at s = 1.

    Above s = 1 - 1e-3 the value is blended linearly towards -x; below
    s = 1e-8 the first-order expansion X(x) / (1 - s) is returned.
    """
    s = _check_s(s)
    x = np.asarray(x, dtype=float)
    if s == 0.0:
        return X(x)
    if s == 1.0:
        return -x
    if s < FLOW_SERIES:
        # the difference quotient cancels; use its first-order expansion
        return X(x) / (1.0 - s)
    s_eval = min(s, FLOW_CAP)
    val = (flow_map(X, x, s_eval / (1.0 - s_eval), cfg) - x) / s_eval
    if s <= FLOW_CAP:
        return val
    w = (s - FLOW_CAP) / (1.0 - FLOW_CAP)
    return (1.0 - w) * val - w * x


def flow_homotopy_field(X: FieldDescription, s: float, cfg: IntegratorConfig = DEFAULT_CONFIG) -> FieldDescription:
    return FieldDescription(X.n, lambda x: flow_homotopy(X, s, x, cfg), vectorized=False,
                            equilibrium=X.equilibrium, name=f"flow_homotopy@{s:g}")


def linear_flow_homotopy(A, s: float, x) -> np.ndarray:
    """Closed form (expm(s/(1-s) A) - I) x / s of the flow homotopy of x' = Ax."""
    A = np.asarray(A, dtype=float)
    _, ok = hurwitz_check(A)
    if not ok:
        raise NotHurwitz("linear flow homotopy needs a Hurwitz matrix")
    s = _check_s(s)
    x = np.asarray(x, dtype=float)
    if s == 0.0:
        return x @ A.T
    if s == 1.0:
        return -x
    M = (expm(s / (1.0 - s) * A) - np.eye(A.shape[0])) / s
    return x @ M.T


# ---- triangular linear families -------------------------------------------

_UPPER = np.array([[-1.0, 10.0], [0.0, -1.0]])
_LOWER = np.array([[-1.0, 0.0], [10.0, -1.0]])


def naive_linear_matrix(s: float) -> np.ndarray:
    """Convex combination s*U + (1 - s)*L of two stable triangular matrices."""
    s = _check_s(s)
    return s * _UPPER + (1.0 - s) * _LOWER


def patched_linear_matrix(s: float) -> np.ndarray:
    """Triangular path through -I: off-diagonals max{0, (1-2s)10}, max{0, (2s-1)10}."""
    s = _check_s(s)
    return np.array([[-1.0, max(0.0, (1.0 - 2.0 * s) * 10.0)],
                     [max(0.0, (2.0 * s - 1.0) * 10.0), -1.0]])


def patched_linear_family(s: float, x) -> np.ndarray:
    return np.asarray(x, dtype=float) @ patched_linear_matrix(s).T


def lyapunov_equation_pair(A, w_scale: float = 0.25) -> LyapunovPair:
    """V = x^T P x / 2 with A^T P + P A = -I, so <grad V, Ax> = -|x|^2 / 2; W = w_scale |x|^2."""
    P = lyapunov_equation(A, np.eye(np.asarray(A).shape[0]))
    return quadratic_pair(P, w_scale=w_scale)


def _matrix_path(matrix_at, name, labels):
    def field_at(s):
        M = matrix_at(s)
        return FieldDescription(M.shape[0], lambda x: x @ M.T, name=f"{name}@{s:g}")

    def lyap_at(s):
        M = matrix_at(s)
        if hurwitz_check(M)[1]:
            return lyapunov_equation_pair(M)
        # no quadratic certificate exists; the canonical pair exposes the failure
        return quadratic_pair(np.eye(M.shape[0]), w_scale=0.25)

    return HomotopyPath(field_at, lyap_at, labels, 2, name)


def patched_linear_path() -> HomotopyPath:
    return _matrix_path(patched_linear_matrix, "patched_linear", ("ex1_1_upper", "ex1_1"))


def naive_linear_path() -> HomotopyPath:
    return _matrix_path(naive_linear_matrix, "naive_linear", ("ex1_1", "ex1_1_upper"))


def naive_linear_path_fixed_pair() -> HomotopyPath:
    """Convex combination certified by the fixed pair (|x|^2/2, |x|^2/4)."""
    base = naive_linear_path()
    return HomotopyPath(base.field_at, lambda s: quadratic_pair(np.eye(2), w_scale=0.25),
                        base.endpoints_label, 2, "naive_linear_fixed")


# ---- rotation family (negative control) -----------------------------------


def rotation_matrix(s: float) -> np.ndarray:
    s = _check_s(s)
    c, sn = math.cos(s * math.pi), math.sin(s * math.pi)
    return np.array([[c, -sn], [sn, c]])


def rotation_family(s: float, x) -> np.ndarray:
    """R(s) x: rotates x' = x into x' = -x through non-vanishing fields."""
    return np.asarray(x, dtype=float) @ rotation_matrix(s).T


def rotation_path(P=None) -> HomotopyPath:
    """Rotation family with a constant quadratic pair; not GAS-preserving."""
    pair = quadratic_pair(np.eye(2) if P is None else P, w_scale=0.25)

    def field_at(s):
        R = rotation_matrix(s)
        return FieldDescription(2, lambda x: x @ R.T, name=f"rotation@{s:g}")

    return HomotopyPath(field_at, lambda s: pair, ("+x", "canonical"), 2, "rotation_family")


# ---- invex-to-convex potentials -------------------------------------------


def invex_potential(x):
    """v_i(x) = x^2/2 + 3/2 sin(x)^2: coercive, its only critical point is 0."""
    x = np.asarray(x, dtype=float)
    return 0.5 * x * x + 1.5 * np.sin(x) ** 2


def invex_family(s: float, x):
    """H_i(s, x) = sgn(x) ((1+s)/2 x^2 + (1-s) 3/2 sin(x)^2)^(2 - 3s/2)."""
    s = _check_s(s)
    x = np.asarray(x, dtype=float)
    base = 0.5 * (1.0 + s) * x * x + (1.0 - s) * 1.5 * np.sin(x) ** 2
    return np.sign(x) * base ** (2.0 - 1.5 * s)


def exponent_family(s: float, x):
    """Odd extension sgn(x) |x|^(1/2 + 3s/2) of the power gauge path."""
    s = _check_s(s)
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** (0.5 + 1.5 * s)


def potential_path(s: float, x):
    """Potentials from v_i (s = 0) to x^2 (s = 1) keeping 0 the global minimiser.

    First half: sqrt|H_i(2s, x)| moves v_i to sqrt|x|; second half raises the
    power of |x| from 1/2 to 2.
    """
    s = _check_s(s)
    if s <= 0.5:
        return np.sqrt(np.abs(invex_family(2.0 * s, x)))
    return np.abs(exponent_family(2.0 * s - 1.0, x))


def _potential_slope(s, x):
    x = np.asarray(x, dtype=float)
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    return (potential_path(s, x + h) - potential_path(s, x - h)) / (2.0 * h)


def invex_path() -> HomotopyPath:
    """Gradient descent on each potential of ``potential_path``; V_s is the potential itself."""

    def field_at(s):
        s = _check_s(s)
        return FieldDescription(1, lambda x: -_potential_slope(s, x), name=f"invex_path({s:g})")

    def lyap_at(s):
        s = _check_s(s)
        return LyapunovPair(V=lambda x: potential_path(s, x[..., 0]),
                            gradV=lambda x: _potential_slope(s, x),
                            W=lambda x: 0.5 * _potential_slope(s, x[..., 0]) ** 2,
                            name=f"potential({s:g})")

    return HomotopyPath(field_at, lyap_at, ("ex3_4_invex", "x^2"), 1, "invex_path")


def derivative_sign_changes(values) -> int:
    """Sign changes of the forward-difference derivative of sampled values."""
    d = np.sign(np.diff(np.asarray(values, dtype=float)))
    d = d[d != 0]
    return int(np.count_nonzero(d[1:] != d[:-1]))


# ---- Gaussian optimal transport -------------------------------------------

SPD_CLAMP = 1e-14


def _check_spd(S, name):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or not np.allclose(S, S.T, atol=1e-12):
        raise NotSPD(f"{name} is not symmetric")
    if np.linalg.eigvalsh(S).min() <= 1e-10:
        raise NotSPD(f"{name} is not positive definite")
    return 0.5 * (S + S.T)


def spd_power(S, p: float) -> np.ndarray:
    """S^p for symmetric positive (semi)definite S via eigh, eigenvalues clamped at 1e-14."""
    w, U = np.linalg.eigh(np.asarray(S, dtype=float))
    w = np.maximum(w, SPD_CLAMP)
    return (U * w ** p) @ U.T


def gaussian_ot_map(S0, S1) -> np.ndarray:
    """Linear optimal transport map between centred Gaussians."""
    S0 = _check_spd(S0, "Sigma0")
    S1 = _check_spd(S1, "Sigma1")
    r = spd_power(S0, 0.5)
    ri = spd_power(S0, -0.5)
    A = ri @ spd_power(r @ S1 @ r, 0.5) @ ri
    return 0.5 * (A + A.T)


def gaussian_sigma(S0, S1, s: float) -> np.ndarray:
    """Covariance of the displacement interpolation at s."""
    s = _check_s(s)
    S0 = _check_spd(S0, "Sigma0")
    S1 = _check_spd(S1, "Sigma1")
    r = spd_power(S0, 0.5)
    ri = spd_power(S0, -0.5)
    M = (1.0 - s) * S0 + s * spd_power(r @ S1 @ r, 0.5)
    S = ri @ M @ M @ ri
    return 0.5 * (S + S.T)


def gaussian_ot_path(S0, S1, s: float) -> tuple:
    """Field -Sigma(s)^{-1} x and pair (x^T Sigma(s)^{-1} x / 2, |Sigma(s)^{-1} x|^2 / 2)."""
    Si = np.linalg.inv(gaussian_sigma(S0, S1, s))
    Si = 0.5 * (Si + Si.T)
    n = Si.shape[0]
    field = FieldDescription(n, lambda x: -(x @ Si), name=f"gaussian_ot@{s:g}")
    pair = LyapunovPair(V=lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, Si, x),
                        gradV=lambda x: x @ Si,
                        W=lambda x: 0.5 * _sq_norm(x @ Si), name=f"gaussian_ot@{s:g}")
    return field, pair


def gaussian_ot_homotopy(S0, S1) -> HomotopyPath:
    n = np.asarray(S0).shape[0]
    return HomotopyPath(lambda s: gaussian_ot_path(S0, S1, s)[0],
                        lambda s: gaussian_ot_path(S0, S1, s)[1],
                        ("ex5_1_gaussian", "canonical"), n, "gaussian_ot")


# ---- assembling paths -----------------------------------------------------

ENDPOINT_TOL = 1e-6


def _endpoint_points(n):
    return annulus_points(n, 20, 0.1, 5.0, skip=7)


def fields_agree(F: FieldDescription, G: FieldDescription, tol: float = ENDPOINT_TOL, points=None) -> bool:
    pts = _endpoint_points(F.n) if points is None else points
    return F.n == G.n and float(np.max(np.abs(F(pts) - G(pts)))) <= tol


def concatenate(paths: Sequence[HomotopyPath]) -> HomotopyPath:
    """Join paths on equal sub-intervals of [0, 1]; pairs are inherited piecewise."""
    paths = list(paths)
    if not paths:
        raise ValueError("need at least one path")
    if len(paths) == 1:
        return paths[0]
    for a, b in zip(paths, paths[1:]):
        if not fields_agree(a.field_at(1.0), b.field_at(0.0)):
            raise EndpointMismatch(f"end of {a.name} differs from start of {b.name}")
    m = len(paths)

    def locate(s):
        s = _check_s(s)
        k = min(int(math.floor(s * m)), m - 1)
        return paths[k], min(1.0, max(0.0, s * m - k))

    def field_at(s):
        p, u = locate(s)
        return p.field_at(u)

    def lyap_at(s):
        p, u = locate(s)
        return p.lyap_at(u)

    return HomotopyPath(field_at, lyap_at, (paths[0].endpoints_label[0], paths[-1].endpoints_label[1]),
                        paths[0].n, " + ".join(p.name for p in paths))


def reverse(path: HomotopyPath) -> HomotopyPath:
    return HomotopyPath(lambda s: path.field_at(1.0 - _check_s(s)),
                        lambda s: path.lyap_at(1.0 - _check_s(s)),
                        path.endpoints_label[::-1], path.n, f"reverse({path.name})")


def shifted_equilibrium_family(xbar, s: float, t: float, x) -> np.ndarray:
    """Time-t map e^{-t} x + s (1 - e^{-t}) xbar, whose fixed point is s xbar."""
    s = _check_s(s)
    e = math.exp(-t)
    return e * np.asarray(x, dtype=float) + s * (1.0 - e) * np.asarray(xbar, dtype=float)


def export_path_grid(path: HomotopyPath, s_values, points, out) -> None:
    """CSV with columns s, x1..xn, f1..fn for every (s, point)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s"] + [f"x{i + 1}" for i in range(n)] + [f"f{i + 1}" for i in range(n)])
        for s in s_values:
            vals = path.field_at(float(s))(points)
            for p, v in zip(points, np.atleast_2d(vals)):
                w.writerow([repr(float(s))] + [repr(float(c)) for c in p] + [repr(float(c)) for c in v])
