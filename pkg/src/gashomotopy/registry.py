"""Named example fields with their Lyapunov pairs."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from .core import FieldDescription, LyapunovPair, Regularity, quadratic_pair, sqrt_gauge
from .errors import UnknownExample
from .index import lyapunov_equation


@dataclass(frozen=True)
class Example:
    name: str
    field: FieldDescription
    pair: LyapunovPair
    description: str = ""


def _sq(x):
    return np.einsum("...i,...i->...", x, x)


def canonical() -> Example:
    field = FieldDescription(2, lambda x: -np.asarray(x, dtype=float), name="canonical")
    return Example("canonical", field, quadratic_pair(n=2), "x' = -x")


def ex1_1() -> Example:
    A = np.array([[-1.0, 0.0], [10.0, -1.0]])
    P = lyapunov_equation(A)
    field = FieldDescription(2, lambda x: x @ A.T, name="ex1_1")
    return Example("ex1_1", field, quadratic_pair(P, w_scale=0.25),
                   "stable lower-triangular system, certified by A^T P + P A = -I")


def huber(x, delta: float = 1.0):
    a = np.abs(np.asarray(x, dtype=float))
    return np.where(a <= delta, 0.5 * a * a, delta * (a - 0.5 * delta))


def ex1_3_sign() -> Example:
    field = FieldDescription(1, lambda x: -np.sign(x), Regularity.SET_VALUED_AT_ORIGIN,
                             discontinuities=(0.0,), name="ex1_3_sign")
    pair = LyapunovPair(V=lambda x: 0.5 * x[..., 0] ** 2, gradV=lambda x: np.asarray(x, dtype=float),
                        W=lambda x: huber(x[..., 0]), name="half_square_huber")
    return Example("ex1_3_sign", field, pair, "x' = -sgn(x), finite-time convergent")


def radial_gauge_field(gamma=None, n: int = 2) -> FieldDescription:
    """-grad gamma(|x|) off the origin, 0 at the origin."""
    gamma = sqrt_gauge() if gamma is None else gamma

    def f(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        safe = np.where(r > 0, r, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r > 0, -gamma.deriv(safe) * x / safe, 0.0)

    return FieldDescription(n, f, Regularity.SET_VALUED_AT_ORIGIN, name="ex1_4_radial")


def ex1_4_radial() -> Example:
    def V(x):
        return np.sqrt(np.linalg.norm(x, axis=-1))

    def grad(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return 0.5 * x / r ** 1.5

    pair = LyapunovPair(V=V, gradV=grad, W=lambda x: 0.125 / np.linalg.norm(x, axis=-1), name="sqrt_norm")
    return Example("ex1_4_radial", radial_gauge_field(), pair,
                   "x' = -grad sqrt|x|, extinction at (4/3)|x0|^(3/2)")


def ex3_3_field(x):
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([-x1 + x1 * x2, -x2], axis=-1)


def ex3_3_V(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * np.log1p(x[..., 0] ** 2) + 0.5 * x[..., 1] ** 2


def ex3_3_grad(x):
    x = np.asarray(x, dtype=float)
    return np.stack([x[..., 0] / (1.0 + x[..., 0] ** 2), x[..., 1]], axis=-1)


def ex3_3() -> Example:
    field = FieldDescription(2, ex3_3_field, name="ex3_3")
    pair = LyapunovPair(V=ex3_3_V, gradV=ex3_3_grad,
                        W=lambda x: -0.5 * _sq_dot(ex3_3_grad(x), ex3_3_field(x)), name="log_quadratic")
    return Example("ex3_3", field, pair, "polynomial field without polynomial Lyapunov function")


def _sq_dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def invex_derivative(x):
    x = np.asarray(x, dtype=float)
    return x + 1.5 * np.sin(2.0 * x)


def ex3_4_invex() -> Example:
    from .homotopies import invex_potential

    field = FieldDescription(1, lambda x: -invex_derivative(x), name="ex3_4_invex")
    pair = LyapunovPair(V=lambda x: invex_potential(x[..., 0]), gradV=invex_derivative,
                        W=lambda x: 0.5 * invex_derivative(x[..., 0]) ** 2, name="invex")
    return Example("ex3_4_invex", field, pair, "gradient descent on an invex potential")


def sphere_X(x):
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([-0.1 * x1 - x2, x1 - 0.1 * x2], axis=-1)


def sphere_Y(x):
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([-x1 - x1 * x2 ** 2, -x2 + x1 ** 2 * x2], axis=-1)


def ex3_7_X() -> Example:
    return Example("ex3_7_X", FieldDescription(2, sphere_X, name="ex3_7_X"),
                   quadratic_pair(n=2, w_scale=0.05), "slow spiral sink")


def ex3_7_Y() -> Example:
    return Example("ex3_7_Y", FieldDescription(2, sphere_Y, name="ex3_7_Y"),
                   quadratic_pair(n=2, w_scale=0.5), "cubic sink")


def ex4_1() -> Example:
    field = FieldDescription(2, lambda x: -np.asarray(x, dtype=float), name="ex4_1")
    return Example("ex4_1", field, quadratic_pair(n=2),
                   "undisturbed part of x' = -x + R d with orientation-reversing R")


SIGMA0 = np.diag([4.0, 1.0])


def ex5_1_gaussian() -> Example:
    Si = np.linalg.inv(SIGMA0)
    field = FieldDescription(2, lambda x: -(x @ Si), name="ex5_1_gaussian")
    pair = LyapunovPair(V=lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, Si, x),
                        gradV=lambda x: x @ Si, W=lambda x: 0.5 * _sq(x @ Si), name="gaussian")
    return Example("ex5_1_gaussian", field, pair, "gradient flow of a centred Gaussian log-density")


REGISTRY: Dict[str, Callable[[], Example]] = {
    "canonical": canonical,
    "ex1_1": ex1_1,
    "ex1_3_sign": ex1_3_sign,
    "ex1_4_radial": ex1_4_radial,
    "ex3_3": ex3_3,
    "ex3_4_invex": ex3_4_invex,
    "ex3_7_X": ex3_7_X,
    "ex3_7_Y": ex3_7_Y,
    "ex4_1": ex4_1,
    "ex5_1_gaussian": ex5_1_gaussian,
}


def names() -> list:
    return list(REGISTRY)


def get(name: str) -> Example:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise UnknownExample(f"unknown example {name!r}") from None
