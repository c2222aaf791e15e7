"""Linear stability diagnostics and the planar winding number."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .core import FieldDescription
from .errors import (DimensionMismatch, EigenFailure, NotHurwitz, SingularSystem,
                     VanishesOnCircle)


@dataclass(frozen=True)
class LinearSystem:
    A: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("A has non-finite entries")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def field(self, name: str = "") -> FieldDescription:
        A = self.A
        return FieldDescription(self.n, lambda x: x @ A.T, name=name)


def _as_system(sys) -> LinearSystem:
    return sys if isinstance(sys, LinearSystem) else LinearSystem(sys)


def hurwitz_check(sys) -> tuple:
    """(max real part of the spectrum, whether it is negative)."""
    A = _as_system(sys).A
    try:
        eig = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    m = float(np.max(eig.real))
    return m, m < 0.0


def lyapunov_equation(sys, Q=None) -> np.ndarray:
    """Solve A^T P + P A = -Q by a Kronecker-vectorized linear solve."""
    A = _as_system(sys).A
    n = A.shape[0]
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    _, ok = hurwitz_check(A)
    if not ok:
        raise NotHurwitz("Lyapunov equation needs a Hurwitz matrix")
    eye = np.eye(n)
    # row-major vec: vec(A^T P) = (A^T kron I) vec(P), vec(P A) = (I kron A^T) vec(P)
    M = np.kron(A.T, eye) + np.kron(eye, A.T)
    try:
        p = np.linalg.solve(M, -Q.reshape(-1))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    P = p.reshape(n, n)
    P = 0.5 * (P + P.T)
    if np.linalg.eigvalsh(P).min() <= 0:
        raise SingularSystem("solution is not positive definite")
    return P


WINDING_START = 256
WINDING_MAX = 1 << 16
UNWRAP_THRESHOLD = math.pi / 2


def winding_number(field: FieldDescription, radius: float = 1.0, samples: int = WINDING_START,
                   center=None) -> int:
    """Degree of field/|field| on a circle, by summed wrapped angle increments.

    The sample count doubles until every increment is below pi/2 and two
    consecutive resolutions give the same integer.
    """
    if field.n != 2:
        raise DimensionMismatch("winding number is defined for planar fields")
    c = field.equilibrium if center is None else np.asarray(center, dtype=float)
    m = int(samples)
    prev = None
    while m <= WINDING_MAX:
        th = 2.0 * math.pi * np.arange(m) / m
        pts = c + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
        v = field(pts)
        if np.min(np.linalg.norm(v, axis=1)) < 1e-8:
            raise VanishesOnCircle(f"field vanishes on the circle of radius {radius}")
        total, biggest = _backend.angle_increments(np.arctan2(v[:, 1], v[:, 0]))
        k = int(round(total / (2.0 * math.pi)))
        if biggest < UNWRAP_THRESHOLD and k == prev:
            return k
        prev = k if biggest < UNWRAP_THRESHOLD else None
        m *= 2
    raise VanishesOnCircle("winding number did not stabilise; field nearly vanishes")
