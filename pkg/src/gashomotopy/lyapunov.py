"""Lyapunov-decrease certification on sample grids and trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import FieldDescription, LyapunovPair, SetValuedSample, annulus_points

DEFAULT_ANNULUS = (1e-3, 10.0)
MAX_WITNESSES = 5


@dataclass
class Certificate:
    """Outcome of a sampled check; ``worst_margin <= tolerance`` means pass.

    ``rows`` carries optional per-parameter sub-results as ``(label, margin, verdict)``.
    """

    property: str
    sample_count: int
    worst_margin: float
    tolerance: float
    verdict: str
    witnesses: list = dc_field(default_factory=list)
    rows: list = dc_field(default_factory=list)

    def __post_init__(self):
        if self.verdict not in ("pass", "fail"):
            raise ValueError("verdict must be 'pass' or 'fail'")
        if (self.verdict == "fail") != bool(self.witnesses):
            raise ValueError("a failing certificate needs witnesses, a passing one none")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def report(self) -> str:
        return format_report(self)


def _fmt(v) -> str:
    return "%.12e" % float(v)


def format_report(cert: Certificate, prefix: str = "") -> str:
    """Deterministic ``key: value`` text rendering of a certificate."""
    lines = [
        f"{prefix}property: {cert.property}",
        f"{prefix}verdict: {cert.verdict}",
        f"{prefix}sample_count: {cert.sample_count}",
        f"{prefix}worst_margin: {_fmt(cert.worst_margin)}",
        f"{prefix}tolerance: {_fmt(cert.tolerance)}",
        f"{prefix}witness_count: {len(cert.witnesses)}",
    ]
    for i, w in enumerate(cert.witnesses):
        coords = " ".join(_fmt(v) for v in np.atleast_1d(np.asarray(w, dtype=float)))
        lines.append(f"{prefix}witness[{i}]: {coords}")
    for i, (label, margin, verdict) in enumerate(cert.rows):
        lines.append(f"{prefix}row[{i}]: {label} {_fmt(margin)} {verdict}")
    return "\n".join(lines) + "\n"


def _make(prop, count, margins, points, tol, rows=()):
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return Certificate(prop, int(count), float("-inf"), tol, "pass", [], list(rows))
    bad = ~(margins <= tol)
    worst = float(np.max(np.where(np.isnan(margins), np.inf, margins)))
    witnesses = []
    if np.any(bad):
        order = np.argsort(-np.where(np.isnan(margins), np.inf, margins))
        witnesses = [np.array(points[i], dtype=float) for i in order[:MAX_WITNESSES] if bad[i]]
    return Certificate(prop, int(count), worst, tol, "fail" if witnesses else "pass",
                       witnesses, list(rows))


def decrease_margins(field: FieldDescription, pair: LyapunovPair, x) -> np.ndarray:
    """m(x) = <grad V(x), field(x)> + W(x) at the rows of ``x``."""
    g = pair.grad(x)
    f = field(x)
    return np.einsum("...i,...i->...", g, f) + np.asarray(pair.W(x), dtype=float)


def check_decrease_grid(field: FieldDescription, pair: LyapunovPair,
                        annulus: Sequence[float] = DEFAULT_ANNULUS, N: int = 1024,
                        tol: float = 0.0, skip: int = 0) -> Certificate:
    """Sample N low-discrepancy points of the annulus; pass iff max m(x) <= tol.

    Sample sets are nested in N, so doubling N can only raise the worst margin.
    """
    r_min, r_max = float(annulus[0]), float(annulus[1])
    if not 0 < r_min <= r_max:
        raise ValueError("annulus needs 0 < r_min <= r_max")
    x = annulus_points(field.n, int(N), r_min, r_max, skip=skip)
    x = x + field.equilibrium
    return _make("decrease_grid", N, decrease_margins(field, pair, x), x, tol)


def check_strong_pair(field: FieldDescription, pair: LyapunovPair,
                      hulls: Sequence[SetValuedSample], tol: float = 0.0) -> Certificate:
    """max over hull vertices of <grad V(x), v> + W(x) <= tol at every sample.

    Samples based at the equilibrium are skipped: the inequality is only
    required off the equilibrium.
    """
    if not hulls:
        raise ValueError("hull list must be nonempty")
    margins, points = [], []
    for h in hulls:
        x = np.asarray(h.x, dtype=float).reshape(-1)
        if np.array_equal(x, field.equilibrium):
            continue
        g = pair.grad(x)
        worst = max(float(np.dot(g, np.asarray(v, dtype=float).reshape(-1))) for v in h.vertices)
        margins.append(worst + float(pair.W(x)))
        points.append(x)
    return _make("strong_pair", len(margins), margins, points, tol)


def check_path(path, pair_family: Optional[Callable] = None, s_grid=None,
               annulus: Sequence[float] = DEFAULT_ANNULUS, N: int = 1024,
               tol: float = 0.0) -> Certificate:
    """Grid decrease check at every s; aggregate pass iff every s passes.

    ``pair_family`` defaults to the path's own ``lyap_at``. Witnesses of the
    aggregate are prefixed with the s value at which they were found.
    """
    s_grid = np.linspace(0.0, 1.0, 21) if s_grid is None else np.asarray(s_grid, dtype=float)
    if np.any(s_grid < 0) or np.any(s_grid > 1):
        raise ValueError("s_grid must lie in [0, 1]")
    family = path.lyap_at if pair_family is None else pair_family
    rows, witnesses = [], []
    worst = -np.inf
    total = 0
    for s in s_grid:
        cert = check_decrease_grid(path.field_at(float(s)), family(float(s)), annulus, N, tol)
        rows.append((_fmt(s), cert.worst_margin, cert.verdict))
        total += cert.sample_count
        worst = max(worst, cert.worst_margin)
        for w in cert.witnesses[:1]:
            witnesses.append(np.concatenate([[s], w]))
    witnesses = witnesses[:MAX_WITNESSES]
    return Certificate("path_decrease", total, float(worst), tol,
                       "fail" if witnesses else "pass", witnesses, rows)


def first_failing_s(cert: Certificate) -> Optional[float]:
    for label, _, verdict in cert.rows:
        if verdict == "fail":
            return float(label)
    return None


def check_traj_decrease(traj, V: Callable, snap_radius: float = 1e-9,
                        equilibrium=None) -> Certificate:
    """t -> V(x(t)) is nonincreasing up to 1e-9 (1 + V(x0)) and strictly
    decreasing while the state is farther than ``snap_radius`` from equilibrium.
    """
    states = np.asarray(traj.states, dtype=float)
    if states.shape[0] == 0:
        raise ValueError("trajectory is empty")
    eq = np.zeros(states.shape[1]) if equilibrium is None else np.asarray(equilibrium, dtype=float)
    v = np.asarray(V(states), dtype=float).reshape(-1)
    slack = 1e-9 * (1.0 + abs(v[0]))
    dv = np.diff(v)
    away = np.linalg.norm(states[:-1] - eq, axis=1) > snap_radius
    # away from equilibrium any stall (dv >= 0) fails, even within the slack
    margins = np.where(away & (dv >= 0), dv + np.finfo(float).tiny, dv - slack)
    points = [np.concatenate([[traj.times[i]], states[i + 1]]) for i in range(dv.size)]
    return _make("trajectory_decrease", dv.size, margins, points, 0.0)
