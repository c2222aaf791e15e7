"""Static SVG frames: planar streamlines, 1D graphs, orthographic sphere views.

Written by hand so rendering carries no plotting dependency. Coordinates are
printed with fixed precision, so output is byte-stable for a given seed.
"""
from __future__ import annotations

from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from .core import FieldDescription
from .errors import UnsupportedDimension

SIZE = 480
MARGIN = 24
STREAM_SEEDS = 64
STREAM_ARC = 3.0
STREAM_STEP = 0.02
STREAM_COLOR = "#1f4e8c"


def _header(title: str) -> List[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE + 24}" '
        f'viewBox="0 0 {SIZE} {SIZE + 24}">',
        f'<rect width="{SIZE}" height="{SIZE + 24}" fill="white"/>',
        f'<text x="{SIZE / 2:.1f}" y="16" font-family="sans-serif" font-size="13" '
        f'text-anchor="middle">{_escape(title)}</text>',
    ]


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _polyline(pts, color=STREAM_COLOR, width=1.0, opacity=1.0) -> str:
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
    return (f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width:.2f}" stroke-opacity="{opacity:.2f}"/>')


def _arrow(p, q, color=STREAM_COLOR) -> Optional[str]:
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    L = np.linalg.norm(d)
    if L < 1e-9:
        return None
    d /= L
    nrm = np.array([-d[1], d[0]])
    tip = np.asarray(q, dtype=float)
    a = tip - 6.0 * d + 3.0 * nrm
    b = tip - 6.0 * d - 3.0 * nrm
    return (f'<polygon points="{tip[0]:.2f},{tip[1]:.2f} {a[0]:.2f},{a[1]:.2f} '
            f'{b[0]:.2f},{b[1]:.2f}" fill="{color}"/>')


class _Frame:
    def __init__(self, xlim, ylim):
        self.xlim, self.ylim = xlim, ylim

    def __call__(self, pts):
        pts = np.atleast_2d(pts)
        span = SIZE - 2 * MARGIN
        u = MARGIN + (pts[:, 0] - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * span
        v = 24 + MARGIN + (self.ylim[1] - pts[:, 1]) / (self.ylim[1] - self.ylim[0]) * span
        return np.stack([u, v], axis=1)


def _axes(frame: _Frame) -> List[str]:
    out = []
    (x0, x1), (y0, y1) = frame.xlim, frame.ylim
    if y0 <= 0 <= y1:
        out.append(_polyline(frame(np.array([[x0, 0.0], [x1, 0.0]])), "#999999", 0.8))
    if x0 <= 0 <= x1:
        out.append(_polyline(frame(np.array([[0.0, y0], [0.0, y1]])), "#999999", 0.8))
    return out


def streamline(field: FieldDescription, start, arc: float = STREAM_ARC, step: float = STREAM_STEP,
               bound: Optional[float] = None) -> np.ndarray:
    """Arc-length parametrized RK4 along the unit direction field."""

    def unit(x):
        v = np.asarray(field(x), dtype=float)
        n = np.linalg.norm(v)
        return v / n if n > 1e-12 else None

    x = np.asarray(start, dtype=float).copy()
    pts = [x.copy()]
    for _ in range(int(round(arc / step))):
        k1 = unit(x)
        if k1 is None:
            break
        k2 = unit(x + 0.5 * step * k1)
        k3 = unit(x + 0.5 * step * k2) if k2 is not None else None
        k4 = unit(x + step * k3) if k3 is not None else None
        if k4 is None:
            break
        x = x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        pts.append(x.copy())
        if bound is not None and np.max(np.abs(x)) > bound:
            break
    return np.array(pts)


def _seeds(count: int, extent: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-extent, extent, size=(count, 2))


def field_svg(field: FieldDescription, title: str = "", extent: float = 3.0,
              seeds: int = STREAM_SEEDS, seed: int = 0) -> str:
    """Streamline portrait of a planar field on [-extent, extent]^2."""
    if field.n != 2:
        raise UnsupportedDimension(f"streamline rendering needs n = 2, got {field.n}")
    frame = _Frame((-extent, extent), (-extent, extent))
    parts = _header(title) + _axes(frame)
    for s0 in _seeds(seeds, extent, seed):
        line = streamline(field, s0, bound=1.5 * extent)
        if len(line) < 2:
            continue
        px = frame(line)
        parts.append(_polyline(px))
        mid = len(px) // 2
        head = _arrow(px[max(mid - 1, 0)], px[mid]) if mid > 0 else None
        if head:
            parts.append(head)
    parts.append('<circle cx="%.2f" cy="%.2f" r="3" fill="#c0392b"/>' % tuple(frame([0.0, 0.0])[0]))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def graph_svg(fn: Callable, title: str = "", x_range: Sequence[float] = (-10.0, 10.0),
              samples: int = 801) -> str:
    """Graph of a scalar function of one variable."""
    x = np.linspace(x_range[0], x_range[1], samples)
    y = np.asarray(fn(x), dtype=float)
    lo, hi = float(np.min(y)), float(np.max(y))
    pad = 0.05 * (hi - lo if hi > lo else 1.0)
    frame = _Frame(tuple(x_range), (lo - pad, hi + pad))
    parts = _header(title) + _axes(frame)
    parts.append(_polyline(frame(np.stack([x, y], axis=1)), width=1.5))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _view_matrix(tilt_deg: float = 20.0, turn_deg: float = 30.0) -> np.ndarray:
    a, b = np.radians(tilt_deg), np.radians(turn_deg)
    Rz = np.array([[np.cos(b), -np.sin(b), 0], [np.sin(b), np.cos(b), 0], [0, 0, 1]])
    Rx = np.array([[1, 0, 0], [0, np.cos(a), -np.sin(a)], [0, np.sin(a), np.cos(a)]])
    return Rx @ Rz


def sphere_svg(field2d: FieldDescription, title: str = "", seeds: int = STREAM_SEEDS,
               seed: int = 0, chart_extent: float = 4.0) -> str:
    """Orthographic view of chart streamlines carried to the sphere."""
    from .sphere import stereo_inv

    if field2d.n != 2:
        raise UnsupportedDimension(f"sphere rendering needs a planar chart field, got n = {field2d.n}")
    M = _view_matrix()
    frame = _Frame((-1.1, 1.1), (-1.1, 1.1))
    parts = _header(title)
    c = frame([0.0, 0.0])[0]
    rad = frame([1.0, 0.0])[0][0] - c[0]
    parts.append(f'<circle cx="{c[0]:.2f}" cy="{c[1]:.2f}" r="{rad:.2f}" fill="#f4f6fa" stroke="#333333"/>')
    th = np.linspace(0.0, 2 * np.pi, 121)
    eq = (M @ np.stack([np.cos(th), np.sin(th), np.zeros_like(th)])).T
    parts.extend(_split_by_face(eq, frame, "#999999", 0.8))
    for s0 in _seeds(seeds, chart_extent, seed):
        line = streamline(field2d, s0, arc=2.0 * chart_extent, bound=3.0 * chart_extent)
        if len(line) < 2:
            continue
        P = (M @ stereo_inv(line).T).T
        parts.extend(_split_by_face(P, frame, STREAM_COLOR, 1.0))
    south = M @ np.array([0.0, 0.0, -1.0])
    sp = frame(south[[0, 2]])[0]
    parts.append(f'<circle cx="{sp[0]:.2f}" cy="{sp[1]:.2f}" r="3" fill="#c0392b"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _split_by_face(P, frame, color, width) -> Iterable[str]:
    """Front (y < 0 in view coordinates) drawn solid, back faded."""
    front = P[:, 1] <= 0
    out = []
    start = 0
    for i in range(1, len(P) + 1):
        if i == len(P) or front[i] != front[start]:
            seg = P[start:min(i + 1, len(P))]
            if len(seg) >= 2:
                out.append(_polyline(frame(seg[:, [0, 2]]), color, width, 1.0 if front[start] else 0.25))
            start = i
    return out


def render_field(field: FieldDescription, title: str = "", **kw) -> str:
    """Graph for 1D fields, streamlines for planar ones."""
    if field.n == 1:
        return graph_svg(lambda x: np.asarray(field(x[:, None]), dtype=float).reshape(-1), title,
                         x_range=kw.get("x_range", (-5.0, 5.0)))
    if field.n == 2:
        return field_svg(field, title, **kw)
    raise UnsupportedDimension(f"no frame renderer for n = {field.n} outside the sphere examples")
