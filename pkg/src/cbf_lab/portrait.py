"""Phase portraits as a vector-field CSV plus a self-contained SVG.

Output is byte-for-byte deterministic: no timestamps, fixed 9-significant-digit
number formatting, and equilibria in lexicographic order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from cbf_lab.equilibria import find_equilibria
from cbf_lab.errors import WindowExcludesObstacle
from cbf_lab.model import Circle, EquilibriumReport, Kind, Scenario
from cbf_lab.safety_filter import vector_field
from cbf_lab.simulate import IntegratorConfig, integrate

KIND_STYLE = {
    Kind.SADDLE: ("saddle", "#e08214"),
    Kind.ASYMPTOTICALLY_STABLE: ("stable", "#b2182b"),
    Kind.DEGENERATE: ("degenerate", "#762a83"),
    Kind.UNSTABLE: ("unstable", "#000000"),
}

SVG_SIZE = 600


def _fmt(v: float) -> str:
    s = f"{v:.9g}"
    return "0" if s == "-0" else s


@dataclass
class PortraitSpec:
    window: tuple[float, float, float, float]  # xmin, xmax, ymin, ymax
    grid: int = 20
    trajectories: list[tuple[float, float]] = field(default_factory=list)
    config: IntegratorConfig = field(
        default_factory=lambda: IntegratorConfig(dt=1e-2, t_max=30.0))

    def __post_init__(self):
        xmin, xmax, ymin, ymax = self.window
        if not (xmin < xmax and ymin < ymax):
            raise ValueError("window must have positive width and height")
        if self.grid < 2:
            raise ValueError("grid needs at least 2 points per axis")


def _obstacle_bbox(scenario: Scenario):
    obs = scenario.obstacle
    if isinstance(obs, Circle):
        half = np.array([obs.radius, obs.radius])
    else:
        Pinv = np.linalg.inv(obs.P)
        half = np.sqrt(np.diag(Pinv))
    return obs.center - half, obs.center + half


def default_spec(scenario: Scenario, grid: int = 20, n_traj: int = 16) -> PortraitSpec:
    """Square window around origin and obstacle, starts on the window rim."""
    lo, hi = _obstacle_bbox(scenario)
    lo = np.minimum(lo, 0.0)
    hi = np.maximum(hi, 0.0)
    c = 0.5 * (lo + hi)
    half = 0.5 * float(np.max(hi - lo)) * 1.6
    window = (c[0] - half, c[0] + half, c[1] - half, c[1] + half)
    th = 2 * math.pi * (np.arange(n_traj) + 0.5) / n_traj
    rim = c + 0.95 * half * np.stack([np.cos(th), np.sin(th)], axis=1)
    starts = [tuple(p) for p in rim.tolist() if scenario.obstacle.h(np.array(p)) > 0]
    return PortraitSpec(window, grid, starts)


def field_grid(scenario: Scenario, spec: PortraitSpec) -> np.ndarray:
    """Rows ``x1, x2, F1, F2`` over the sampling grid (x1 fastest)."""
    xmin, xmax, ymin, ymax = spec.window
    xs = np.linspace(xmin, xmax, spec.grid)
    ys = np.linspace(ymin, ymax, spec.grid)
    X1, X2 = np.meshgrid(xs, ys)
    pts = np.stack([X1.ravel(), X2.ravel()], axis=1)
    return np.hstack([pts, vector_field(scenario, pts)])


def field_csv(rows: np.ndarray) -> str:
    lines = ["x1,x2,F1,F2"]
    lines += [",".join(_fmt(v) for v in row) for row in rows.tolist()]
    return "\n".join(lines) + "\n"


def _check_window(scenario: Scenario, spec: PortraitSpec) -> None:
    xmin, xmax, ymin, ymax = spec.window
    lo, hi = _obstacle_bbox(scenario)
    if lo[0] < xmin or hi[0] > xmax or lo[1] < ymin or hi[1] > ymax:
        raise WindowExcludesObstacle(f"window {spec.window} does not contain the obstacle")
    if not (xmin <= 0 <= xmax and ymin <= 0 <= ymax):
        raise WindowExcludesObstacle(f"window {spec.window} does not contain the origin")


def _thin(points, min_px: float):
    """Drop polyline vertices closer than ``min_px`` to the last kept one."""
    if not points:
        return []
    kept = [points[0]]
    for p in points[1:]:
        if math.hypot(p[0] - kept[-1][0], p[1] - kept[-1][1]) >= min_px:
            kept.append(p)
    if kept[-1] != points[-1]:
        kept.append(points[-1])
    return kept


def render(scenario: Scenario, spec: PortraitSpec,
           equilibria: list[EquilibriumReport] | None = None) -> tuple[str, str]:
    """Return ``(field_csv, svg)`` for the scenario.

    Raises:
        WindowExcludesObstacle: the window misses the obstacle or the origin.
    """
    _check_window(scenario, spec)
    if equilibria is None:
        equilibria = find_equilibria(scenario).reports
    rows = field_grid(scenario, spec)

    xmin, xmax, ymin, ymax = spec.window
    sx = SVG_SIZE / (xmax - xmin)
    sy = SVG_SIZE / (ymax - ymin)

    def to_px(x, y):
        return (x - xmin) * sx, (ymax - y) * sy

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        '<defs><marker id="head" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="4" '
        'markerHeight="4" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#2166ac"/></marker></defs>',
        f'<rect class="background" x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" fill="#ffffff"/>',
    ]

    obs = scenario.obstacle
    cx, cy = to_px(*obs.center)
    if isinstance(obs, Circle):
        out.append(f'<ellipse class="obstacle" cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
                   f'rx="{_fmt(obs.radius * sx)}" ry="{_fmt(obs.radius * sy)}" '
                   f'fill="#bdbdbd" stroke="#404040"/>')
    else:
        w, V = np.linalg.eigh(obs.P)
        pts = [to_px(*(obs.center + V @ np.array([math.cos(t) / math.sqrt(w[0]),
                                                  math.sin(t) / math.sqrt(w[1])])))
               for t in np.linspace(0, 2 * math.pi, 97)[:-1]]
        poly = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
        out.append(f'<polygon class="obstacle" points="{poly}" fill="#bdbdbd" stroke="#404040"/>')

    mags = np.hypot(rows[:, 2], rows[:, 3])
    top = float(mags.max()) if mags.size and mags.max() > 0 else 1.0
    glyph = 0.6 * min(SVG_SIZE / spec.grid, SVG_SIZE / 2)
    out.append('<g class="field" stroke="#2166ac" stroke-width="1" marker-end="url(#head)">')
    for (x, y, f1, f2), mag in zip(rows.tolist(), mags.tolist()):
        if mag == 0 or obs.h(np.array([x, y])) < 0:
            continue
        cx_, cy_ = to_px(x, y)
        ux, uy = f1 * sx / math.hypot(f1 * sx, f2 * sy), -f2 * sy / math.hypot(f1 * sx, f2 * sy)
        px, py = cx_ - 0.5 * glyph * ux, cy_ - 0.5 * glyph * uy
        ex, ey = cx_ + 0.5 * glyph * ux, cy_ + 0.5 * glyph * uy
        opacity = 0.2 + 0.8 * math.sqrt(mag / top)
        out.append(f'<line x1="{_fmt(px)}" y1="{_fmt(py)}" x2="{_fmt(ex)}" y2="{_fmt(ey)}" '
                   f'stroke-opacity="{_fmt(opacity)}"/>')
    out.append("</g>")

    out.append('<g class="trajectories" fill="none" stroke="#1a9850" stroke-width="1.2">')
    for x0 in spec.trajectories:
        traj = integrate(scenario, x0, spec.config, equilibria, stop_on_verdict=False)
        pts = traj.x
        inside = ((pts[:, 0] >= xmin) & (pts[:, 0] <= xmax)
                  & (pts[:, 1] >= ymin) & (pts[:, 1] <= ymax))
        px = [to_px(*p) for p in pts[inside].tolist()]
        kept = _thin(px, 1.5)
        if len(kept) < 2:
            continue
        poly = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in kept)
        out.append(f'<polyline class="traj" points="{poly}"/>')
    out.append("</g>")

    ox, oy = to_px(0.0, 0.0)
    out.append(f'<circle class="origin" cx="{_fmt(ox)}" cy="{_fmt(oy)}" r="5" '
               f'fill="#1a9850" stroke="#000000"/>')
    for rep in equilibria:
        name, color = KIND_STYLE[rep.kind]
        ex, ey = to_px(*rep.location)
        out.append(f'<circle class="eq {name}" data-kind="{rep.kind.value}" '
                   f'data-x="{_fmt(rep.location[0])}" data-y="{_fmt(rep.location[1])}" '
                   f'cx="{_fmt(ex)}" cy="{_fmt(ey)}" r="5" fill="{color}" stroke="#000000"/>')
    out.append("</svg>")
    return field_csv(rows), "\n".join(out) + "\n"
