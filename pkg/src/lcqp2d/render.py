"""SVG rendering of trials: world keyframes and complementarity series.

Hand-rolled SVG keeps the output deterministic and dependency-free. Frames
show bodies, contact candidates, force arrows and friction cones; per
candidate a two-panel plot tracks the distance against the normal force
and the slip against the tangential force, the pairs that complementarity
keeps mutually exclusive.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .contact import World, evaluate_all
from .geometry import BoxShape, DiskShape, HalfPlaneShape, Pose2

FORCE_DRAW_MIN = 1e-6
_BODY_FILL = {"static": "#d0d0d0", "actuated": "#7fb3d5", "free": "#f5b041"}


def _fmt(v: float) -> str:
    return f"{v:.5f}"


class SvgCanvas:
    def __init__(self, width, height, x_range, y_range):
        self.w = width
        self.h = height
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
        ]

    def map(self, p):
        x = (p[0] - self.x0) / (self.x1 - self.x0) * self.w
        y = self.h - (p[1] - self.y0) / (self.y1 - self.y0) * self.h
        return x, y

    def polygon(self, pts, fill="#cccccc", stroke="#333333"):
        s = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in (self.map(p) for p in pts))
        self.parts.append(f'<polygon points="{s}" fill="{fill}" stroke="{stroke}" '
                          f'stroke-width="1"/>')

    def circle(self, center, radius_world, fill="#cccccc", stroke="#333333"):
        cx, cy = self.map(center)
        r = radius_world / (self.x1 - self.x0) * self.w
        self.parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" '
                          f'fill="{fill}" stroke="{stroke}" stroke-width="1"/>')

    def dot(self, p, r=3.0, fill="#000000"):
        cx, cy = self.map(p)
        self.parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{r}" fill="{fill}"/>')

    def line(self, a, b, stroke="#333333", width=1.0, dash=None):
        x1, y1 = self.map(a)
        x2, y2 = self.map(b)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
                          f'y2="{_fmt(y2)}" stroke="{stroke}" stroke-width="{width}"{extra}/>')

    def polyline(self, pts, stroke="#2060c0", width=1.2):
        s = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        self.parts.append(f'<polyline points="{s}" fill="none" stroke="{stroke}" '
                          f'stroke-width="{width}"/>')

    def text(self, xy, s, size=11, anchor="start", color="#222222"):
        self.parts.append(f'<text x="{_fmt(xy[0])}" y="{_fmt(xy[1])}" font-size="{size}" '
                          f'font-family="sans-serif" text-anchor="{anchor}" '
                          f'fill="{color}">{s}</text>')

    def arrow(self, base, vec, stroke="#c0392b", width=2.0):
        tip = (base[0] + vec[0], base[1] + vec[1])
        self.line(base, tip, stroke=stroke, width=width)
        n = math.hypot(vec[0], vec[1])
        if n <= 0:
            return
        ux, uy = vec[0] / n, vec[1] / n
        size = 0.02 * (self.x1 - self.x0)
        for rot in (2.6, -2.6):
            c, s = math.cos(rot), math.sin(rot)
            hx = (c * ux - s * uy) * size
            hy = (s * ux + c * uy) * size
            self.line(tip, (tip[0] + hx, tip[1] + hy), stroke=stroke, width=width)

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"])


def world_bounds(world: World, margin=0.08):
    xs, ys = [], []
    for body in world.bodies:
        if isinstance(body.shape, HalfPlaneShape):
            continue
        p = body.pose0
        size = getattr(body.shape, "radius", None)
        if size is None:
            size = max(body.shape.width, body.shape.height)
        xs += [p.x - size, p.x + size]
        ys += [p.y - size, p.y + size]
    if not xs:
        xs, ys = [-1, 1], [-1, 1]
    x0, x1 = min(xs) - margin, max(xs) + margin
    y0, y1 = min(ys) - margin, max(ys) + margin
    span = max(x1 - x0, y1 - y0)
    return (x0, x0 + span), (max(y0, -0.02) , max(y0, -0.02) + span)


def draw_frame(world: World, q: np.ndarray, lam: np.ndarray = None,
               bounds=None, force_scale: float = None, label: str = "") -> str:
    """One keyframe: bodies, candidate dots, force arrows, friction cones."""
    xr, yr = bounds if bounds is not None else world_bounds(world)
    cv = SvgCanvas(480, 480, xr, yr)
    for body in world.bodies:
        pose = world.pose(body, q)
        fill = _BODY_FILL.get(body.kind, "#cccccc")
        if isinstance(body.shape, HalfPlaneShape):
            n = np.asarray(body.shape.normal, dtype=float)
            t = np.array([n[1], -n[0]])
            p0 = n * body.shape.offset
            a = p0 + t * 10.0
            b = p0 - t * 10.0
            cv.line(a, b, stroke="#555555", width=2.0)
        elif isinstance(body.shape, BoxShape):
            pts = [pose.to_world(c) for c in body.shape.corners()]
            cv.polygon(pts, fill=fill)
        elif isinstance(body.shape, DiskShape):
            cv.circle(pose.origin(), body.shape.radius, fill=fill)
    geoms = evaluate_all(world, q)
    scale = force_scale
    if scale is None:
        top = max((abs(lam[g.candidate.index, 2]) for g in geoms), default=0.0) if lam is not None else 0.0
        scale = 0.08 / max(top, 1.0)
    for g in geoms:
        cv.dot(g.frame.point, r=2.5, fill="#000000" if g.active else "#999999")
        if lam is None:
            continue
        f = lam[g.candidate.index]
        fn = f[2]
        if fn > FORCE_DRAW_MIN:
            vec = g.frame.rotation @ np.array([f[0] - f[1], fn])
            cv.arrow(g.frame.point, vec * scale)
            mu = g.candidate.mu
            for side in (-1, 1):
                edge = g.frame.rotation @ np.array([side * mu, 1.0])
                edge = edge / np.linalg.norm(edge) * 0.05
                cv.line(g.frame.point, g.frame.point + edge, stroke="#bbbbbb", dash="3,2")
    if label:
        cv.text((8, 16), label)
    return cv.finish()


def _series_panel(cv, x0, y0, w, h, ts, series, title):
    cv.parts.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" '
                    f'stroke="#888888"/>')
    cv.text((x0 + 4, y0 + 12), title, size=10)
    lo = min((min(vals) for _, vals, _ in series), default=0.0)
    hi = max((max(vals) for _, vals, _ in series), default=1.0)
    if hi - lo < 1e-12:
        hi = lo + 1.0
    t1 = max(ts[-1], 1)
    for name, vals, color in series:
        pts = []
        for t, v in zip(ts, vals):
            px = x0 + (t / t1) * (w - 8) + 4
            py = y0 + h - 4 - (v - lo) / (hi - lo) * (h - 20)
            pts.append((px, py))
        cv.polyline(pts, stroke=color)
    for i, (name, vals, color) in enumerate(series):
        cv.text((x0 + w - 4, y0 + 12 + 11 * i), name, size=9, anchor="end", color=color)


def complementarity_plot(record, cand_index: int) -> str:
    """Two stacked panels: gap vs normal force, slip vs tangential force."""
    rows = record.rows
    ts = [r.t for r in rows]
    gap = [r.gaps[cand_index] for r in rows]
    fn = [r.lam_real[cand_index, 2] for r in rows]
    slip = [r.slip[cand_index] for r in rows]
    ft = [r.lam_real[cand_index, 0] - r.lam_real[cand_index, 1] for r in rows]
    cv = SvgCanvas(520, 300, (0, 1), (0, 1))
    cv.text((8, 14), f"candidate {cand_index}", size=12)
    _series_panel(cv, 10, 24, 500, 128, ts,
                  [("distance", gap, "#2060c0"), ("normal force", fn, "#c0392b")],
                  "separation vs normal force")
    _series_panel(cv, 10, 162, 500, 128, ts,
                  [("slip bound", slip, "#2060c0"), ("tangential force", ft, "#c0392b")],
                  "slip vs tangential force")
    return cv.finish()


def render(record, out_dir, scenario=None, keyframe_stride: int = None) -> list:
    """Write keyframes and per-candidate complementarity plots.

    Returns the list of written paths. The record must contain step rows.
    """
    if not record.rows:
        raise ValueError("cannot render an empty trial record")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .scenario import load_scenario
    sc = scenario or load_scenario(record.scenario)
    world = sc.build_world()
    bounds = None
    # widen bounds across trajectory
    xs, ys = [], []
    for r in record.rows[:: max(1, len(record.rows) // 50)]:
        for body in world.actuated + world.free:
            sl = world.cols(body)
            xs.append(r.q_true[sl.start]); ys.append(r.q_true[sl.start + 1])
    pad = 0.25
    span_x = (min(xs) - pad, max(xs) + pad)
    span_y = (max(min(ys) - pad, -0.05), max(ys) + pad)
    span = max(span_x[1] - span_x[0], span_y[1] - span_y[0])
    bounds = ((span_x[0], span_x[0] + span), (span_y[0], span_y[0] + span))

    paths = []
    stride = keyframe_stride or max(1, len(record.rows) // 8)
    frames = list(record.rows[::stride])
    if frames[-1].t != record.rows[-1].t:
        frames.append(record.rows[-1])
    for r in frames:
        svg = draw_frame(world, r.q_true, lam=r.lam_real, bounds=bounds,
                         label=f"t={r.t}")
        p = out / f"frame_{r.t:05d}.svg"
        p.write_text(svg, encoding="utf-8")
        paths.append(p)
    n_c = record.rows[0].lam_cmd.shape[0]
    for i in range(n_c):
        svg = complementarity_plot(record, i)
        p = out / f"candidate_{i:02d}.svg"
        p.write_text(svg, encoding="utf-8")
        paths.append(p)
    return paths
