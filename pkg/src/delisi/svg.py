"""Minimal deterministic SVG emission for diagrams and phase portraits.

No plotting dependency: curves are polylines in a data-to-viewport affine
frame with the y axis pointing up.  Output is byte-reproducible for a fixed
scene (floats are formatted with repr-stable precision; no timestamps).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Scene", "write_svg"]

_MARGIN = 56.0


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


@dataclass
class Scene:
    """Curves, markers and labels in data coordinates."""

    width: float = 640.0
    height: float = 480.0
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    curves: list = field(default_factory=list)   # (points, color, width, dash)
    markers: list = field(default_factory=list)  # (x, y, color, label)
    comments: list = field(default_factory=list)

    def add_curve(self, points, color: str, *, width: float = 1.5,
                  dash: str | None = None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("curve points must be an (n, 2) array")
        self.curves.append((pts, color, width, dash))

    def add_marker(self, x: float, y: float, color: str, label: str = ""):
        self.markers.append((float(x), float(y), color, label))

    def add_comment(self, text: str):
        self.comments.append(text)

    # -- frame ------------------------------------------------------------

    def _data_bounds(self):
        xs, ys = [], []
        for pts, *_ in self.curves:
            xs.append(pts[:, 0])
            ys.append(pts[:, 1])
        for x, y, *_ in self.markers:
            xs.append(np.array([x]))
            ys.append(np.array([y]))
        if not xs:
            return 0.0, 1.0, 0.0, 1.0
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        if self.xlog:
            x = x[x > 0]
        if self.ylog:
            y = y[y > 0]
        x0, x1 = float(np.min(x)), float(np.max(x))
        y0, y1 = float(np.min(y)), float(np.max(y))
        if x0 == x1:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y0 == y1:
            y0, y1 = y0 - 0.5, y1 + 0.5
        return x0, x1, y0, y1

    def _transform(self):
        x0, x1, y0, y1 = self._data_bounds()
        if self.xlog:
            x0, x1 = np.log10(x0), np.log10(x1)
        if self.ylog:
            y0, y1 = np.log10(y0), np.log10(y1)
        px = (self.width - 2 * _MARGIN) / (x1 - x0)
        py = (self.height - 2 * _MARGIN) / (y1 - y0)

        def to_px(x, y):
            if self.xlog:
                x = np.log10(x)
            if self.ylog:
                y = np.log10(y)
            # y axis points up: flip into SVG's downward pixel frame
            return (_MARGIN + (x - x0) * px,
                    self.height - _MARGIN - (y - y0) * py)

        return to_px, (x0, x1, y0, y1)


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    raw = np.linspace(lo, hi, n)
    return raw


def write_svg(scene: Scene, path: str) -> None:
    to_px, (x0, x1, y0, y1) = scene._transform()
    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" '
               f'width="{_fmt(scene.width)}" height="{_fmt(scene.height)}" '
               f'viewBox="0 0 {_fmt(scene.width)} {_fmt(scene.height)}">')
    for c in scene.comments:
        out.append(f"<!-- {c.replace('--', '- -')} -->")
    out.append(f'<rect width="{_fmt(scene.width)}" '
               f'height="{_fmt(scene.height)}" fill="white"/>')

    # axes box
    bx0, by1 = _MARGIN, scene.height - _MARGIN
    bx1, by0 = scene.width - _MARGIN, _MARGIN
    out.append(f'<rect x="{_fmt(bx0)}" y="{_fmt(by0)}" '
               f'width="{_fmt(bx1 - bx0)}" height="{_fmt(by1 - by0)}" '
               f'fill="none" stroke="black" stroke-width="1"/>')

    # tick labels (data values at linear positions in the frame)
    for t in _ticks(x0, x1):
        val = 10.0**t if scene.xlog else t
        px, _ = to_px(val, 10.0**y0 if scene.ylog else y0)
        out.append(f'<line x1="{_fmt(px)}" y1="{_fmt(by1)}" '
                   f'x2="{_fmt(px)}" y2="{_fmt(by1 + 5)}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{_fmt(by1 + 18)}" '
                   f'font-size="10" text-anchor="middle">{val:.4g}</text>')
    for t in _ticks(y0, y1):
        val = 10.0**t if scene.ylog else t
        _, py = to_px(10.0**x0 if scene.xlog else x0, val)
        out.append(f'<line x1="{_fmt(bx0 - 5)}" y1="{_fmt(py)}" '
                   f'x2="{_fmt(bx0)}" y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{_fmt(bx0 - 8)}" y="{_fmt(py + 3)}" '
                   f'font-size="10" text-anchor="end">{val:.4g}</text>')

    if scene.title:
        out.append(f'<text x="{_fmt(scene.width / 2)}" y="20" '
                   f'font-size="14" text-anchor="middle">{scene.title}</text>')
    if scene.xlabel:
        out.append(f'<text x="{_fmt(scene.width / 2)}" '
                   f'y="{_fmt(scene.height - 12)}" font-size="12" '
                   f'text-anchor="middle">{scene.xlabel}</text>')
    if scene.ylabel:
        cx, cy = 16.0, scene.height / 2
        out.append(f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" font-size="12" '
                   f'text-anchor="middle" '
                   f'transform="rotate(-90 {_fmt(cx)} {_fmt(cy)})">'
                   f'{scene.ylabel}</text>')

    for pts, color, width, dash in scene.curves:
        ok = np.all(np.isfinite(pts), axis=1)
        if scene.xlog:
            ok &= pts[:, 0] > 0
        if scene.ylog:
            ok &= pts[:, 1] > 0
        pts = pts[ok]
        if len(pts) < 2:
            continue
        px, py = to_px(pts[:, 0], pts[:, 1])
        d = "M " + " L ".join(f"{_fmt(a)} {_fmt(b)}" for a, b in zip(px, py))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<path d="{d}" fill="none" stroke="{color}" '
                   f'stroke-width="{_fmt(width)}"{dash_attr}/>')

    for x, y, color, label in scene.markers:
        px, py = to_px(x, y)
        out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="4" '
                   f'fill="{color}" stroke="black" stroke-width="0.8"/>')
        if label:
            out.append(f'<text x="{_fmt(px + 7)}" y="{_fmt(py - 6)}" '
                       f'font-size="11">{label}</text>')

    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
