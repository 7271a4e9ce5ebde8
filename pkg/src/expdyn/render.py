"""Escape-time rasters of f with polyline overlays, written as binary PPM."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .dynmap import ExpMap

ESCAPE_RADIUS = 100.0
OVERLAY_COLOR = (255, 255, 255)
STRIP_COLOR = (0, 200, 255)


@dataclass
class RenderSpec:
    window: tuple[float, float, float, float]  # re_min, re_max, im_min, im_max
    resolution: tuple[int, int]
    max_iter: int = 50
    palette: str = "fire"
    overlays: list[str] = field(default_factory=list)
    escape_radius: float = ESCAPE_RADIUS

    def __post_init__(self):
        a, b, c, d = self.window
        if not (a < b and c < d):
            raise ValueError("window must satisfy re_min < re_max and im_min < im_max")
        w, h = self.resolution
        if w < 1 or h < 1:
            raise ValueError("resolution must be at least 1x1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.palette not in PALETTES:
            raise ValueError(f"unknown palette {self.palette!r}; choose from {sorted(PALETTES)}")


def _gray(counts: np.ndarray, max_iter: int) -> np.ndarray:
    v = np.where(counts < 0, 0, 255 - (counts * 255) // max(1, max_iter)).astype(np.uint8)
    return np.stack([v, v, v], axis=-1)


def _fire(counts: np.ndarray, max_iter: int) -> np.ndarray:
    x = np.where(counts < 0, 0.0, 1.0 - counts / max(1, max_iter + 1))
    r = np.clip(3 * x, 0, 1)
    g = np.clip(3 * x - 1, 0, 1)
    b = np.clip(3 * x - 2, 0, 1)
    return (np.stack([r, g, b], axis=-1) * 255).astype(np.uint8)


PALETTES = {"gray": _gray, "fire": _fire}


def escape_counts(m: ExpMap, spec: RenderSpec) -> np.ndarray:
    """First n with |f^n(z)| > escape radius at each pixel centre (-1: none up to max_iter)."""
    lam = complex(m.lam)
    a, b, c, d = spec.window
    w, h = spec.resolution
    if w > 1:
        dx = (b - a) / w
        a, b = a + dx / 2, b - dx / 2
    if h > 1:
        dy = (d - c) / h
        c, d = c + dy / 2, d - dy / 2
    return np.asarray(kernels.escape_counts(float(a), float(b), float(c), float(d), int(w), int(h),
                                            lam.real, lam.imag, int(spec.max_iter),
                                            float(spec.escape_radius)))


def _to_pixel(spec: RenderSpec, x: float, y: float) -> tuple[float, float]:
    a, b, c, d = spec.window
    w, h = spec.resolution
    return (x - a) / (b - a) * w - 0.5, (d - y) / (d - c) * h - 0.5


def draw_polyline(img: np.ndarray, spec: RenderSpec, pts: Sequence[complex], color) -> None:
    h, w = img.shape[:2]
    for p, q in zip(pts, pts[1:]):
        x0, y0 = _to_pixel(spec, p.real, p.imag)
        x1, y1 = _to_pixel(spec, q.real, q.imag)
        if not all(np.isfinite([x0, y0, x1, y1])):
            continue
        steps = int(min(4 * (w + h), max(abs(x1 - x0), abs(y1 - y0)))) + 1
        xs = np.rint(np.linspace(x0, x1, steps + 1)).astype(np.int64)
        ys = np.rint(np.linspace(y0, y1, steps + 1)).astype(np.int64)
        ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
        img[ys[ok], xs[ok]] = color


def _overlay_polylines(m: ExpMap, spec: RenderSpec, ref: str) -> tuple[list[list[complex]], tuple]:
    if ref == "strips":
        a, b = spec.window[0], spec.window[1]
        lo = max(a, float(m.K))
        lines = []
        for s in (0, 1):
            st = m.strip(s)
            for y in (float(st.im_low), float(st.im_high)):
                lines.append([complex(lo, y), complex(b, y)])
        return lines, STRIP_COLOR
    data = json.loads(Path(ref).read_text())
    if isinstance(data, dict) and "samples" in data:
        pts = [complex(float(s["z"]["re"]), float(s["z"]["im"])) for s in data["samples"]]
        return [pts], OVERLAY_COLOR
    if isinstance(data, dict) and "points" in data:
        data = data["points"]
    if isinstance(data, list) and data and all(isinstance(p, dict) and "z" in p for p in data):
        pts = [complex(float(p["z"]["re"]), float(p["z"]["im"])) for p in data]
        return [pts], OVERLAY_COLOR
    raise ValueError(f"{ref}: not a curve or hair file")


def render_array(m: ExpMap, spec: RenderSpec) -> np.ndarray:
    counts = escape_counts(m, spec)
    img = PALETTES[spec.palette](counts, spec.max_iter)
    for ref in spec.overlays:
        lines, color = _overlay_polylines(m, spec, ref)
        for pts in lines:
            draw_polyline(img, spec, pts, color)
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def render(m: ExpMap, spec: RenderSpec, out: str | Path) -> Path:
    out = Path(out)
    out.write_bytes(ppm_bytes(render_array(m, spec)))
    return out
