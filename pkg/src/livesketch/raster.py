"""Anti-aliased rendering of stroke sequences onto square grayscale canvases.

The drawing's bounding box is centered and uniformly scaled to fit the canvas
with a 4% margin, so rendering is invariant to translation, uniform scale and
stroke order. Lines are 1 pixel wide (Wu's algorithm); overlapping coverage
combines with max, keeping intensities in [0, 1].
"""

from __future__ import annotations

import numpy as np

from .sketch import RasterCanvas, Sketch

MARGIN = 0.04


def _splat(img: np.ndarray, x: float, y: float, value: float = 1.0) -> None:
    """Bilinear dot for single-point strokes and degenerate drawings."""
    h, w = img.shape
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    fx, fy = x - x0, y - y0
    for (px, py, cov) in (
        (x0, y0, (1 - fx) * (1 - fy)),
        (x0 + 1, y0, fx * (1 - fy)),
        (x0, y0 + 1, (1 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ):
        if 0 <= px < w and 0 <= py < h and cov > 0:
            img[py, px] = max(img[py, px], value * cov)


def _plot(img: np.ndarray, x: int, y: int, cov: float) -> None:
    h, w = img.shape
    if 0 <= x < w and 0 <= y < h and cov > 0:
        img[y, x] = max(img[y, x], cov)


def _wu_line(img: np.ndarray, x0: float, y0: float, x1: float, y1: float) -> None:
    steep = abs(y1 - y0) > abs(x1 - x0)
    if steep:
        x0, y0, x1, y1 = y0, x0, y1, x1
    if x0 > x1:
        x0, x1 = x1, x0
        y0, y1 = y1, y0
    dx = x1 - x0
    gradient = (y1 - y0) / dx if dx != 0 else 0.0

    def endpoint(x, y):
        xend = round(x)
        yend = y + gradient * (xend - x)
        xgap = 1 - (x + 0.5 - np.floor(x + 0.5))
        px = int(xend)
        py = int(np.floor(yend))
        f = yend - py
        if steep:
            _plot(img, py, px, (1 - f) * xgap)
            _plot(img, py + 1, px, f * xgap)
        else:
            _plot(img, px, py, (1 - f) * xgap)
            _plot(img, px, py + 1, f * xgap)
        return px, yend + gradient

    xpx0, intery = endpoint(x0, y0)
    xpx1, _ = endpoint(x1, y1)
    for x in range(xpx0 + 1, xpx1):
        ybase = int(np.floor(intery))
        f = intery - ybase
        if steep:
            _plot(img, ybase, x, 1 - f)
            _plot(img, ybase + 1, x, f)
        else:
            _plot(img, x, ybase, 1 - f)
            _plot(img, x, ybase + 1, f)
        intery += gradient


def rasterize(
    sketch: Sketch,
    size: int = 64,
    *,
    thickness: int = 1,
    rotate_deg: float = 0.0,
    scale_mult: float = 1.0,
) -> RasterCanvas:
    """Render a sketch centered on a size x size canvas.

    `rotate_deg` and `scale_mult` exist for corpus augmentation: rotation is
    applied about the drawing center, and `scale_mult` multiplies the fitted
    scale (values > 1 may clip at the border by design).
    """
    if size < 16:
        raise ValueError("canvas size must be at least 16 pixels")
    strokes = sketch.strokes()
    all_pts = np.concatenate(strokes)
    lo = all_pts.min(axis=0)
    hi = all_pts.max(axis=0)
    center = (lo + hi) / 2.0
    extent = float(max(hi[0] - lo[0], hi[1] - lo[1]))

    img = np.zeros((size, size))
    if extent == 0.0:
        _splat(img, size / 2.0, size / 2.0)
        return RasterCanvas(img)

    scale = size * (1.0 - 2.0 * MARGIN) / extent * scale_mult
    if rotate_deg:
        theta = np.deg2rad(rotate_deg)
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    else:
        rot = None

    offsets = [0.0] if thickness <= 1 else np.linspace(-(thickness - 1) / 2.0, (thickness - 1) / 2.0, thickness)
    for stroke in strokes:
        pts = stroke - center
        if rot is not None:
            pts = pts @ rot.T
        pts = pts * scale + size / 2.0
        if len(pts) == 1:
            _splat(img, pts[0, 0], pts[0, 1])
            continue
        for a, b in zip(pts[:-1], pts[1:]):
            seg = b - a
            norm = float(np.hypot(seg[0], seg[1]))
            if norm == 0.0:
                _splat(img, a[0], a[1])
                continue
            perp = np.array([-seg[1], seg[0]]) / norm
            for off in np.atleast_1d(offsets):
                sa = a + perp * off
                sb = b + perp * off
                _wu_line(img, sa[0], sa[1], sb[0], sb[1])
    return RasterCanvas(np.clip(img, 0.0, 1.0))


def dilate(pixels: np.ndarray, radius: int = 1) -> np.ndarray:
    """Max-filter with a (2r+1) square element, used by raster overlap metrics."""
    out = pixels.copy()
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dx == 0 and dy == 0:
                continue
            shifted = np.zeros_like(pixels)
            ys = slice(max(0, dy), pixels.shape[0] + min(0, dy))
            xs = slice(max(0, dx), pixels.shape[1] + min(0, dx))
            ys_src = slice(max(0, -dy), pixels.shape[0] + min(0, -dy))
            xs_src = slice(max(0, -dx), pixels.shape[1] + min(0, -dx))
            shifted[ys, xs] = pixels[ys_src, xs_src]
            out = np.maximum(out, shifted)
    return out


def raster_iou(a: np.ndarray, b: np.ndarray, threshold: float = 0.1, dilate_radius: int = 1) -> float:
    """Intersection-over-union of dilated binarized rasters."""
    am = dilate((a > threshold).astype(np.float64), dilate_radius) > 0
    bm = dilate((b > threshold).astype(np.float64), dilate_radius) > 0
    union = np.logical_or(am, bm).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(am, bm).sum() / union)
