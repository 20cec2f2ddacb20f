"""Binary PPM (P6) rendering of point clouds and discrete measures.

PPM keeps images bit-exact and diffable without an imaging dependency.
Pixel ``(row, col)`` has row 0 at the top; the y axis points up.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DimensionError
from .metric import BoxDomain, PointCloud, as_points

DEFAULT_SIZE = 1024
BACKGROUND = (0, 0, 0)
FOREGROUND = (255, 255, 255)
OVERLAY = (255, 64, 32)


def _extent(points: np.ndarray, extent) -> tuple[np.ndarray, np.ndarray]:
    if extent is not None:
        if isinstance(extent, BoxDomain):
            lo, hi = extent.lo, extent.hi
        else:
            lo, hi = (np.asarray(v, dtype=float).reshape(-1) for v in extent)
    else:
        lo, hi = points.min(axis=0), points.max(axis=0)
    lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
    flat = hi - lo <= 0
    lo[flat] -= 0.5
    hi[flat] += 0.5
    return lo, hi


def _bins(v: np.ndarray, lo: float, hi: float, n: int) -> np.ndarray:
    idx = np.floor((v - lo) / (hi - lo) * n).astype(np.int64)
    return np.clip(idx, 0, n - 1)


def rasterize(points, weights=None, width: int = DEFAULT_SIZE, height: int | None = None, extent=None) -> np.ndarray:
    """Accumulate point weights (default 1 each) into an ``(height, width)`` grid.

    1D data is drawn as full-height columns, so the image is a horizontal strip.
    """
    pts = points.points if isinstance(points, PointCloud) else as_points(points)
    d = pts.shape[1]
    if d > 2:
        raise DimensionError(f"rendering supports 1D and 2D data, got dimension {d}")
    height = width if height is None else height
    if width < 1 or height < 1:
        raise ValueError("image size must be positive")
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)
    lo, hi = _extent(pts, extent)
    col = _bins(pts[:, 0], lo[0], hi[0], width)
    grid = np.zeros((height, width))
    if d == 1:
        strip = np.bincount(col, weights=w, minlength=width)
        grid[:] = strip[None, :]
    else:
        row = height - 1 - _bins(pts[:, 1], lo[1], hi[1], height)
        np.add.at(grid, (row, col), w)
    return grid


def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a P6 file written by :func:`write_ppm` into ``(h, w, 3)`` uint8."""
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P6":
        raise ValueError(f"{path}: not a binary PPM")
    w, h = int(fields[1]), int(fields[2])
    pixels = np.frombuffer(data[pos + 1 : pos + 1 + 3 * w * h], dtype=np.uint8)
    return pixels.reshape(h, w, 3)


def _canvas(height: int, width: int) -> np.ndarray:
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    return img


def points_image(points, width: int = DEFAULT_SIZE, height: int | None = None, extent=None,
                 color=FOREGROUND) -> np.ndarray:
    grid = rasterize(points, None, width, height, extent)
    img = _canvas(*grid.shape)
    img[grid > 0] = color
    return img


def measure_image(points, weights, width: int = DEFAULT_SIZE, height: int | None = None, extent=None) -> np.ndarray:
    """Grayscale density: per-pixel weight scaled so the heaviest pixel is white."""
    grid = rasterize(points, weights, width, height, extent)
    top = grid.max()
    gray = np.rint(255 * grid / top).astype(np.uint8) if top > 0 else np.zeros(grid.shape, np.uint8)
    return np.repeat(gray[:, :, None], 3, axis=2)


def overlay_image(base, overlay, width: int = DEFAULT_SIZE, height: int | None = None, extent=None,
                  base_color=FOREGROUND, overlay_color=OVERLAY) -> np.ndarray:
    """Two-color picture: ``overlay`` (e.g. a chaos-game tail) drawn over ``base``."""
    b = base.points if isinstance(base, PointCloud) else as_points(base)
    o = overlay.points if isinstance(overlay, PointCloud) else as_points(overlay)
    if extent is None:
        both = np.vstack([b, o])
        extent = (both.min(axis=0), both.max(axis=0))
    img = points_image(b, width, height, extent, base_color)
    mask = rasterize(o, None, width, height, extent) > 0
    img[mask] = overlay_color
    return img


def render_points(path, points, width: int = DEFAULT_SIZE, height: int | None = None, extent=None) -> None:
    write_ppm(path, points_image(points, width, height, extent))


def render_measure(path, points, weights, width: int = DEFAULT_SIZE, height: int | None = None, extent=None) -> None:
    write_ppm(path, measure_image(points, weights, width, height, extent))
