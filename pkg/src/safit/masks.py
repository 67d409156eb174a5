"""Box <-> mask conversion on the pixel-center grid.

Pixel (r, c) samples the continuous image plane at (c + 0.5, r + 0.5).  Hard
masks set a pixel to 1 when its center falls inside any box (half-open on the
right/bottom edge, so integer-aligned abutting boxes never double-claim a
center).  Soft masks place an amplitude-1 axis-aligned Gaussian at the box
center with sigma = extent/4 per axis, truncated to the box support;
overlapping boxes compose by maximum.  The value is 1 exactly where a pixel
center coincides with the box center (odd integer extents); for even extents
the nearest centers sit half a pixel off and sample just below 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .boxes import BBox
from .errors import ConfigError, DataError


@dataclass(eq=False)
class Mask:
    """One rasterized layer: a (height, width) float64 grid in [0, 1]."""

    values: np.ndarray
    class_id: int
    frame_id: int = 0
    modality: str = "visible"

    def __post_init__(self):
        self.values = _check_values(self.values)


def _check_values(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise DataError(f"mask must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.size and (arr.min() < 0 or arr.max() > 1):
        raise DataError("mask values must be finite and lie in [0, 1]")
    return arr


def _box_support(box: BBox, xs: np.ndarray, ys: np.ndarray):
    x1, y1, x2, y2 = box.to_corners()
    in_x = (xs >= x1) & (xs < x2)
    in_y = (ys >= y1) & (ys < y2)
    return np.outer(in_y, in_x)


def rasterize(
    boxes: list[BBox] | tuple[BBox, ...],
    size: tuple[int, int],
    mode: str = "hard",
    sigma_divisor: float = 4.0,
) -> np.ndarray:
    """Render boxes onto a (height, width) grid; ``size`` is (width, height).

    ``mode`` is "hard" (indicator of box support) or "soft" (truncated
    Gaussian bumps, composed by max).  ``sigma_divisor`` sets the Gaussian
    width as extent / divisor per axis.
    """
    if mode not in ("hard", "soft"):
        raise ConfigError(f"mode must be 'hard' or 'soft', got {mode!r}")
    w, h = size
    if not (isinstance(w, int) and isinstance(h, int) and w > 0 and h > 0):
        raise ConfigError(f"size must be positive integers (width, height), got {size!r}")
    if not sigma_divisor > 0:
        raise ConfigError(f"sigma_divisor must be > 0, got {sigma_divisor!r}")

    xs = np.arange(w) + 0.5
    ys = np.arange(h) + 0.5
    out = np.zeros((h, w), dtype=float)
    for box in boxes:
        support = _box_support(box, xs, ys)
        if mode == "hard":
            out[support] = 1.0
        else:
            sx = box.w / sigma_divisor
            sy = box.h / sigma_divisor
            gx = np.exp(-((xs - box.cx) ** 2) / (2.0 * sx * sx))
            gy = np.exp(-((ys - box.cy) ** 2) / (2.0 * sy * sy))
            bump = np.where(support, np.outer(gy, gx), 0.0)
            np.maximum(out, bump, out=out)
    return out


def mask_to_bboxes(
    values: np.ndarray, threshold: float = 0.5, connectivity: int = 8
) -> list[tuple[BBox, float]]:
    """Recover boxes from a mask: threshold, label, take tight enclosing boxes.

    Pixels with value >= threshold are foreground; connected components (4- or
    8-neighborhood) each yield the smallest enclosing box of their pixels and
    a confidence equal to the mean of the pre-threshold values over the
    component's pixels.  Components come back in raster-scan order of their
    first pixel.
    """
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie strictly inside (0, 1), got {threshold!r}")
    if connectivity not in (4, 8):
        raise ConfigError(f"connectivity must be 4 or 8, got {connectivity!r}")
    arr = _check_values(values)
    structure = np.ones((3, 3), dtype=int) if connectivity == 8 else None
    labels, count = ndimage.label(arr >= threshold, structure=structure)
    out: list[tuple[BBox, float]] = []
    for lab in range(1, count + 1):
        region = labels == lab
        rows = np.where(region.any(axis=1))[0]
        cols = np.where(region.any(axis=0))[0]
        box = BBox.from_corners(
            float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1)
        )
        out.append((box, float(arr[region].mean())))
    return out


def save_mask(values: np.ndarray, path) -> None:
    """Write a mask; .npy stores exact float64, .png quantizes to 8 bits."""
    arr = _check_values(values)
    p = str(path)
    if p.endswith(".npy"):
        np.save(p, arr, allow_pickle=False)
    elif p.endswith(".png"):
        Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(p)
    else:
        raise ConfigError(f"unsupported mask format for {path!r} (use .npy or .png)")


def load_mask(path) -> np.ndarray:
    p = str(path)
    if p.endswith(".npy"):
        return _check_values(np.load(p, allow_pickle=False))
    if p.endswith(".png"):
        return np.asarray(Image.open(p).convert("L"), dtype=float) / 255.0
    raise ConfigError(f"unsupported mask format for {path!r} (use .npy or .png)")
