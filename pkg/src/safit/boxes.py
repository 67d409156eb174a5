"""Axis-aligned bounding boxes in center-size form.

Boxes are stored as (cx, cy, w, h) in pixel units because every measure in
:mod:`safit.metrics` is written against centers and extents.  File formats use
COCO top-left (x, y, w, h); conversion helpers live here.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    """Box with strictly positive extent.

    Degenerate boxes are rejected at construction: unions, aspect terms and
    Wasserstein radii are all undefined for zero width or height.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        # coerce ints so arithmetic and serialization stay in float64
        object.__setattr__(self, "cx", float(self.cx))
        object.__setattr__(self, "cy", float(self.cy))
        object.__setattr__(self, "w", float(self.w))
        object.__setattr__(self, "h", float(self.h))
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box extent must be positive, got w={self.w} h={self.h}")

    def area(self) -> float:
        return self.w * self.h

    def to_corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2).  Exact for dyadic coordinates."""
        return (
            self.cx - self.w / 2,
            self.cy - self.h / 2,
            self.cx + self.w / 2,
            self.cy + self.h / 2,
        )

    def to_xywh(self) -> tuple[float, float, float, float]:
        """COCO top-left form (x, y, w, h)."""
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.w, self.h)

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float) -> "BBox":
        return cls((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BBox":
        return cls(x + w / 2, y + h / 2, w, h)

    def shifted(self, dx: float, dy: float) -> "BBox":
        return BBox(self.cx + dx, self.cy + dy, self.w, self.h)
