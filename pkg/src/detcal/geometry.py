"""Normalized bounding-box geometry: center-format boxes, IoU, flips.

Boxes are stored in normalized center format (cx, cy, w, h), all relative to
the image extent, matching the annotation file convention. Corner format is a
derived view used for overlap computation; corners may extend past [0, 1] and
areas use the unclipped extents.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import GeometryError

__all__ = ["Box", "CornerBox", "to_corners", "from_corners", "iou", "flip_horizontal"]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in normalized center format.

    Invariants: 0 <= cx, cy <= 1 and 0 < w, h <= 1. Zero-area boxes are
    rejected at construction so downstream overlap math never sees them.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise GeometryError(f"box center out of range: cx={self.cx}, cy={self.cy}")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise GeometryError(f"box size out of range: w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class CornerBox:
    """Derived corner representation (x_min, y_min, x_max, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise GeometryError("corner box has inverted extents")


def to_corners(b: Box) -> CornerBox:
    half_w = b.w / 2.0
    half_h = b.h / 2.0
    return CornerBox(b.cx - half_w, b.cy - half_h, b.cx + half_w, b.cy + half_h)


def from_corners(c: CornerBox) -> Box:
    return Box(
        (c.x_min + c.x_max) / 2.0,
        (c.y_min + c.y_max) / 2.0,
        c.x_max - c.x_min,
        c.y_max - c.y_min,
    )


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes.

    Touching-but-not-overlapping edges contribute zero area (area measure,
    not pixel adjacency), so the result is 0 for adjacent boxes.
    """
    ax1, ax2 = a.cx - a.w / 2.0, a.cx + a.w / 2.0
    bx1, bx2 = b.cx - b.w / 2.0, b.cx + b.w / 2.0
    ix = min(ax2, bx2) - max(ax1, bx1)
    if ix <= 0.0:
        return 0.0
    ay1, ay2 = a.cy - a.h / 2.0, a.cy + a.h / 2.0
    by1, by2 = b.cy - b.h / 2.0, b.cy + b.h / 2.0
    iy = min(ay2, by2) - max(ay1, by1)
    if iy <= 0.0:
        return 0.0
    inter = ix * iy
    # areas from the same corner extents, so iou(b, b) is exactly 1
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def flip_horizontal(b: Box) -> Box:
    """Mirror a box across the vertical image midline: cx -> 1 - cx.

    cy, w, h are passed through untouched. The reflection is exact whenever
    1 - cx is representable (always true for coordinates on a power-of-two
    pixel grid); see the module tests for the precision contract.
    """
    return Box(1.0 - b.cx, b.cy, b.w, b.h)
