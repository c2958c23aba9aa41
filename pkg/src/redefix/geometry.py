"""Box geometry primitives shared by detection, localization and rendering.

All rectangles are border boxes in page coordinates (CSS pixels, y grows
downward). Comparisons use small tolerances to suppress sub-pixel rounding
noise coming back from real browser engines:

* ``OVERLAP_AREA_EPS`` — an intersection only counts as overlap when its
  area exceeds 1 px².
* ``EDGE_EPS`` — edge comparisons (containment, protrusion) ignore
  penetrations of at most 0.5 px.
"""

from __future__ import annotations

from dataclasses import dataclass

OVERLAP_AREA_EPS = 1.0
EDGE_EPS = 0.5


@dataclass(frozen=True)
class BoundingBox:
    """Border-box rectangle in page coordinates."""

    x: float
    y: float
    width: float
    height: float

    def __post_init__(self):
        if self.width < 0 or self.height < 0:
            raise ValueError(f"negative box dimensions: {self.width}x{self.height}")

    @property
    def right(self) -> float:
        return self.x + self.width

    @property
    def bottom(self) -> float:
        return self.y + self.height

    @property
    def center_x(self) -> float:
        return self.x + self.width / 2.0

    @property
    def center_y(self) -> float:
        return self.y + self.height / 2.0

    def area(self) -> float:
        return self.width * self.height


def intersection_extent(a: BoundingBox, b: BoundingBox) -> tuple[float, float]:
    """Signed horizontal/vertical overlap extents.

    Positive values are penetration depths; non-positive values are gaps.
    """
    dx = min(a.right, b.right) - max(a.x, b.x)
    dy = min(a.bottom, b.bottom) - max(a.y, b.y)
    return dx, dy


def overlap_area(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area, 0.0 when the boxes do not intersect."""
    dx, dy = intersection_extent(a, b)
    if dx <= 0 or dy <= 0:
        return 0.0
    return dx * dy


def boxes_overlap(a: BoundingBox, b: BoundingBox) -> bool:
    """True when the intersection area exceeds ``OVERLAP_AREA_EPS``."""
    return overlap_area(a, b) > OVERLAP_AREA_EPS


def contains(outer: BoundingBox, inner: BoundingBox, eps: float = EDGE_EPS) -> bool:
    """True when ``inner`` stays within ``outer`` on all four sides."""
    return (
        inner.x >= outer.x - eps
        and inner.y >= outer.y - eps
        and inner.right <= outer.right + eps
        and inner.bottom <= outer.bottom + eps
    )


def protrusion_amount(outer: BoundingBox, inner: BoundingBox) -> float:
    """Total distance by which ``inner`` escapes ``outer``, summed over sides."""
    amount = 0.0
    amount += max(0.0, outer.x - inner.x)
    amount += max(0.0, outer.y - inner.y)
    amount += max(0.0, inner.right - outer.right)
    amount += max(0.0, inner.bottom - outer.bottom)
    return amount


def viewport_protrusion_amount(box: BoundingBox, viewport_width: float) -> float:
    """Horizontal distance by which ``box`` escapes the viewport."""
    return max(0.0, -box.x) + max(0.0, box.right - viewport_width)


def union_box(boxes: list[BoundingBox]) -> BoundingBox:
    """Smallest box enclosing all the given boxes."""
    if not boxes:
        raise ValueError("union of zero boxes")
    x0 = min(b.x for b in boxes)
    y0 = min(b.y for b in boxes)
    x1 = max(b.right for b in boxes)
    y1 = max(b.bottom for b in boxes)
    return BoundingBox(x0, y0, x1 - x0, y1 - y0)
