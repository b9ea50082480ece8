"""Coordinate math for rotated and tiled extraction passes.

Page coordinates have their origin at the top-left corner with ``y`` growing
downward. :func:`rotate_point` applies the ordinary counter-clockwise rotation
matrix to those coordinates, which on screen (y down) looks clockwise.

Rotating a *page* by ``theta`` follows the image-library convention (PIL's
``Image.rotate(theta, expand=True)``): content turns counter-clockwise on
screen about the page center and lands centered on an enlarged canvas. In page
coordinates that is ``rotate_point(p, center, -theta)``, so mapping a detection
from the rotated canvas back home uses ``+theta``. Every function below uses
this one convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

ROUND_TRIP_TOL = 1e-9


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"non-finite coordinate: {v!r}")


@dataclass(frozen=True, slots=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        _check_finite(self.x, self.y)


@dataclass(frozen=True, slots=True)
class Dims:
    width: float
    height: float

    def __post_init__(self) -> None:
        _check_finite(self.width, self.height)
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"dims must be positive, got {self.width}x{self.height}")

    @property
    def center(self) -> Point:
        return Point(self.width / 2.0, self.height / 2.0)


@dataclass(frozen=True, slots=True)
class BBox:
    """Axis-aligned box ``(left, top, right, bottom)`` with positive area."""

    left: float
    top: float
    right: float
    bottom: float

    def __post_init__(self) -> None:
        _check_finite(self.left, self.top, self.right, self.bottom)
        if not (self.left < self.right and self.top < self.bottom):
            raise ValueError(f"degenerate bbox {self.as_tuple()}")

    @classmethod
    def from_points(cls, points: Iterable[Point]) -> "BBox":
        """Axis-aligned hull of a set of points."""
        pts = list(points)
        if not pts:
            raise ValueError("hull of no points")
        return cls(
            min(p.x for p in pts),
            min(p.y for p in pts),
            max(p.x for p in pts),
            max(p.y for p in pts),
        )

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return Point((self.left + self.right) / 2.0, (self.top + self.bottom) / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.left, self.top, self.right, self.bottom)

    def corners(self) -> tuple[Point, Point, Point, Point]:
        return (
            Point(self.left, self.top),
            Point(self.right, self.top),
            Point(self.right, self.bottom),
            Point(self.left, self.bottom),
        )

    def contains(self, other: "BBox", tol: float = 0.0) -> bool:
        return (
            self.left <= other.left + tol
            and self.top <= other.top + tol
            and self.right >= other.right - tol
            and self.bottom >= other.bottom - tol
        )

    def contains_point(self, p: Point, tol: float = 0.0) -> bool:
        return (
            self.left - tol <= p.x <= self.right + tol
            and self.top - tol <= p.y <= self.bottom + tol
        )

    def union(self, other: "BBox") -> "BBox":
        return BBox(
            min(self.left, other.left),
            min(self.top, other.top),
            max(self.right, other.right),
            max(self.bottom, other.bottom),
        )

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.left + dx, self.top + dy, self.right + dx, self.bottom + dy)

    def scale(self, sx: float, sy: float) -> "BBox":
        return BBox(self.left * sx, self.top * sy, self.right * sx, self.bottom * sy)

    def clamp(self, width: float, height: float) -> "BBox":
        """Clip to ``[0, width] x [0, height]``; raises if nothing remains."""
        return BBox(
            min(max(self.left, 0.0), width),
            min(max(self.top, 0.0), height),
            min(max(self.right, 0.0), width),
            min(max(self.bottom, 0.0), height),
        )


@dataclass(frozen=True, slots=True)
class TileRect:
    bbox: BBox
    row: int
    col: int


def _cos_sin(theta_deg: float) -> tuple[float, float]:
    # exact values on quarter turns so 90/180/270 swaps carry no 1e-17 residue
    q, r = divmod(theta_deg, 90.0)
    if r == 0.0:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(q) % 4]
    rad = math.radians(theta_deg)
    return math.cos(rad), math.sin(rad)


def rotate_point(p: Point, center: Point, theta_deg: float) -> Point:
    """Rotate ``p`` about ``center`` by ``theta_deg`` (counter-clockwise matrix)."""
    _check_finite(theta_deg)
    c, s = _cos_sin(theta_deg)
    dx, dy = p.x - center.x, p.y - center.y
    return Point(center.x + dx * c - dy * s, center.y + dx * s + dy * c)


def rotated_canvas_dims(dims: Dims, theta_deg: float) -> Dims:
    """Extent of the canvas that holds ``dims`` rotated by ``theta_deg`` without clipping."""
    _check_finite(theta_deg)
    c, s = _cos_sin(theta_deg)
    c, s = abs(c), abs(s)
    return Dims(dims.width * c + dims.height * s, dims.width * s + dims.height * c)


def forward_project_point(p: Point, theta_deg: float, original_dims: Dims,
                          rotated_dims: Dims | None = None) -> Point:
    """Map a page point onto the canvas of the page rotated by ``theta_deg``."""
    if rotated_dims is None:
        rotated_dims = rotated_canvas_dims(original_dims, theta_deg)
    oc, rc = original_dims.center, rotated_dims.center
    q = rotate_point(p, oc, -theta_deg)
    return Point(q.x - oc.x + rc.x, q.y - oc.y + rc.y)


def back_project_point(p: Point, theta_deg: float, rotated_dims: Dims,
                       original_dims: Dims) -> Point:
    """Inverse of :func:`forward_project_point`."""
    oc, rc = original_dims.center, rotated_dims.center
    q = rotate_point(p, rc, theta_deg)
    return Point(q.x - rc.x + oc.x, q.y - rc.y + oc.y)


def _is_identity(theta_deg: float, a: Dims, b: Dims) -> bool:
    return theta_deg % 360.0 == 0.0 and a == b


def _hull_about(xy: Iterable[tuple[float, float]], theta_deg: float, src: Point, dst: Point) -> BBox:
    """Rotate points about ``src`` by ``theta_deg``, move ``src`` onto ``dst``, and take the hull."""
    c, s = _cos_sin(theta_deg)
    xs, ys = [], []
    for x, y in xy:
        dx, dy = x - src.x, y - src.y
        xs.append(dst.x + dx * c - dy * s)
        ys.append(dst.y + dx * s + dy * c)
    return BBox(min(xs), min(ys), max(xs), max(ys))


def _corners_xy(b: BBox) -> tuple[tuple[float, float], ...]:
    return ((b.left, b.top), (b.right, b.top), (b.right, b.bottom), (b.left, b.bottom))


def forward_project_quad(points: Sequence[Point], theta_deg: float, original_dims: Dims,
                         rotated_dims: Dims | None = None) -> BBox:
    """Hull, on the rotated canvas, of an arbitrary polygon given in page coordinates."""
    _check_finite(theta_deg)
    if rotated_dims is None:
        rotated_dims = rotated_canvas_dims(original_dims, theta_deg)
    if _is_identity(theta_deg, original_dims, rotated_dims):
        return BBox.from_points(points)
    return _hull_about(((p.x, p.y) for p in points), -theta_deg, original_dims.center, rotated_dims.center)


def forward_project_bbox(b: BBox, theta_deg: float, original_dims: Dims,
                         rotated_dims: Dims | None = None) -> BBox:
    _check_finite(theta_deg)
    if rotated_dims is None:
        rotated_dims = rotated_canvas_dims(original_dims, theta_deg)
    if _is_identity(theta_deg, original_dims, rotated_dims):
        return b
    return _hull_about(_corners_xy(b), -theta_deg, original_dims.center, rotated_dims.center)


def back_project_bbox(b: BBox, theta_deg: float, rotated_dims: Dims, original_dims: Dims) -> BBox:
    """Hull in the original page frame of a box detected on a rotated canvas.

    The result is axis-aligned, so for angles off the quarter turns it is
    larger than the detected box.
    """
    _check_finite(theta_deg)
    if _is_identity(theta_deg, original_dims, rotated_dims):
        return b
    return _hull_about(_corners_xy(b), theta_deg, rotated_dims.center, original_dims.center)


def intersection_area(a: BBox, b: BBox) -> float:
    w = min(a.right, b.right) - max(a.left, b.left)
    h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def iou(a: BBox, b: BBox) -> float:
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def _axis_starts(page: float, tile: float, stride: float) -> list[float]:
    if tile >= page:
        return [0.0]
    starts = [0.0]
    while starts[-1] + tile < page:
        nxt = starts[-1] + stride
        if nxt + tile >= page:
            # flush against the edge and stop; (page - tile) + tile can round below page
            starts.append(page - tile)
            break
        starts.append(nxt)
    return starts


def compute_tile_grid(page: Dims, tile: Dims, overlap: float) -> list[TileRect]:
    """Overlapping tiles covering ``page``, row-major.

    Neighbouring tiles share ``overlap`` units; the last row and column are
    shifted back to sit flush with the page edge, so they may share more. A
    tile larger than the page is clamped to the page along that axis.
    """
    _check_finite(overlap)
    if overlap < 0:
        raise ValueError(f"overlap must be >= 0, got {overlap}")
    if overlap >= min(tile.width, tile.height):
        raise ValueError(
            f"overlap {overlap} must be smaller than tile {tile.width}x{tile.height}"
        )
    tw, th = min(tile.width, page.width), min(tile.height, page.height)
    xs = _axis_starts(page.width, tile.width, tile.width - overlap)
    ys = _axis_starts(page.height, tile.height, tile.height - overlap)
    # the last row and column end exactly on the page edge, not one ulp short
    rights = [x + tw for x in xs[:-1]] + [page.width]
    bottoms = [y + th for y in ys[:-1]] + [page.height]
    return [
        TileRect(BBox(x, y, rights[col], bottoms[row]), row, col)
        for row, y in enumerate(ys)
        for col, x in enumerate(xs)
    ]


def wrap180(angle_deg: float) -> float:
    """Fold an angle difference into ``(-180, 180]``."""
    a = math.fmod(angle_deg, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a
