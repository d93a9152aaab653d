"""2D polygon kernel: shoelace areas, convex clipping, visible-area computation.

Coordinates are (x, y) tuples in any consistent unit; areas come back in that
unit squared. Polygons are normalized to counter-clockwise order on
construction. There is deliberately no general polygon boolean engine here:
occluded area is computed exactly by inclusion-exclusion for up to three
convex occluders and by dense rasterization beyond that.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

Point = tuple[float, float]

# Vertices within this distance of a clip edge count as inside (closed
# half-plane), which makes boundary tie-breaking deterministic.
EDGE_EPS = 1e-9

# Clip outputs below this area are treated as empty.
_MIN_AREA = 1e-9

# Below 16 segments the inscribed polygon underestimates a disc too badly
# to serve as a wheel stand-in.
MIN_CIRCLE_SEGMENTS = 16

# visible_area falls back to rasterization above this many occluders.
_MAX_EXACT_OCCLUDERS = 3

RASTER_CELLS = 1024


def _signed_area2(vertices: Sequence[Point]) -> float:
    # Twice the signed area; positive for counter-clockwise order.
    acc = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return acc


class Polygon:
    """Simple polygon with nonzero area, stored counter-clockwise."""

    __slots__ = ("vertices",)

    def __init__(self, vertices: Iterable[Point]):
        vs = tuple((float(x), float(y)) for x, y in vertices)
        if len(vs) < 3:
            raise ValueError(f"polygon needs at least 3 vertices, got {len(vs)}")
        doubled = _signed_area2(vs)
        if abs(doubled) <= 2.0 * _MIN_AREA:
            raise ValueError("degenerate polygon: zero area")
        if doubled < 0:
            vs = tuple(reversed(vs))
        self.vertices = vs

    def area(self) -> float:
        return abs(_signed_area2(self.vertices)) / 2.0

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.vertices]
        ys = [p[1] for p in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({len(self.vertices)} vertices, area={self.area():.6g})"


class ConvexPolygon(Polygon):
    """Polygon whose consecutive edge cross-products all share one sign."""

    __slots__ = ()

    def __init__(self, vertices: Iterable[Point]):
        super().__init__(vertices)
        vs = self.vertices
        n = len(vs)
        for i in range(n):
            ax, ay = vs[i]
            bx, by = vs[(i + 1) % n]
            cx, cy = vs[(i + 2) % n]
            e1x, e1y = bx - ax, by - ay
            e2x, e2y = cx - bx, cy - by
            cross = e1x * e2y - e1y * e2x
            norm = math.hypot(e1x, e1y) * math.hypot(e2x, e2y)
            # After CCW normalization every turn must be left or collinear.
            if norm > 0 and cross < -EDGE_EPS * norm:
                raise ValueError("polygon is not convex")


def polygon_area(polygon: Polygon) -> float:
    """Absolute enclosed area of a polygon (shoelace formula)."""
    return polygon.area()


def rect_polygon(x_min: float, y_min: float, x_max: float, y_max: float) -> ConvexPolygon:
    """Axis-aligned rectangle as a convex polygon."""
    return ConvexPolygon([(x_min, y_min), (x_max, y_min), (x_max, y_max), (x_min, y_max)])


def circle_polygon(center: Point, radius: float, segments: int = 64) -> ConvexPolygon:
    """Regular polygon inscribed in a circle.

    The enclosed area is (segments / 2) * radius^2 * sin(2*pi/segments),
    which converges to pi*r^2 from below as segments grows.
    """
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    segments = int(segments)
    if segments < MIN_CIRCLE_SEGMENTS:
        raise ValueError(f"segments must be >= {MIN_CIRCLE_SEGMENTS}, got {segments}")
    cx, cy = center
    step = 2.0 * math.pi / segments
    return ConvexPolygon(
        [(cx + radius * math.cos(k * step), cy + radius * math.sin(k * step)) for k in range(segments)]
    )


def _clip_half_plane(points: list[Point], a: Point, b: Point) -> list[Point]:
    # Sutherland-Hodgman step: keep the region left of the directed edge a->b.
    ax, ay = a
    ex, ey = b[0] - ax, b[1] - ay
    tol = -EDGE_EPS * math.hypot(ex, ey)
    out: list[Point] = []
    if not points:
        return out
    sx, sy = points[-1]
    s_side = ex * (sy - ay) - ey * (sx - ax)
    for px, py in points:
        p_side = ex * (py - ay) - ey * (px - ax)
        p_in = p_side >= tol
        s_in = s_side >= tol
        if p_in != s_in:
            t = s_side / (s_side - p_side)
            out.append((sx + t * (px - sx), sy + t * (py - sy)))
        if p_in:
            out.append((px, py))
        sx, sy, s_side = px, py, p_side
    return out


def _as_convex(polygon: Polygon) -> ConvexPolygon:
    if isinstance(polygon, ConvexPolygon):
        return polygon
    return ConvexPolygon(polygon.vertices)


def clip(subject: Polygon, window: Polygon) -> list[Polygon]:
    """Intersection of a polygon with a convex window.

    Returns a list with a single polygon covering the intersection, or an
    empty list when subject and window are disjoint. For non-convex
    subjects the result may contain degenerate bridge edges connecting
    disjoint pieces; those edges cancel in the shoelace sum, so all area
    computations on the result stay exact.
    """
    win = _as_convex(window)
    points = list(subject.vertices)
    n = len(win.vertices)
    for i in range(n):
        if not points:
            break
        points = _clip_half_plane(points, win.vertices[i], win.vertices[(i + 1) % n])
    if len(points) >= 3 and abs(_signed_area2(points)) / 2.0 > _MIN_AREA:
        return [Polygon(points)]
    return []


def _pieces_area(pieces: list[Polygon]) -> float:
    return sum(p.area() for p in pieces)


def _clip_pieces(pieces: list[Polygon], window: ConvexPolygon) -> list[Polygon]:
    out: list[Polygon] = []
    for piece in pieces:
        out.extend(clip(piece, window))
    return out


def visible_area(part: Polygon, occluders: Sequence[Polygon], *, raster_cells: int = RASTER_CELLS) -> float:
    """Area of ``part`` not covered by the union of the occluders.

    Up to three occluders are handled exactly by inclusion-exclusion over
    chained clips; beyond three the part bbox is rasterized on a grid of
    ``raster_cells`` x ``raster_cells`` cell centers (at least 1024 each way
    by default) and visible cells are counted.
    """
    occs = [_as_convex(o) for o in occluders]
    base = part.area()
    if not occs:
        return base
    if len(occs) <= _MAX_EXACT_OCCLUDERS:
        singles = [clip(part, occ) for occ in occs]
        covered = sum(_pieces_area(pieces) for pieces in singles)
        pairs: dict[tuple[int, int], list[Polygon]] = {}
        for i in range(len(occs)):
            for j in range(i + 1, len(occs)):
                pieces = _clip_pieces(singles[i], occs[j])
                pairs[(i, j)] = pieces
                covered -= _pieces_area(pieces)
        if len(occs) == 3:
            covered += _pieces_area(_clip_pieces(pairs[(0, 1)], occs[2]))
        return max(base - covered, 0.0)
    return _raster_visible_area(part, occs, raster_cells)


def points_in_polygon(polygon: Polygon, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Even-odd containment test, vectorized over point arrays."""
    inside = np.zeros(np.shape(xs), dtype=bool)
    vs = polygon.vertices
    n = len(vs)
    for i in range(n):
        x0, y0 = vs[i]
        x1, y1 = vs[(i + 1) % n]
        if y0 == y1:
            continue
        crosses = (y0 > ys) != (y1 > ys)
        x_at = x0 + (ys - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (xs < x_at)
    return inside


def points_in_convex(polygon: ConvexPolygon, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Half-plane containment test for a convex polygon, vectorized."""
    inside = np.ones(np.shape(xs), dtype=bool)
    vs = polygon.vertices
    n = len(vs)
    for i in range(n):
        ax, ay = vs[i]
        bx, by = vs[(i + 1) % n]
        inside &= (bx - ax) * (ys - ay) - (by - ay) * (xs - ax) >= 0.0
    return inside


def _raster_visible_area(part: Polygon, occluders: list[ConvexPolygon], cells: int) -> float:
    cells = max(int(cells), RASTER_CELLS)
    x0, y0, x1, y1 = part.bounds()
    dx = (x1 - x0) / cells
    dy = (y1 - y0) / cells
    xs = x0 + (np.arange(cells) + 0.5) * dx
    ys = y0 + (np.arange(cells) + 0.5) * dy
    grid_x, grid_y = np.meshgrid(xs, ys)
    grid_x = grid_x.ravel()
    grid_y = grid_y.ravel()
    mask = points_in_polygon(part, grid_x, grid_y)
    for occ in occluders:
        remaining = mask.nonzero()[0]
        if remaining.size == 0:
            break
        hit = points_in_convex(occ, grid_x[remaining], grid_y[remaining])
        mask[remaining[hit]] = False
    return float(mask.sum()) * dx * dy
