"""Synthetic side-view bicycle scenes with exact ground-truth visibility.

A scene places a parametric bicycle silhouette (two circular wheels, a frame
of two triangles, a small side-on handlebar rectangle) on a 640x640 canvas
and drops axis-aligned rectangular occluders over it. Because every shape is
an explicit polygon, per-part visible fractions can be computed exactly with
the clipping kernel, giving an independent ground truth to hold the
detection-based estimator against.

An idealized detector turns a scene back into a DetectionFrame: each part
whose visible fraction clears the detectability floor emits a detection
whose bbox hugs the visible region, with confidence mapped linearly from the
visible fraction into [0.5, 1.0] so default filtering never drops it. That
isolates estimator error from detector error.

Scene generation is a pure function of the seed; batches are reproducible
bit for bit.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import evaluation
from .classifier import classify_frame, occlusion_band
from .geometry import ConvexPolygon, circle_polygon, points_in_convex, rect_polygon, visible_area
from .model import (
    BoundingBox,
    ClassifierConfig,
    DetectionFrame,
    OcclusionBand,
    PartClass,
    PartDetection,
    SurfaceAreaModel,
)

CANVAS_SIZE = 640
WHEEL_SEGMENTS = 128

_PLACEMENT_MARGIN = 10.0
_MAX_SAMPLING_ATTEMPTS = 1000
_COVERAGE_TOLERANCE = 0.02

Rect = tuple[float, float, float, float]
PointM = tuple[float, float]
TriangleM = tuple[PointM, PointM, PointM]


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    radius: float

    def polygon(self) -> ConvexPolygon:
        return circle_polygon((self.cx, self.cy), self.radius, WHEEL_SEGMENTS)

    def contains(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return (xs - self.cx) ** 2 + (ys - self.cy) ** 2 <= self.radius**2

    def bounds(self) -> Rect:
        return (self.cx - self.radius, self.cy - self.radius, self.cx + self.radius, self.cy + self.radius)


@dataclass(frozen=True)
class Triangle:
    a: PointM
    b: PointM
    c: PointM

    def polygon(self) -> ConvexPolygon:
        return ConvexPolygon([self.a, self.b, self.c])

    def contains(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return points_in_convex(self.polygon(), xs, ys)

    def bounds(self) -> Rect:
        xs = (self.a[0], self.b[0], self.c[0])
        ys = (self.a[1], self.b[1], self.c[1])
        return (min(xs), min(ys), max(xs), max(ys))


@dataclass(frozen=True)
class RectShape:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def polygon(self) -> ConvexPolygon:
        return rect_polygon(self.x_min, self.y_min, self.x_max, self.y_max)

    def contains(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return (xs >= self.x_min) & (xs <= self.x_max) & (ys >= self.y_min) & (ys <= self.y_max)

    def bounds(self) -> Rect:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


Shape = Circle | Triangle | RectShape


@dataclass(frozen=True)
class PartInstance:
    """One bicycle part placed in a scene: a slot name, its class, its shapes."""

    slot: str
    part: PartClass
    shapes: tuple[Shape, ...]

    def area(self) -> float:
        return sum(s.polygon().area() for s in self.shapes)

    def bounds(self) -> Rect:
        rects = [s.bounds() for s in self.shapes]
        return (
            min(r[0] for r in rects),
            min(r[1] for r in rects),
            max(r[2] for r in rects),
            max(r[3] for r in rects),
        )


# Default silhouette, in meters with the ground at y = 0 and the rear axle
# at x = wheel_radius. Chosen so the filled part areas track the surface
# area model's proportions within the sanity tolerance below.
_DEFAULT_FRAME_TRIANGLES: tuple[TriangleM, TriangleM] = (
    ((0.35, 0.35), (0.75, 0.75), (0.82, 0.35)),
    ((0.82, 0.35), (0.75, 0.75), (1.28, 0.72)),
)
_DEFAULT_HANDLEBAR_RECT: Rect = (1.22, 0.90, 1.35, 1.00)

# Allowed relative deviation between the template's filled-area proportions
# and the surface-area model's physical proportions.
_PROPORTION_TOLERANCE = 0.25

_TOTAL_LENGTH_RANGE = (1.5, 1.8)
_HANDLEBAR_TOP_RANGE = (0.75, 1.10)


@dataclass(frozen=True)
class BicycleTemplate:
    """Parametric side-view bicycle silhouette, in meters, ground at y = 0."""

    wheel_radius: float = 0.35
    wheelbase: float = 1.05
    frame_triangles: tuple[TriangleM, TriangleM] = _DEFAULT_FRAME_TRIANGLES
    handlebar_rect: Rect = _DEFAULT_HANDLEBAR_RECT

    def __post_init__(self) -> None:
        if self.wheel_radius <= 0 or self.wheelbase <= 0:
            raise ValueError("wheel_radius and wheelbase must be positive")
        length = self.total_length()
        if not _TOTAL_LENGTH_RANGE[0] <= length <= _TOTAL_LENGTH_RANGE[1]:
            raise ValueError(
                f"total length {length:.3f} m outside {_TOTAL_LENGTH_RANGE}"
            )
        top = self.handlebar_rect[3]
        if not _HANDLEBAR_TOP_RANGE[0] <= top <= _HANDLEBAR_TOP_RANGE[1]:
            raise ValueError(f"handlebar top height {top:.3f} m outside {_HANDLEBAR_TOP_RANGE}")
        reference = SurfaceAreaModel()
        areas = {inst.slot: inst.area() for inst in self.part_instances()}
        total = sum(areas.values())
        expected = {
            "rear_wheel": reference.wheel_area_cm2 / reference.total_area_cm2,
            "front_wheel": reference.wheel_area_cm2 / reference.total_area_cm2,
            "frame": reference.frame_area_cm2 / reference.total_area_cm2,
            "handlebar": reference.handlebar_area_cm2 / reference.total_area_cm2,
        }
        for slot, area in areas.items():
            share = area / total
            deviation = abs(share / expected[slot] - 1.0)
            if deviation > _PROPORTION_TOLERANCE:
                raise ValueError(
                    f"{slot} fills {share:.1%} of the silhouette but the area model "
                    f"expects {expected[slot]:.1%} (off by {deviation:.0%})"
                )

    def total_length(self) -> float:
        return self.wheelbase + 2.0 * self.wheel_radius

    def max_height(self) -> float:
        tops = [self.handlebar_rect[3], 2.0 * self.wheel_radius]
        tops.extend(p[1] for tri in self.frame_triangles for p in tri)
        return max(tops)

    def part_instances(self) -> list[PartInstance]:
        """The four part slots in template (meter) coordinates."""
        hub_y = self.wheel_radius
        rear_hub_x = self.wheel_radius
        front_hub_x = self.wheel_radius + self.wheelbase
        return [
            PartInstance("rear_wheel", PartClass.WHEEL, (Circle(rear_hub_x, hub_y, self.wheel_radius),)),
            PartInstance("front_wheel", PartClass.WHEEL, (Circle(front_hub_x, hub_y, self.wheel_radius),)),
            PartInstance("frame", PartClass.FRAME, tuple(Triangle(*tri) for tri in self.frame_triangles)),
            PartInstance("handlebar", PartClass.HANDLEBAR, (RectShape(*self.handlebar_rect),)),
        ]

    def to_dict(self) -> dict:
        return {
            "wheel_radius": self.wheel_radius,
            "wheelbase": self.wheelbase,
            "frame_triangles": [[list(p) for p in tri] for tri in self.frame_triangles],
            "handlebar_rect": list(self.handlebar_rect),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "BicycleTemplate":
        return cls(
            wheel_radius=float(data["wheel_radius"]),
            wheelbase=float(data["wheelbase"]),
            frame_triangles=tuple(
                tuple(tuple(float(c) for c in p) for p in tri) for tri in data["frame_triangles"]
            ),
            handlebar_rect=tuple(float(c) for c in data["handlebar_rect"]),
        )


def _place_shape(shape: Shape, scale: float, ox: float, oy: float) -> Shape:
    # Meter coordinates are y-up with the ground at y=0; pixels are y-down
    # with the ground line at oy.
    if isinstance(shape, Circle):
        return Circle(ox + shape.cx * scale, oy - shape.cy * scale, shape.radius * scale)
    if isinstance(shape, Triangle):
        pts = [(ox + p[0] * scale, oy - p[1] * scale) for p in (shape.a, shape.b, shape.c)]
        return Triangle(*pts)
    return RectShape(
        ox + shape.x_min * scale,
        oy - shape.y_max * scale,
        ox + shape.x_max * scale,
        oy - shape.y_min * scale,
    )


@dataclass(frozen=True)
class Scene:
    """A placed bicycle plus occluder rectangles, all in pixel coordinates."""

    template: BicycleTemplate
    scale: float
    origin: PointM
    occluders: tuple[Rect, ...]
    seed: int
    canvas: tuple[int, int] = (CANVAS_SIZE, CANVAS_SIZE)

    def __post_init__(self) -> None:
        object.__setattr__(self, "occluders", tuple(tuple(float(c) for c in r) for r in self.occluders))
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "canvas", tuple(int(c) for c in self.canvas))

    def part_instances(self) -> list[PartInstance]:
        ox, oy = self.origin
        placed = []
        for inst in self.template.part_instances():
            shapes = tuple(_place_shape(s, self.scale, ox, oy) for s in inst.shapes)
            placed.append(PartInstance(inst.slot, inst.part, shapes))
        return placed

    def occluder_polygons(self) -> list[ConvexPolygon]:
        return [rect_polygon(*rect) for rect in self.occluders]

    def bicycle_bounds(self) -> Rect:
        rects = [inst.bounds() for inst in self.part_instances()]
        return (
            min(r[0] for r in rects),
            min(r[1] for r in rects),
            max(r[2] for r in rects),
            max(r[3] for r in rects),
        )

    def to_dict(self) -> dict:
        return {
            "template": self.template.to_dict(),
            "scale": self.scale,
            "origin": list(self.origin),
            "occluders": [list(r) for r in self.occluders],
            "seed": self.seed,
            "canvas": list(self.canvas),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scene":
        return cls(
            template=BicycleTemplate.from_dict(data["template"]),
            scale=float(data["scale"]),
            origin=tuple(data["origin"]),
            occluders=tuple(tuple(r) for r in data["occluders"]),
            seed=int(data["seed"]),
            canvas=tuple(data.get("canvas", (CANVAS_SIZE, CANVAS_SIZE))),
        )

    @classmethod
    def from_json(cls, document: str | bytes) -> "Scene":
        return cls.from_dict(json.loads(document))


class _CoverageProbe:
    """Cheap coverage estimator from fixed sample points inside each part."""

    _GRID = 24

    def __init__(self, instances: Sequence[PartInstance]):
        self.points: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.total_area = 0.0
        for inst in instances:
            x0, y0, x1, y1 = inst.bounds()
            xs = np.linspace(x0, x1, self._GRID)
            ys = np.linspace(y0, y1, self._GRID)
            grid_x, grid_y = np.meshgrid(xs, ys)
            grid_x = grid_x.ravel()
            grid_y = grid_y.ravel()
            mask = np.zeros(grid_x.shape, dtype=bool)
            for shape in inst.shapes:
                mask |= shape.contains(grid_x, grid_y)
            area = inst.area()
            self.points.append((grid_x[mask], grid_y[mask], area))
            self.total_area += area

    def coverage(self, rects: Sequence[Rect]) -> float:
        covered = 0.0
        for xs, ys, area in self.points:
            if xs.size == 0:
                continue
            hit = np.zeros(xs.shape, dtype=bool)
            for x0, y0, x1, y1 in rects:
                hit |= (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)
            covered += area * (float(hit.sum()) / xs.size)
        return covered / self.total_area


def _sample_rect(rng: random.Random, bike: Rect, coverage_target: float, count: int) -> Rect:
    # Occluders model roadside obstacles (vehicles, walls, poles): blocks
    # standing on the ground that hide the bicycle from one side, at least
    # as tall as the bicycle. Free-floating rectangles would instead mostly
    # exercise the estimator's known blind spot (occlusion that leaves the
    # bbox extents unchanged), which is not what road occlusion looks like.
    bx0, by0, bx1, by1 = bike
    bw = bx1 - bx0
    bh = by1 - by0
    w = bw * (0.10 + 0.95 * coverage_target) * rng.uniform(0.5, 1.4) / math.sqrt(max(count, 1))
    cx = rng.uniform(bx0 - 0.15 * bw, bx1 + 0.15 * bw)
    top = by1 - bh * rng.uniform(0.9, 1.35)
    x0 = min(max(cx - w / 2.0, 0.0), CANVAS_SIZE - 1.0)
    x1 = min(max(cx + w / 2.0, x0 + 1.0), float(CANVAS_SIZE))
    y0 = min(max(top, 0.0), CANVAS_SIZE - 1.0)
    return (x0, y0, x1, float(CANVAS_SIZE))


def generate_scene(
    seed: int,
    occluder_count: int,
    coverage_target: float,
    template: BicycleTemplate | None = None,
) -> Scene:
    """Deterministically generate a scene approaching a coverage target.

    Occluder sets are rejection-sampled (up to 1000 attempts) and the set
    whose estimated covered fraction of the bicycle area is closest to
    ``coverage_target`` is kept; sampling stops early once within 0.02.
    The same seed and parameters always produce the identical scene.
    """
    if occluder_count < 0:
        raise ValueError("occluder_count must be non-negative")
    if not 0.0 <= coverage_target <= 1.0:
        raise ValueError(f"coverage_target must be in [0, 1], got {coverage_target}")
    template = template or BicycleTemplate()
    rng = random.Random(seed)

    length = template.total_length()
    height = template.max_height()
    usable = CANVAS_SIZE - 2.0 * _PLACEMENT_MARGIN
    scale_cap = min(usable / length, usable / height)
    scale = rng.uniform(0.6, 0.95) * scale_cap
    ox = rng.uniform(_PLACEMENT_MARGIN, CANVAS_SIZE - _PLACEMENT_MARGIN - length * scale)
    oy = rng.uniform(height * scale + _PLACEMENT_MARGIN, CANVAS_SIZE - _PLACEMENT_MARGIN)

    base = Scene(template=template, scale=scale, origin=(ox, oy), occluders=(), seed=seed)
    if occluder_count == 0:
        return base

    probe = _CoverageProbe(base.part_instances())
    bike = base.bicycle_bounds()
    best_rects: list[Rect] | None = None
    best_gap = math.inf
    for _ in range(_MAX_SAMPLING_ATTEMPTS):
        rects = [_sample_rect(rng, bike, coverage_target, occluder_count) for _ in range(occluder_count)]
        gap = abs(probe.coverage(rects) - coverage_target)
        if gap < best_gap:
            best_gap = gap
            best_rects = rects
        if best_gap <= _COVERAGE_TOLERANCE:
            break
    assert best_rects is not None
    return Scene(template=template, scale=scale, origin=(ox, oy), occluders=tuple(best_rects), seed=seed)


@dataclass(frozen=True)
class GroundTruth:
    """Exact per-part visible fractions and the resulting occlusion level."""

    fractions: Mapping[str, float]
    visibility_pct: float
    occlusion_pct: float


def _slot_share(slot: str, model: SurfaceAreaModel) -> float:
    if slot in ("rear_wheel", "front_wheel"):
        return model.wheel_share_pct
    if slot == "frame":
        return model.frame_share_pct
    return model.handlebar_share_pct


def ground_truth(scene: Scene, area_model: SurfaceAreaModel | None = None) -> GroundTruth:
    """Exact visibility of every part via polygon clipping.

    The occlusion percentage weights each part's exact visible fraction by
    its surface-area share, continuously (no quantization).
    """
    model = area_model or SurfaceAreaModel()
    occluders = scene.occluder_polygons()
    fractions: dict[str, float] = {}
    visibility = 0.0
    for inst in scene.part_instances():
        area = 0.0
        visible = 0.0
        for shape in inst.shapes:
            poly = shape.polygon()
            area += poly.area()
            visible += visible_area(poly, occluders)
        fraction = min(max(visible / area, 0.0), 1.0)
        fractions[inst.slot] = fraction
        visibility += _slot_share(inst.slot, model) * fraction
    visibility = min(max(visibility, 0.0), 100.0)
    return GroundTruth(fractions=fractions, visibility_pct=visibility, occlusion_pct=100.0 - visibility)


def _visible_bbox(inst: PartInstance, occluders: Sequence[Rect], cells: int = 256) -> BoundingBox | None:
    x0, y0, x1, y1 = inst.bounds()
    dx = (x1 - x0) / cells
    dy = (y1 - y0) / cells
    xs = x0 + (np.arange(cells) + 0.5) * dx
    ys = y0 + (np.arange(cells) + 0.5) * dy
    grid_x, grid_y = np.meshgrid(xs, ys)
    grid_x = grid_x.ravel()
    grid_y = grid_y.ravel()
    mask = np.zeros(grid_x.shape, dtype=bool)
    for shape in inst.shapes:
        mask |= shape.contains(grid_x, grid_y)
    for rx0, ry0, rx1, ry1 in occluders:
        mask &= ~((grid_x >= rx0) & (grid_x <= rx1) & (grid_y >= ry0) & (grid_y <= ry1))
    if not mask.any():
        return None
    vis_x = grid_x[mask]
    vis_y = grid_y[mask]
    # Cell centers under-reach the true extent by up to half a cell.
    bbox = BoundingBox(
        float(vis_x.min()) - dx / 2.0,
        float(vis_y.min()) - dy / 2.0,
        float(vis_x.max()) + dx / 2.0,
        float(vis_y.max()) + dy / 2.0,
    )
    return bbox.clamped(CANVAS_SIZE, CANVAS_SIZE)


def simulate_detections(
    scene: Scene,
    config: ClassifierConfig | None = None,
    *,
    truth: GroundTruth | None = None,
) -> DetectionFrame:
    """Idealized detector output for a scene.

    A part whose exact visible fraction reaches the detectability floor
    emits one detection: bbox of the visible region, confidence
    0.5 + 0.5 * fraction. Parts below the floor emit nothing.
    """
    config = config or ClassifierConfig()
    truth = truth or ground_truth(scene, config.area_model)
    detections = []
    for inst in scene.part_instances():
        fraction = truth.fractions[inst.slot]
        if fraction < config.detectability_floor:
            continue
        bbox = _visible_bbox(inst, scene.occluders)
        if bbox is None or not bbox.is_valid():
            continue
        confidence = min(1.0, 0.5 + 0.5 * fraction)
        detections.append(PartDetection(part=inst.part, bbox=bbox, confidence=confidence))
    return DetectionFrame(
        image_id=f"synthetic-{scene.seed}",
        image_width=scene.canvas[0],
        image_height=scene.canvas[1],
        detections=tuple(detections),
    )


@dataclass(frozen=True)
class EstimatorError:
    """Estimated vs exact occlusion for one scene."""

    estimated_occlusion: float
    exact_occlusion: float
    estimated_band: str
    exact_band: str

    @property
    def band_agreement(self) -> bool:
        return self.estimated_band == self.exact_band

    @property
    def abs_error(self) -> float:
        return abs(self.estimated_occlusion - self.exact_occlusion)


def estimator_error(scene: Scene, config: ClassifierConfig | None = None) -> EstimatorError:
    """Run the detection-based estimator on a scene and compare to ground truth.

    When grouping splits the (single) bicycle, the report with the highest
    visibility stands in as the estimate; with no detections at all the
    estimate is full occlusion.
    """
    config = config or ClassifierConfig()
    truth = ground_truth(scene, config.area_model)
    frame = simulate_detections(scene, config, truth=truth)
    reports = classify_frame(frame, config)
    estimated = reports[0].occlusion_pct if reports else 100.0
    estimated = min(max(estimated, 0.0), 100.0)
    exact = min(max(truth.occlusion_pct, 0.0), 100.0)
    return EstimatorError(
        estimated_occlusion=estimated,
        exact_occlusion=exact,
        estimated_band=occlusion_band(estimated).value,
        exact_band=occlusion_band(exact).value,
    )


@dataclass(frozen=True)
class ExperimentStats:
    """Aggregate estimator-vs-oracle statistics over a batch of scenes."""

    scene_count: int
    mean_abs_error: float
    max_abs_error: float
    band_agreement_rate: float
    confusion: "evaluation.BandConfusion"
    results: tuple[EstimatorError, ...] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "scene_count": self.scene_count,
            "mean_abs_error": self.mean_abs_error,
            "max_abs_error": self.max_abs_error,
            "band_agreement_rate": self.band_agreement_rate,
            "confusion": [list(row) for row in self.confusion.matrix],
        }


def run_batch(
    scene_count: int,
    base_seed: int,
    occluder_count: int = 1,
    coverage_target: float | None = None,
    config: ClassifierConfig | None = None,
    template: BicycleTemplate | None = None,
) -> ExperimentStats:
    """Generate ``scene_count`` scenes and compare estimator vs oracle.

    Scene i uses seed ``base_seed + i``. With ``coverage_target=None`` each
    scene draws its own target uniformly from [0, 0.8], seeded by
    ``base_seed``, so reruns are identical.
    """
    if scene_count <= 0:
        raise ValueError("scene_count must be positive")
    target_rng = random.Random(base_seed)
    results: list[EstimatorError] = []
    for i in range(scene_count):
        target = coverage_target if coverage_target is not None else target_rng.uniform(0.0, 0.8)
        scene = generate_scene(base_seed + i, occluder_count, target, template)
        results.append(estimator_error(scene, config))
    confusion = evaluation.band_confusion(
        [OcclusionBand(r.estimated_band) for r in results],
        [OcclusionBand(r.exact_band) for r in results],
    )
    errors = [r.abs_error for r in results]
    return ExperimentStats(
        scene_count=scene_count,
        mean_abs_error=sum(errors) / len(errors),
        max_abs_error=max(errors),
        band_agreement_rate=confusion.agreement_rate(),
        confusion=confusion,
        results=tuple(results),
    )
