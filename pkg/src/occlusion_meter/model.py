"""Domain types for parts-based bicycle visibility estimation.

This module holds the data model shared by the rest of the package:
detected bicycle parts and their bounding boxes, the reference surface-area
allocation that turns detected parts into visibility percentages, the
per-bicycle visibility report, and the classifier configuration.

Detector output arrives from the outside world, so the detection-side types
(``BoundingBox``, ``PartDetection``, ``DetectionFrame``) are passive records:
they do not raise on construction. ``validate_frame`` is the single
enforcement point and reports *every* problem in a frame with the index of
the offending detection, which is far more useful for batch pipelines than
failing on the first bad field. Configuration types (``SurfaceAreaModel``,
``ClassifierConfig``) are built by humans, so they validate eagerly.

All types are immutable after construction and safe to share across workers.
No raster data is ever stored here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Mapping, Sequence

Point = tuple[float, float]

# Maximum per-coordinate disagreement between a detection's polygon extent
# and its bounding box.
POLYGON_BBOX_TOLERANCE = 0.5


class OcclusionMeterError(Exception):
    """Base class for all errors raised by this package."""


class UnknownPartLabelError(OcclusionMeterError):
    """A detection label does not name one of the known bicycle parts."""


class FrameValidationError(OcclusionMeterError):
    """One or more detections in a frame violate the frame invariants.

    Attributes:
        errors: one message per violation, each naming the detection index
            it refers to where applicable.
    """

    def __init__(self, errors: Sequence[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class PartClass(str, Enum):
    """The three detectable semantic bicycle parts.

    The enumeration is closed: labels outside this set are rejected at
    ingestion rather than silently mapped to a nearby class.
    """

    WHEEL = "wheel"
    FRAME = "frame"
    HANDLEBAR = "handlebar"

    @classmethod
    def from_label(cls, label: str) -> "PartClass":
        """Map a raw detector label (any casing, padded) to a part class."""
        normalized = str(label).strip().lower()
        try:
            return cls(normalized)
        except ValueError:
            raise UnknownPartLabelError(f"unknown part label: {label}") from None


class OcclusionBand(str, Enum):
    """Categorical occlusion bucket derived from the occlusion percentage."""

    LOW_OR_NONE = "low_or_none"
    PARTIAL = "partial"
    HEAVY = "heavy"
    SEVERE = "severe"

    @classmethod
    def from_label(cls, label: str) -> "OcclusionBand":
        normalized = str(label).strip().lower()
        try:
            return cls(normalized)
        except ValueError:
            raise ValueError(f"unknown occlusion band: {label}") from None


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in image pixel coordinates, corner based.

    Center-based detector outputs are converted via :meth:`from_center` at
    ingestion. Validity (strictly positive width and height) is established
    by ``validate_frame`` so malformed detector output can be reported with
    per-detection indices instead of failing construction.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @classmethod
    def from_center(cls, x: float, y: float, width: float, height: float) -> "BoundingBox":
        """Build a corner-based box from a center point and extents."""
        half_w = width / 2.0
        half_h = height / 2.0
        return cls(x - half_w, y - half_h, x + half_w, y + half_h)

    def width(self) -> float:
        return self.x_max - self.x_min

    def height(self) -> float:
        return self.y_max - self.y_min

    def is_valid(self) -> bool:
        return self.width() > 0 and self.height() > 0

    def area(self) -> float:
        return max(self.width(), 0.0) * max(self.height(), 0.0)

    def diagonal(self) -> float:
        return math.hypot(self.width(), self.height())

    def aspect_ratio(self) -> float:
        """Ratio of the shorter to the longer side, in (0, 1]."""
        w = self.width()
        h = self.height()
        if w <= 0 or h <= 0:
            raise ValueError("aspect ratio is undefined for a degenerate box")
        return min(w, h) / max(w, h)

    def gap_to(self, other: "BoundingBox") -> float:
        """Euclidean separation between two boxes; 0.0 when they touch or overlap."""
        dx = max(other.x_min - self.x_max, self.x_min - other.x_max, 0.0)
        dy = max(other.y_min - self.y_max, self.y_min - other.y_max, 0.0)
        return math.hypot(dx, dy)

    def clamped(self, image_width: float, image_height: float) -> "BoundingBox":
        """Clamp all coordinates into [0, image_width] x [0, image_height]."""
        return BoundingBox(
            min(max(self.x_min, 0.0), float(image_width)),
            min(max(self.y_min, 0.0), float(image_height)),
            min(max(self.x_max, 0.0), float(image_width)),
            min(max(self.y_max, 0.0), float(image_height)),
        )


@dataclass(frozen=True)
class PartDetection:
    """One detected semantic bicycle part.

    Attributes:
        part: which semantic part was detected.
        bbox: pixel bounding box of the detection.
        confidence: detector confidence in [0, 1].
        polygon: optional instance-segmentation outline in pixels. When
            present it must have at least 3 vertices and its extent must
            agree with ``bbox`` within ``POLYGON_BBOX_TOLERANCE`` per
            coordinate (checked by ``validate_frame``).
    """

    part: PartClass
    bbox: BoundingBox
    confidence: float
    polygon: tuple[Point, ...] | None = None


@dataclass(frozen=True)
class DetectionFrame:
    """All part detections for one image, plus the image geometry."""

    image_id: str
    image_width: int
    image_height: int
    detections: tuple[PartDetection, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "detections", tuple(self.detections))

    def __len__(self) -> int:
        return len(self.detections)

    def __iter__(self) -> Iterator[PartDetection]:
        return iter(self.detections)


@dataclass(frozen=True)
class SurfaceAreaModel:
    """Reference physical areas and percentage shares per bicycle part.

    The physical areas (cm^2) document where the percentage shares come
    from; the rounded shares are what the classifier actually uses, because
    only the rounded values make the per-part contributions sum to exactly
    100 for a fully visible bicycle (2 wheels + frame + handlebar =
    41 + 41 + 17 + 1).
    """

    wheel_area_cm2: float = 3400.0
    frame_area_cm2: float = 1454.0
    handlebar_area_cm2: float = 110.0
    total_area_cm2: float = 8364.0
    wheel_share_pct: float = 41.0
    frame_share_pct: float = 17.0
    handlebar_share_pct: float = 1.0

    def __post_init__(self) -> None:
        expected_total = 2 * self.wheel_area_cm2 + self.frame_area_cm2 + self.handlebar_area_cm2
        if not math.isclose(self.total_area_cm2, expected_total, rel_tol=0, abs_tol=1e-6):
            raise ValueError(
                f"total_area_cm2 must equal 2*wheel + frame + handlebar "
                f"({expected_total}), got {self.total_area_cm2}"
            )
        share_sum = 2 * self.wheel_share_pct + self.frame_share_pct + self.handlebar_share_pct
        if not math.isclose(share_sum, 100.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"part shares must sum to 100.0, got {share_sum}")

    def share_pct(self, part: PartClass) -> float:
        """Percentage of total bicycle surface attributed to one part instance."""
        if part is PartClass.WHEEL:
            return self.wheel_share_pct
        if part is PartClass.FRAME:
            return self.frame_share_pct
        return self.handlebar_share_pct

    def to_dict(self) -> dict:
        return {
            "wheel_area_cm2": self.wheel_area_cm2,
            "frame_area_cm2": self.frame_area_cm2,
            "handlebar_area_cm2": self.handlebar_area_cm2,
            "total_area_cm2": self.total_area_cm2,
            "wheel_share_pct": self.wheel_share_pct,
            "frame_share_pct": self.frame_share_pct,
            "handlebar_share_pct": self.handlebar_share_pct,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SurfaceAreaModel":
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown area model fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


# Descending (ratio_threshold, fraction) pairs for the wheel aspect-ratio
# rule. The last threshold is 0.0 so the rule is total on (0, 1].
DEFAULT_WHEEL_FRACTIONS: tuple[tuple[float, float], ...] = (
    (0.85, 1.0),
    (0.60, 0.7),
    (0.45, 0.5),
    (0.0, 0.4),
)


@dataclass(frozen=True)
class ClassifierConfig:
    """Tunable parameters of the visibility classifier.

    Attributes:
        confidence_threshold: detections below this confidence are ignored.
        wheel_fractions: descending (ratio_threshold, fraction) pairs; a
            wheel whose bbox aspect ratio is >= a threshold gets that
            threshold's fraction of the wheel share. Thresholds and
            fractions must both be strictly decreasing, the last threshold
            must be 0.0, and the first fraction must be 1.0.
        detectability_floor: minimum visible fraction below which the
            synthetic-oracle detector emits nothing (oracle only).
        grouping_distance_factor: multiple of the largest wheel bbox
            diagonal used as the linking distance when clustering parts
            into bicycle instances.
        area_model: the surface-area shares used for contributions.
    """

    confidence_threshold: float = 0.5
    wheel_fractions: tuple[tuple[float, float], ...] = DEFAULT_WHEEL_FRACTIONS
    detectability_floor: float = 0.10
    grouping_distance_factor: float = 1.5
    area_model: SurfaceAreaModel = field(default_factory=SurfaceAreaModel)

    def __post_init__(self) -> None:
        pairs = tuple((float(t), float(f)) for t, f in self.wheel_fractions)
        object.__setattr__(self, "wheel_fractions", pairs)
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError(f"confidence_threshold must be in [0, 1], got {self.confidence_threshold}")
        if not pairs:
            raise ValueError("wheel_fractions must not be empty")
        thresholds = [t for t, _ in pairs]
        fractions = [f for _, f in pairs]
        if any(b >= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"ratio thresholds must be strictly decreasing, got {thresholds}")
        if any(b >= a for a, b in zip(fractions, fractions[1:])):
            raise ValueError(f"fractions must be strictly decreasing, got {fractions}")
        if thresholds[-1] != 0.0:
            raise ValueError("last ratio threshold must be 0.0 so the rule is total")
        if fractions[0] != 1.0:
            raise ValueError("first fraction must be 1.0")
        if any(not 0.0 < f <= 1.0 for f in fractions):
            raise ValueError("all fractions must be in (0, 1]")
        if any(not 0.0 <= t <= 1.0 for t in thresholds):
            raise ValueError("all ratio thresholds must be in [0, 1]")
        if not self.grouping_distance_factor > 0:
            raise ValueError("grouping_distance_factor must be positive")

    def to_dict(self) -> dict:
        return {
            "confidence_threshold": self.confidence_threshold,
            "wheel_fractions": [list(pair) for pair in self.wheel_fractions],
            "detectability_floor": self.detectability_floor,
            "grouping_distance_factor": self.grouping_distance_factor,
            "area_model": self.area_model.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ClassifierConfig":
        """Build a config from a plain mapping; missing fields keep defaults."""
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        kwargs: dict = {}
        if "confidence_threshold" in data:
            kwargs["confidence_threshold"] = float(data["confidence_threshold"])
        if "wheel_fractions" in data:
            kwargs["wheel_fractions"] = tuple(
                (float(t), float(f)) for t, f in data["wheel_fractions"]
            )
        if "detectability_floor" in data:
            kwargs["detectability_floor"] = float(data["detectability_floor"])
        if "grouping_distance_factor" in data:
            kwargs["grouping_distance_factor"] = float(data["grouping_distance_factor"])
        if "area_model" in data:
            kwargs["area_model"] = SurfaceAreaModel.from_dict(data["area_model"])
        return cls(**kwargs)


_MAX_CONTRIBUTIONS = {PartClass.WHEEL: 2, PartClass.FRAME: 1, PartClass.HANDLEBAR: 1}


@dataclass(frozen=True)
class VisibilityReport:
    """Per-bicycle visibility result.

    ``visibility_pct`` is the clamped sum of all part contributions and
    ``occlusion_pct`` is defined by subtraction from 100, so the two always
    sum to 100 exactly.
    """

    image_id: str
    bicycle_index: int
    part_contributions: Mapping[PartClass, tuple[float, ...]]
    visibility_pct: float
    occlusion_pct: float
    band: OcclusionBand

    def __post_init__(self) -> None:
        contributions = {
            part: tuple(float(v) for v in self.part_contributions.get(part, ()))
            for part in PartClass
        }
        object.__setattr__(self, "part_contributions", contributions)
        if self.bicycle_index < 0:
            raise ValueError("bicycle_index must be non-negative")
        for part, values in contributions.items():
            if len(values) > _MAX_CONTRIBUTIONS[part]:
                raise ValueError(
                    f"too many {part.value} contributions: {len(values)} "
                    f"(max {_MAX_CONTRIBUTIONS[part]})"
                )
        if not 0.0 <= self.visibility_pct <= 100.0:
            raise ValueError(f"visibility_pct out of [0, 100]: {self.visibility_pct}")
        if abs(self.visibility_pct + self.occlusion_pct - 100.0) > 1e-9:
            raise ValueError(
                f"visibility + occlusion must equal 100, got "
                f"{self.visibility_pct} + {self.occlusion_pct}"
            )

    @property
    def wheel_pct(self) -> float:
        return sum(self.part_contributions[PartClass.WHEEL])

    @property
    def frame_pct(self) -> float:
        return sum(self.part_contributions[PartClass.FRAME])

    @property
    def handlebar_pct(self) -> float:
        return sum(self.part_contributions[PartClass.HANDLEBAR])

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "bicycle_index": self.bicycle_index,
            "part_contributions": {
                part.value: list(values) for part, values in self.part_contributions.items()
            },
            "visibility_pct": self.visibility_pct,
            "occlusion_pct": self.occlusion_pct,
            "band": self.band.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "VisibilityReport":
        contributions = {
            PartClass(key): tuple(values)
            for key, values in data["part_contributions"].items()
        }
        return cls(
            image_id=data["image_id"],
            bicycle_index=int(data["bicycle_index"]),
            part_contributions=contributions,
            visibility_pct=float(data["visibility_pct"]),
            occlusion_pct=float(data["occlusion_pct"]),
            band=OcclusionBand.from_label(data["band"]),
        )


def validate_frame(frame: DetectionFrame) -> DetectionFrame:
    """Validate a detection frame and normalize it to image bounds.

    Returns a new frame with every bbox (and polygon, when present) clamped
    into the image rectangle. Collects *all* violations before failing so a
    bad batch reports every problem at once.

    Raises:
        FrameValidationError: listing one message per violation, each naming
            the index of the offending detection.
    """
    errors: list[str] = []
    if frame.image_width <= 0 or frame.image_height <= 0:
        raise FrameValidationError(
            [f"non-positive image dimensions: {frame.image_width}x{frame.image_height}"]
        )

    normalized: list[PartDetection] = []
    for index, det in enumerate(frame.detections):
        part = det.part
        if not isinstance(part, PartClass):
            try:
                part = PartClass.from_label(part)
            except UnknownPartLabelError as exc:
                errors.append(str(exc))
                continue

        bbox = det.bbox.clamped(frame.image_width, frame.image_height)
        if bbox.width() <= 0:
            errors.append(f"zero-width bbox at index {index}")
            continue
        if bbox.height() <= 0:
            errors.append(f"zero-height bbox at index {index}")
            continue

        if not 0.0 <= det.confidence <= 1.0:
            errors.append(f"confidence out of range at index {index}: {det.confidence}")
            continue

        polygon = det.polygon
        if polygon is not None:
            if len(polygon) < 3:
                errors.append(f"polygon with fewer than 3 vertices at index {index}")
                continue
            polygon = tuple(
                (
                    min(max(float(x), 0.0), float(frame.image_width)),
                    min(max(float(y), 0.0), float(frame.image_height)),
                )
                for x, y in polygon
            )
            px_min = min(p[0] for p in polygon)
            py_min = min(p[1] for p in polygon)
            px_max = max(p[0] for p in polygon)
            py_max = max(p[1] for p in polygon)
            deviation = max(
                abs(px_min - bbox.x_min),
                abs(py_min - bbox.y_min),
                abs(px_max - bbox.x_max),
                abs(py_max - bbox.y_max),
            )
            if deviation > POLYGON_BBOX_TOLERANCE:
                errors.append(
                    f"polygon extent disagrees with bbox at index {index} "
                    f"(off by {deviation:.2f} px)"
                )
                continue

        normalized.append(replace(det, part=part, bbox=bbox, polygon=polygon))

    if errors:
        raise FrameValidationError(errors)
    return replace(frame, detections=tuple(normalized))
