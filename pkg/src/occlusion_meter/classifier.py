"""Bicycle visibility classification from part detections.

Pipeline: filter detections by confidence, cluster parts into bicycle
instances, score each part against the surface-area shares (wheels get an
aspect-ratio-dependent fraction of their share), sum the contributions into
a visibility percentage, and derive the occlusion percentage and categorical
band by subtraction.

Everything here is a pure, deterministic function of (frame, config);
frames can be classified concurrently with no shared state.
"""

from __future__ import annotations

import itertools
from dataclasses import replace
from typing import Sequence

from .model import (
    BoundingBox,
    ClassifierConfig,
    DetectionFrame,
    OcclusionBand,
    OcclusionMeterError,
    PartClass,
    PartDetection,
    VisibilityReport,
    validate_frame,
)

PartGroup = tuple[PartDetection, ...]

# How many detections of each class a single bicycle instance may keep.
_GROUP_LIMITS = {PartClass.WHEEL: 2, PartClass.FRAME: 1, PartClass.HANDLEBAR: 1}


class CalibrationError(OcclusionMeterError):
    """Threshold calibration is infeasible for the given labels."""


def wheel_visibility_fraction(bbox: BoundingBox, config: ClassifierConfig) -> float:
    """Quantized visibility fraction for a wheel from its bbox aspect ratio.

    A fully visible, squarely viewed wheel has a near-square bbox (ratio
    close to 1); occlusion or an oblique view shrinks one bbox dimension and
    lowers the ratio. The ratio is matched against the configured descending
    thresholds; the first threshold at or below the ratio decides the
    fraction. The config invariant (last threshold 0.0) makes this total.
    """
    ratio = bbox.aspect_ratio()
    for threshold, fraction in config.wheel_fractions:
        if ratio >= threshold:
            return fraction
    raise AssertionError("unreachable: wheel_fractions ends with threshold 0.0")


def part_visibility(detection: PartDetection, config: ClassifierConfig) -> float:
    """Visibility contribution of one detected part, in percent of the bicycle.

    Frames and handlebars contribute their full share whenever detected;
    wheels contribute their share scaled by the aspect-ratio fraction.
    """
    share = config.area_model.share_pct(detection.part)
    if detection.part is PartClass.WHEEL:
        return share * wheel_visibility_fraction(detection.bbox, config)
    return share


def _bbox_gap(a: PartDetection, b: PartDetection) -> float:
    return a.bbox.gap_to(b.bbox)


def _prune_group(members: list[tuple[int, PartDetection]]) -> PartGroup:
    # Keep the per-class limits, preferring higher confidence, then larger
    # bbox area, then lower detection index; output stays in detection order.
    kept: list[tuple[int, PartDetection]] = []
    for part in PartClass:
        candidates = [(i, d) for i, d in members if d.part is part]
        candidates.sort(key=lambda item: (-item[1].confidence, -item[1].bbox.area(), item[0]))
        kept.extend(candidates[: _GROUP_LIMITS[part]])
    kept.sort(key=lambda item: item[0])
    return tuple(d for _, d in kept)


def group_parts(frame: DetectionFrame, config: ClassifierConfig) -> list[PartGroup]:
    """Cluster part detections into bicycle instances.

    Single-link clustering: two parts join when the gap between their boxes
    is at most ``grouping_distance_factor`` times the largest wheel bbox
    diagonal in the frame (largest diagonal of any part when no wheel was
    detected). Each cluster is then pruned to at most 2 wheels, 1 frame and
    1 handlebar. Groups are ordered by their first detection index.

    This assignment step is a heuristic for multi-bicycle frames; the
    visibility scoring itself is independent of it.
    """
    detections = list(frame.detections)
    if not detections:
        return []
    wheel_diagonals = [d.bbox.diagonal() for d in detections if d.part is PartClass.WHEEL]
    reference = max(wheel_diagonals) if wheel_diagonals else max(d.bbox.diagonal() for d in detections)
    limit = config.grouping_distance_factor * reference

    parent = list(range(len(detections)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(detections)):
        for j in range(i + 1, len(detections)):
            if _bbox_gap(detections[i], detections[j]) <= limit:
                parent[find(i)] = find(j)

    clusters: dict[int, list[tuple[int, PartDetection]]] = {}
    for i, det in enumerate(detections):
        clusters.setdefault(find(i), []).append((i, det))

    ordered = sorted(clusters.values(), key=lambda members: members[0][0])
    return [_prune_group(members) for members in ordered]


def occlusion_band(occlusion_pct: float) -> OcclusionBand:
    """Categorical occlusion bucket for an occlusion percentage.

    Boundaries: [0, 10) low/none, [10, 40) partial, [40, 80] heavy,
    (80, 100] severe.
    """
    if not 0.0 <= occlusion_pct <= 100.0:
        raise ValueError(f"occlusion percentage out of [0, 100]: {occlusion_pct}")
    if occlusion_pct < 10.0:
        return OcclusionBand.LOW_OR_NONE
    if occlusion_pct < 40.0:
        return OcclusionBand.PARTIAL
    if occlusion_pct <= 80.0:
        return OcclusionBand.HEAVY
    return OcclusionBand.SEVERE


def classify_bicycle(
    parts: Sequence[PartDetection],
    config: ClassifierConfig,
    *,
    image_id: str = "",
    bicycle_index: int = 0,
) -> VisibilityReport:
    """Visibility report for one pruned part group.

    Visibility is the sum of the group's part contributions clamped to
    [0, 100]; occlusion is 100 minus visibility, so missing parts count as
    fully occluded. An empty group yields visibility 0 / occlusion 100.
    """
    contributions: dict[PartClass, list[float]] = {part: [] for part in PartClass}
    for det in parts:
        contributions[det.part].append(part_visibility(det, config))
    visibility = sum(itertools.chain.from_iterable(contributions.values()))
    visibility = min(max(visibility, 0.0), 100.0)
    occlusion = 100.0 - visibility
    return VisibilityReport(
        image_id=image_id,
        bicycle_index=bicycle_index,
        part_contributions={part: tuple(values) for part, values in contributions.items()},
        visibility_pct=visibility,
        occlusion_pct=occlusion,
        band=occlusion_band(occlusion),
    )


def classify_frame(frame: DetectionFrame, config: ClassifierConfig | None = None) -> list[VisibilityReport]:
    """Classify every bicycle instance in a detection frame.

    The frame is validated and normalized first, detections below the
    confidence threshold are dropped, survivors are grouped into bicycle
    instances, and each group is classified. Reports come back ordered by
    descending visibility, ties broken by bicycle index.
    """
    config = config or ClassifierConfig()
    frame = validate_frame(frame)
    surviving = tuple(d for d in frame.detections if d.confidence >= config.confidence_threshold)
    filtered = replace(frame, detections=surviving)
    groups = group_parts(filtered, config)
    reports = [
        classify_bicycle(group, config, image_id=frame.image_id, bicycle_index=index)
        for index, group in enumerate(groups)
    ]
    reports.sort(key=lambda r: (-r.visibility_pct, r.bicycle_index))
    return reports


def calibrate_thresholds(
    labeled: Sequence[tuple[BoundingBox, float]],
    grid_step: float = 0.01,
    *,
    base_config: ClassifierConfig | None = None,
) -> ClassifierConfig:
    """Recover wheel ratio thresholds from labeled bounding boxes.

    Each label pairs a bbox with the visibility fraction it should receive,
    drawn from the fixed fraction set {1.0, 0.7, 0.5, 0.4}. The three free
    thresholds (the fourth is pinned at 0.0) are grid-searched at
    ``grid_step`` resolution, minimizing the number of misclassified labels;
    ties are broken by the largest margin (summed distance from each label's
    ratio to its nearest threshold), then by the lexicographically smallest
    threshold triple. Cost grows cubically in 1/grid_step; steps below
    0.005 get slow.

    Raises:
        CalibrationError: when a ratio carries two different expected
            fractions, or an expected fraction is outside the fraction set.
    """
    base = base_config or ClassifierConfig()
    fractions = tuple(f for _, f in base.wheel_fractions)
    if len(fractions) != 4:
        raise CalibrationError(f"calibration requires exactly 4 fractions, got {len(fractions)}")
    if not 0.0 < grid_step < 0.5:
        raise ValueError(f"grid_step must be in (0, 0.5), got {grid_step}")
    if not labeled:
        raise CalibrationError("no labeled examples provided")

    ratios: list[float] = []
    expected: list[float] = []
    by_ratio: dict[float, float] = {}
    conflicts: list[str] = []
    for bbox, fraction in labeled:
        if fraction not in fractions:
            raise CalibrationError(
                f"expected fraction {fraction} is not one of the configured fractions {fractions}"
            )
        ratio = bbox.aspect_ratio()
        if ratio in by_ratio and by_ratio[ratio] != fraction:
            conflicts.append(
                f"ratio {ratio:.6g} labeled both {by_ratio[ratio]} and {fraction}"
            )
            continue
        by_ratio[ratio] = fraction
        ratios.append(ratio)
        expected.append(fraction)
    if conflicts:
        raise CalibrationError("conflicting labels: " + "; ".join(conflicts))

    # Candidate threshold values; rounding snaps i*grid_step onto the
    # canonical double for the decimal value so exact-ratio labels land on
    # the grid.
    count = int(round(1.0 / grid_step))
    grid = [round(i * grid_step, 12) for i in range(1, count + 1) if round(i * grid_step, 12) <= 1.0]
    n = len(grid)
    if n < 3:
        raise ValueError("grid_step too coarse: fewer than 3 candidate thresholds")

    # The misclassification count decomposes per threshold. With label
    # classes f1 > f2 > f3 > f4 and prefix counts F_k(t) = #{class-k labels
    # with ratio < t}, the number of correct labels is
    #   a(t1) + b(t2) + c(t3)
    # where a(t) = #{f1: ratio >= t} + F2(t), b(t) = F3(t) - F2(t),
    # c(t) = F4(t) - F3(t).
    f1, f2, f3, f4 = fractions

    def below(fraction: float, t: float) -> int:
        return sum(1 for r, e in zip(ratios, expected) if e == fraction and r < t)

    def at_or_above(fraction: float, t: float) -> int:
        return sum(1 for r, e in zip(ratios, expected) if e == fraction and r >= t)

    a = [at_or_above(f1, t) + below(f2, t) for t in grid]
    b = [below(f3, t) - below(f2, t) for t in grid]
    c = [below(f4, t) - below(f3, t) for t in grid]

    best_correct = -1
    for i1 in range(2, n):
        a1 = a[i1]
        for i2 in range(1, i1):
            ab = a1 + b[i2]
            for i3 in range(i2):
                score = ab + c[i3]
                if score > best_correct:
                    best_correct = score

    def margin(t1: float, t2: float, t3: float) -> float:
        return sum(min(abs(r - t1), abs(r - t2), abs(r - t3)) for r in ratios)

    best: tuple[float, float, float] | None = None
    best_margin = -1.0
    for i1 in range(2, n):
        for i2 in range(1, i1):
            partial = a[i1] + b[i2]
            for i3 in range(i2):
                if partial + c[i3] != best_correct:
                    continue
                triple = (grid[i1], grid[i2], grid[i3])
                m = margin(*triple)
                if m > best_margin or (m == best_margin and best is not None and triple < best):
                    best = triple
                    best_margin = m
    assert best is not None
    t1, t2, t3 = best
    return replace(
        base,
        wheel_fractions=((t1, f1), (t2, f2), (t3, f3), (0.0, f4)),
    )
