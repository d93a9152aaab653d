"""Shared fixtures and independent oracles for the test suite.

The Monte Carlo containment code here is written independently of the
package's geometry kernel on purpose: it is the oracle the clipping path is
checked against.
"""

from __future__ import annotations

import random
from pathlib import Path

import numpy as np
import pytest

from occlusion_meter import classify_frame, load_detections
from occlusion_meter.model import BoundingBox, DetectionFrame, PartClass, PartDetection

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures" / "scenarios"

# Expected (visibility, occlusion) per scenario fixture.
EXPECTED_SCENARIOS = {
    "scenario_a": (87.7, 12.3),
    "scenario_b": (79.5, 20.5),
    "scenario_c": (75.4, 24.6),
    "scenario_d": (20.5, 79.5),
    "scenario_e": (100.0, 0.0),
    "scenario_f": (100.0, 0.0),
    "scenario_g": (87.7, 12.3),
    "scenario_h": (78.5, 21.5),
    "scenario_i": (42.0, 58.0),
}


@pytest.fixture(scope="session")
def scenario_frames():
    frames = [load_detections(path) for path in sorted(FIXTURE_DIR.glob("*.json"))]
    assert len(frames) == len(EXPECTED_SCENARIOS)
    return frames


@pytest.fixture(scope="session")
def scenario_reports(scenario_frames):
    reports = []
    for frame in scenario_frames:
        frame_reports = classify_frame(frame)
        assert len(frame_reports) == 1
        reports.extend(frame_reports)
    return reports


# ---------------------------------------------------------------------------
# Independent geometry oracles
# ---------------------------------------------------------------------------


def convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Andrew monotone chain; output is counter-clockwise without repeats."""
    pts = sorted(set(points))
    if len(pts) < 3:
        return pts

    def half(seq):
        chain: list[tuple[float, float]] = []
        for p in seq:
            while len(chain) >= 2:
                (x1, y1), (x2, y2) = chain[-2], chain[-1]
                if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(reversed(pts))
    return lower[:-1] + upper[:-1]


def random_convex_vertices(rng: random.Random, center=(0.0, 0.0), spread=1.0, n_points=10):
    """Convex polygon as the hull of random points; retries until non-degenerate."""
    cx, cy = center
    while True:
        pts = [
            (cx + rng.uniform(-spread, spread), cy + rng.uniform(-spread, spread))
            for _ in range(n_points)
        ]
        hull = convex_hull(pts)
        if len(hull) >= 3:
            return hull


def mc_points_in_polygon(vertices, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Crossing-number containment, written independently of the package."""
    inside = np.zeros(xs.shape, dtype=bool)
    n = len(vertices)
    j = n - 1
    for i in range(n):
        xi, yi = vertices[i]
        xj, yj = vertices[j]
        if yi != yj:
            crosses = (yi > ys) != (yj > ys)
            x_at = (xj - xi) * (ys - yi) / (yj - yi) + xi
            inside ^= crosses & (xs < x_at)
        j = i
    return inside


def mc_intersection_area(subject_vertices, window_vertices, samples: int, seed: int) -> float:
    """Monte Carlo estimate of area(subject intersect window)."""
    rng = np.random.default_rng(seed)
    xs_s = [p[0] for p in subject_vertices] + [p[0] for p in window_vertices]
    ys_s = [p[1] for p in subject_vertices] + [p[1] for p in window_vertices]
    x0, x1 = min(xs_s), max(xs_s)
    y0, y1 = min(ys_s), max(ys_s)
    xs = rng.uniform(x0, x1, samples)
    ys = rng.uniform(y0, y1, samples)
    hits = mc_points_in_polygon(subject_vertices, xs, ys) & mc_points_in_polygon(window_vertices, xs, ys)
    return (x1 - x0) * (y1 - y0) * float(hits.sum()) / samples


def mc_visible_area(part_vertices, occluder_vertex_lists, samples: int, seed: int) -> float:
    """Monte Carlo estimate of area(part minus union of occluders)."""
    rng = np.random.default_rng(seed)
    xs_s = [p[0] for p in part_vertices]
    ys_s = [p[1] for p in part_vertices]
    x0, x1 = min(xs_s), max(xs_s)
    y0, y1 = min(ys_s), max(ys_s)
    xs = rng.uniform(x0, x1, samples)
    ys = rng.uniform(y0, y1, samples)
    visible = mc_points_in_polygon(part_vertices, xs, ys)
    for occ in occluder_vertex_lists:
        visible &= ~mc_points_in_polygon(occ, xs, ys)
    return (x1 - x0) * (y1 - y0) * float(visible.sum()) / samples


# ---------------------------------------------------------------------------
# Random detection frames
# ---------------------------------------------------------------------------


def random_detection(rng: random.Random, part: PartClass | None = None) -> PartDetection:
    part = part or rng.choice(list(PartClass))
    x0 = rng.uniform(0.0, 500.0)
    y0 = rng.uniform(0.0, 500.0)
    w = rng.uniform(2.0, 640.0 - x0)
    h = rng.uniform(2.0, 640.0 - y0)
    return PartDetection(
        part=part,
        bbox=BoundingBox(x0, y0, x0 + w, y0 + h),
        confidence=rng.uniform(0.0, 1.0),
    )


def random_frame(rng: random.Random, max_parts: int = 8, image_id: str = "random") -> DetectionFrame:
    count = rng.randint(0, max_parts)
    return DetectionFrame(
        image_id=image_id,
        image_width=640,
        image_height=640,
        detections=tuple(random_detection(rng) for _ in range(count)),
    )
