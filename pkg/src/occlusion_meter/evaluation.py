"""Aggregate statistics and table rendering for visibility reports."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .model import OcclusionBand, VisibilityReport

BAND_ORDER: tuple[OcclusionBand, ...] = (
    OcclusionBand.LOW_OR_NONE,
    OcclusionBand.PARTIAL,
    OcclusionBand.HEAVY,
    OcclusionBand.SEVERE,
)


def _pairwise_sum(values: Sequence[float], lo: int, hi: int) -> float:
    # Pairwise (cascade) summation keeps the mean stable for long inputs.
    if hi - lo <= 8:
        acc = 0.0
        for i in range(lo, hi):
            acc += values[i]
        return acc
    mid = (lo + hi) // 2
    return _pairwise_sum(values, lo, mid) + _pairwise_sum(values, mid, hi)


def pairwise_sum(values: Sequence[float]) -> float:
    return _pairwise_sum(values, 0, len(values))


@dataclass(frozen=True)
class ReportSummary:
    count: int
    visibility_min: float
    visibility_max: float
    visibility_mean: float
    occlusion_min: float
    occlusion_max: float

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "visibility_min": self.visibility_min,
            "visibility_max": self.visibility_max,
            "visibility_mean": self.visibility_mean,
            "occlusion_min": self.occlusion_min,
            "occlusion_max": self.occlusion_max,
        }


def summarize(reports: Sequence[VisibilityReport]) -> ReportSummary:
    """Extremes and mean over a non-empty report collection.

    Raises ValueError on an empty input rather than fabricating zeros.
    """
    if not reports:
        raise ValueError("cannot summarize an empty report list")
    visibilities = [r.visibility_pct for r in reports]
    occlusions = [r.occlusion_pct for r in reports]
    return ReportSummary(
        count=len(reports),
        visibility_min=min(visibilities),
        visibility_max=max(visibilities),
        visibility_mean=pairwise_sum(visibilities) / len(visibilities),
        occlusion_min=min(occlusions),
        occlusion_max=max(occlusions),
    )


def band_histogram(reports: Sequence[VisibilityReport]) -> dict[OcclusionBand, int]:
    """Report count per occlusion band; all four bands are always present."""
    counts = {band: 0 for band in BAND_ORDER}
    for report in reports:
        counts[report.band] += 1
    return counts


@dataclass(frozen=True)
class BandConfusion:
    """Band agreement matrix: rows are exact bands, columns estimated."""

    matrix: tuple[tuple[int, ...], ...]

    def total(self) -> int:
        return sum(sum(row) for row in self.matrix)

    def agreement_rate(self) -> float:
        total = self.total()
        if total == 0:
            return 1.0
        diagonal = sum(self.matrix[i][i] for i in range(len(BAND_ORDER)))
        return diagonal / total

    def row_totals(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.matrix)

    def col_totals(self) -> tuple[int, ...]:
        return tuple(sum(row[j] for row in self.matrix) for j in range(len(BAND_ORDER)))


def band_confusion(
    estimated: Sequence[OcclusionBand], exact: Sequence[OcclusionBand]
) -> BandConfusion:
    """Confusion matrix between estimated and exact bands, paired by index."""
    if len(estimated) != len(exact):
        raise ValueError(
            f"estimated and exact lists differ in length: {len(estimated)} vs {len(exact)}"
        )
    index = {band: i for i, band in enumerate(BAND_ORDER)}
    counts = [[0] * len(BAND_ORDER) for _ in BAND_ORDER]
    for est, ref in zip(estimated, exact):
        counts[index[ref]][index[est]] += 1
    return BandConfusion(matrix=tuple(tuple(row) for row in counts))


_TABLE_COLUMNS = (
    "Scenario",
    "Wheel (%)",
    "Frame (%)",
    "Handlebar (%)",
    "Bicycle Visibility (%)",
    "Bicycle Occlusion (%)",
)


def _table_rows(reports: Sequence[VisibilityReport]) -> list[list[str]]:
    rows = []
    for report in reports:
        scenario = report.image_id
        if report.bicycle_index > 0:
            scenario = f"{report.image_id}#{report.bicycle_index}"
        rows.append(
            [
                scenario,
                f"{report.wheel_pct:.1f}",
                f"{report.frame_pct:.1f}",
                f"{report.handlebar_pct:.1f}",
                f"{report.visibility_pct:.1f}",
                f"{report.occlusion_pct:.1f}",
            ]
        )
    return rows


def render_visibility_table(reports: Sequence[VisibilityReport], format: str = "markdown") -> str:
    """Per-bicycle visibility table, as markdown or CSV."""
    rows = _table_rows(reports)
    if format == "csv":
        lines = [",".join(_TABLE_COLUMNS)]
        lines.extend(",".join(row) for row in rows)
        return "\n".join(lines) + "\n"
    if format == "markdown":
        header = "| " + " | ".join(_TABLE_COLUMNS) + " |"
        divider = "|" + "|".join(" --- " for _ in _TABLE_COLUMNS) + "|"
        lines = [header, divider]
        lines.extend("| " + " | ".join(row) + " |" for row in rows)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format: {format!r} (expected 'markdown' or 'csv')")


def render_summary(summary: ReportSummary) -> str:
    """Stable plain-text rendering of a report summary."""
    return (
        f"count={summary.count}\n"
        f"visibility_min={summary.visibility_min:.2f}\n"
        f"visibility_max={summary.visibility_max:.2f}\n"
        f"visibility_mean={summary.visibility_mean:.2f}\n"
        f"occlusion_min={summary.occlusion_min:.2f}\n"
        f"occlusion_max={summary.occlusion_max:.2f}\n"
    )


def render_confusion(confusion: BandConfusion) -> str:
    """Stable plain-text rendering of a band confusion matrix."""
    labels = [band.value for band in BAND_ORDER]
    col = max(len(label) for label in labels)
    head = "exact \\ estimated"
    left = max(len(head), col) + 2
    lines = [head.ljust(left) + "  ".join(label.rjust(col) for label in labels)]
    for label, row in zip(labels, confusion.matrix):
        lines.append(label.ljust(left) + "  ".join(str(v).rjust(col) for v in row))
    return "\n".join(lines) + "\n"
