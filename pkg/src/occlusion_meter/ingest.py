"""Parsing of detector-output JSON and serialization of visibility reports.

The canonical input document mirrors the common detection-workflow export:

    {
      "image": {"id": "frame-001", "width": 640, "height": 640},
      "predictions": [
        {"class": "wheel", "confidence": 0.93,
         "x": 320, "y": 320, "width": 100, "height": 100,
         "points": [{"x": 270, "y": 270}, ...]}          # optional outline
      ]
    }

Prediction boxes are center-based (x, y, width, height). A corner-based
variant with x_min/y_min/x_max/y_max keys is accepted as well. Coordinates
are clamped to the image bounds, labels are case-folded and checked against
the closed part set, and the resulting frame is validated before it is
returned; parsing therefore never invents or silently mangles detections.

Report output comes in two shapes: a CSV table with one-decimal percentages
for human eyes, and a JSON array with full-precision numbers that
round-trips losslessly through ``reports_from_json``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Mapping, Sequence

from .model import (
    BoundingBox,
    DetectionFrame,
    FrameValidationError,
    OcclusionMeterError,
    PartClass,
    PartDetection,
    UnknownPartLabelError,
    VisibilityReport,
    validate_frame,
)

logger = logging.getLogger(__name__)

CSV_HEADER = [
    "image_id",
    "bicycle_index",
    "wheel_pct",
    "frame_pct",
    "handlebar_pct",
    "visibility_pct",
    "occlusion_pct",
    "band",
]

_CENTER_KEYS = ("x", "y", "width", "height")
_CORNER_KEYS = ("x_min", "y_min", "x_max", "y_max")


class ParseError(OcclusionMeterError):
    """A detection document could not be parsed.

    Attributes:
        path: location of the offending value inside the document, e.g.
            ``predictions[2].confidence``.
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _require(mapping: Mapping, key: str, path: str):
    if key not in mapping:
        raise ParseError(f"missing required field: {path}.{key}" if path else f"missing required field: {key}")
    return mapping[key]


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {value!r}", path)
    return float(value)


def _parse_prediction(pred, index: int, permissive: bool) -> PartDetection | None:
    path = f"predictions[{index}]"
    if not isinstance(pred, Mapping):
        raise ParseError("expected an object", path)

    label = _require(pred, "class", path)
    try:
        part = PartClass.from_label(label)
    except UnknownPartLabelError as exc:
        if permissive:
            logger.warning("dropping %s: %s", path, exc)
            return None
        raise ParseError(str(exc), f"{path}.class") from None

    confidence = _as_number(_require(pred, "confidence", path), f"{path}.confidence")
    if not 0.0 <= confidence <= 1.0:
        raise ParseError("confidence out of range", f"{path}.confidence")

    if all(k in pred for k in _CORNER_KEYS):
        bbox = BoundingBox(*(_as_number(pred[k], f"{path}.{k}") for k in _CORNER_KEYS))
    else:
        x, y, w, h = (_as_number(_require(pred, k, path), f"{path}.{k}") for k in _CENTER_KEYS)
        bbox = BoundingBox.from_center(x, y, w, h)

    polygon = None
    if "points" in pred and pred["points"] is not None:
        points = pred["points"]
        if not isinstance(points, Sequence) or isinstance(points, (str, bytes)):
            raise ParseError("expected an array of points", f"{path}.points")
        polygon = tuple(
            (
                _as_number(_require(pt, "x", f"{path}.points[{i}]"), f"{path}.points[{i}].x"),
                _as_number(_require(pt, "y", f"{path}.points[{i}]"), f"{path}.points[{i}].y"),
            )
            for i, pt in enumerate(points)
        )

    return PartDetection(part=part, bbox=bbox, confidence=confidence, polygon=polygon)


def parse_detections(document: bytes | str, *, permissive: bool = False) -> DetectionFrame:
    """Parse one detector-output document into a validated DetectionFrame.

    With ``permissive=True``, predictions with unknown labels or invalid
    geometry are dropped with a logged warning instead of failing the whole
    document; structural problems (malformed JSON, missing fields, numbers
    out of range) always raise.

    Raises:
        ParseError: naming the offending path inside the document.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(data, Mapping):
        raise ParseError("top level must be an object")

    image = _require(data, "image", "")
    if not isinstance(image, Mapping):
        raise ParseError("expected an object", "image")
    image_id = _require(image, "id", "image")
    if not isinstance(image_id, str):
        raise ParseError("image id must be a string", "image.id")
    width = _as_number(_require(image, "width", "image"), "image.width")
    height = _as_number(_require(image, "height", "image"), "image.height")
    if width <= 0 or height <= 0 or width != int(width) or height != int(height):
        raise ParseError("image dimensions must be positive integers", "image")

    predictions = _require(data, "predictions", "")
    if not isinstance(predictions, Sequence) or isinstance(predictions, (str, bytes)):
        raise ParseError("expected an array", "predictions")

    detections = []
    for index, pred in enumerate(predictions):
        det = _parse_prediction(pred, index, permissive)
        if det is not None:
            detections.append(det)

    frame = DetectionFrame(
        image_id=image_id,
        image_width=int(width),
        image_height=int(height),
        detections=tuple(detections),
    )
    try:
        return validate_frame(frame)
    except FrameValidationError as exc:
        if not permissive:
            raise ParseError("; ".join(exc.errors), "predictions") from None
        # Drop invalid detections one by one, keeping the rest.
        kept = []
        for index, det in enumerate(detections):
            probe = DetectionFrame(image_id, int(width), int(height), (det,))
            try:
                kept.extend(validate_frame(probe).detections)
            except FrameValidationError as det_exc:
                logger.warning("dropping predictions[%d]: %s", index, "; ".join(det_exc.errors))
        return DetectionFrame(image_id, int(width), int(height), tuple(kept))


def load_detections(path: str | Path, *, permissive: bool = False) -> DetectionFrame:
    """Read and parse a detector-output JSON file."""
    return parse_detections(Path(path).read_bytes(), permissive=permissive)


def reports_to_csv(reports: Sequence[VisibilityReport]) -> str:
    """Render reports as a CSV table with one-decimal percentages."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(CSV_HEADER)
    for report in reports:
        writer.writerow(
            [
                report.image_id,
                report.bicycle_index,
                f"{report.wheel_pct:.1f}",
                f"{report.frame_pct:.1f}",
                f"{report.handlebar_pct:.1f}",
                f"{report.visibility_pct:.1f}",
                f"{report.occlusion_pct:.1f}",
                report.band.value,
            ]
        )
    return buffer.getvalue()


def reports_to_json(reports: Sequence[VisibilityReport]) -> str:
    """Render reports as a JSON array with full-precision numbers."""
    return json.dumps([report.to_dict() for report in reports], indent=2)


def reports_from_json(document: bytes | str) -> list[VisibilityReport]:
    """Inverse of ``reports_to_json``; reproduces the original reports exactly."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(data, Sequence) or isinstance(data, (str, bytes)):
        raise ParseError("top level must be an array of report objects")
    return [VisibilityReport.from_dict(item) for item in data]


def write_reports(reports: Sequence[VisibilityReport], format: str = "csv") -> str:
    """Serialize reports to the requested output document format."""
    if format == "csv":
        return reports_to_csv(reports)
    if format == "json":
        return reports_to_json(reports)
    raise ValueError(f"unknown report format: {format!r} (expected 'csv' or 'json')")
