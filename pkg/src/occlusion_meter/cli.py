"""Command-line front end: classify, batch, synth, calibrate."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .classifier import calibrate_thresholds, classify_frame
from .evaluation import render_confusion, render_summary, summarize
from .ingest import ParseError, parse_detections, write_reports
from .model import BoundingBox, ClassifierConfig, OcclusionMeterError
from .synthetic import run_batch

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2

CONFIG_ENV_VAR = "OCCLUSION_METER_CONFIG"


def _load_config(args: argparse.Namespace) -> ClassifierConfig:
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    if path:
        with open(path, "r", encoding="utf-8") as handle:
            config = ClassifierConfig.from_dict(json.load(handle))
    else:
        config = ClassifierConfig()
    threshold = getattr(args, "confidence_threshold", None)
    if threshold is not None:
        from dataclasses import replace

        config = replace(config, confidence_threshold=threshold)
    return config


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_file(path: Path, permissive: bool):
    try:
        return parse_detections(path.read_bytes(), permissive=permissive)
    except ParseError as exc:
        raise ParseError(str(exc), path=str(path)) from None


def _cmd_classify(args: argparse.Namespace) -> int:
    config = _load_config(args)
    frame = _parse_file(Path(args.input), args.permissive)
    reports = classify_frame(frame, config)
    if not reports:
        print(f"warning: no detections above the confidence threshold in {args.input}", file=sys.stderr)
    _emit(write_reports(reports, args.format), args.out)
    return EXIT_OK


def _cmd_batch(args: argparse.Namespace) -> int:
    config = _load_config(args)
    files = sorted(Path(args.dir).glob("*.json"))
    if not files:
        print(f"warning: no *.json files under {args.dir}", file=sys.stderr)
    reports = []
    for path in files:
        frame = _parse_file(path, args.permissive)
        reports.extend(classify_frame(frame, config))
    if args.format == "json":
        payload = {
            "reports": [r.to_dict() for r in reports],
            "summary": summarize(reports).to_dict() if reports else None,
        }
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
        return EXIT_OK
    _emit(write_reports(reports, "csv"), args.out)
    if reports:
        target = sys.stdout
        target.write("\n" if not args.out else "")
        target.write(render_summary(summarize(reports)))
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    config = _load_config(args)
    stats = run_batch(
        scene_count=args.scenes,
        base_seed=args.seed,
        occluder_count=args.occluders,
        coverage_target=args.coverage,
        config=config,
    )
    coverage = "random" if args.coverage is None else f"{args.coverage:g}"
    sys.stdout.write(
        f"scenes={stats.scene_count} seed={args.seed} occluders={args.occluders} coverage={coverage}\n"
        f"mean_abs_error={stats.mean_abs_error:.4f}\n"
        f"max_abs_error={stats.max_abs_error:.4f}\n"
        f"band_agreement_rate={stats.band_agreement_rate:.4f}\n"
    )
    sys.stdout.write(render_confusion(stats.confusion))
    return EXIT_OK


def _read_label_rows(path: str) -> list[tuple[BoundingBox, float]]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ParseError("empty labels file", path)
        fields = set(reader.fieldnames)
        corner = {"x_min", "y_min", "x_max", "y_max", "fraction"}
        sized = {"width", "height", "fraction"}
        labeled = []
        for row in reader:
            if corner <= fields:
                bbox = BoundingBox(
                    float(row["x_min"]), float(row["y_min"]), float(row["x_max"]), float(row["y_max"])
                )
            elif sized <= fields:
                bbox = BoundingBox(0.0, 0.0, float(row["width"]), float(row["height"]))
            else:
                raise ParseError(
                    "labels need columns width,height,fraction or x_min,y_min,x_max,y_max,fraction",
                    path,
                )
            labeled.append((bbox, float(row["fraction"])))
    return labeled


def _cmd_calibrate(args: argparse.Namespace) -> int:
    labeled = _read_label_rows(args.labels)
    config = calibrate_thresholds(labeled, grid_step=args.grid_step)
    sys.stdout.write(json.dumps(config.to_dict(), indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="occlusion-meter",
        description="Estimate bicycle visibility and occlusion level from part detections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help=f"classifier config JSON (or ${CONFIG_ENV_VAR})")
        p.add_argument("--confidence-threshold", type=float, dest="confidence_threshold")
        p.add_argument("--out", help="write output to this path instead of stdout")

    p_classify = sub.add_parser("classify", help="classify one detection JSON file")
    p_classify.add_argument("input")
    p_classify.add_argument("--format", choices=("csv", "json"), default="csv")
    p_classify.add_argument("--permissive", action="store_true", help="drop bad predictions instead of failing")
    add_common(p_classify)
    p_classify.set_defaults(func=_cmd_classify)

    p_batch = sub.add_parser("batch", help="classify every *.json in a directory")
    p_batch.add_argument("dir")
    p_batch.add_argument("--format", choices=("csv", "json"), default="csv")
    p_batch.add_argument("--permissive", action="store_true")
    add_common(p_batch)
    p_batch.set_defaults(func=_cmd_batch)

    p_synth = sub.add_parser("synth", help="run the synthetic-oracle experiment")
    p_synth.add_argument("--scenes", type=int, required=True)
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--occluders", type=int, default=1)
    p_synth.add_argument("--coverage", type=float, default=None)
    p_synth.add_argument("--config", help=f"classifier config JSON (or ${CONFIG_ENV_VAR})")
    p_synth.set_defaults(func=_cmd_synth)

    p_calibrate = sub.add_parser("calibrate", help="recover wheel ratio thresholds from labels")
    p_calibrate.add_argument("labels")
    p_calibrate.add_argument("--grid-step", type=float, default=0.01, dest="grid_step")
    p_calibrate.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OcclusionMeterError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
