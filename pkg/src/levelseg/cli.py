"""Command-line entry points: ``levelseg detect|eval|bench|render``.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .datasets import HomographyParseError, SequenceLoadError, discover_sequences, load_sequence, parse_homography_file
from .detector import detect_segments
from .evaluation import PRESETS, EvalConfig, Homography, HomographyError, MatchReport, match_segments
from .imaging import ImageDimensionError, ImageFormatError, load_grayscale
from .params import DetectorParams
from .records import DetectionRecord, RecordFormatError
from .svg import render_svg

log = logging.getLogger("levelseg")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2

INPUT_ERRORS = (OSError, ImageFormatError, ImageDimensionError, RecordFormatError,
                HomographyParseError, HomographyError, SequenceLoadError)


class InputError(Exception):
    pass


# -- library-level operations ------------------------------------------------

def run_detect(image, params: DetectorParams | None = None, out=None, svg=None) -> DetectionRecord:
    """Detect on one image file; write the record and optional overlay."""
    params = params or DetectorParams()
    img = load_grayscale(image)
    h, w = img.shape
    segments = detect_segments(img, params) if min(h, w) >= 5 else []
    record = DetectionRecord(str(image), w, h, params, segments)
    if out is not None:
        record.write(out)
    if svg is not None:
        Path(svg).write_text(render_svg(segments, w, h, image=img))
    return record


def run_eval(ref: DetectionRecord, test: DetectionRecord, H: Homography | None = None,
             config: EvalConfig | str = "loose") -> MatchReport:
    cfg = PRESETS[config] if isinstance(config, str) else config
    return match_segments(ref.segments, test.segments, H or Homography.identity(), cfg)


def _eval_sequence(path, params: DetectorParams, cfg: EvalConfig):
    seq = load_sequence(path)
    ref = detect_segments(load_grayscale(seq.ref_image), params)
    reps = []
    for test_path, H in seq.tests:
        test = detect_segments(load_grayscale(test_path), params)
        reps.append(match_segments(ref, test, H, cfg).rep)
    return seq.name, seq.transformation, reps


def run_bench(root, params: DetectorParams | None = None, config: EvalConfig | str = "loose",
              jobs: int = 1) -> list[dict]:
    """Repeatability per sequence and per transformation over a dataset root.

    Rows are dicts with ``kind`` (sequence, transformation or all), ``name``,
    ``transformation``, ``pairs`` and ``rep``. Transformation and overall rows
    average over image pairs. Unloadable sequences are skipped with a warning.
    """
    params = params or DetectorParams()
    cfg = PRESETS[config] if isinstance(config, str) else config
    paths = discover_sequences(root)
    results = []
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_eval_sequence, p, params, cfg) for p in paths]
            outcomes = []
            for p, f in zip(paths, futures):
                try:
                    outcomes.append(f.result())
                except INPUT_ERRORS as exc:
                    log.warning("skipping %s: %s", p, exc)
            results = outcomes
    else:
        for p in paths:
            try:
                results.append(_eval_sequence(p, params, cfg))
            except INPUT_ERRORS as exc:
                log.warning("skipping %s: %s", p, exc)
    results = [r for r in results if r[2]]
    if not results:
        raise InputError(f"{root}: no loadable sequences with test images")

    rows = [{"kind": "sequence", "name": name, "transformation": tr, "pairs": len(reps),
             "rep": float(np.mean(reps))} for name, tr, reps in results]
    by_tr: dict[str, list[float]] = {}
    for _, tr, reps in results:
        by_tr.setdefault(tr, []).extend(reps)
    for tr in sorted(by_tr):
        rows.append({"kind": "transformation", "name": tr, "transformation": tr,
                     "pairs": len(by_tr[tr]), "rep": float(np.mean(by_tr[tr]))})
    every = [r for _, _, reps in results for r in reps]
    rows.append({"kind": "all", "name": "all", "transformation": "", "pairs": len(every),
                 "rep": float(np.mean(every))})
    return rows


def bench_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["kind", "name", "transformation", "pairs", "rep"],
                            lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({**r, "rep": f"{r['rep']:.6f}"})
    return buf.getvalue()


def bench_table(rows: list[dict]) -> str:
    cells = [("kind", "name", "transformation", "pairs", "rep")]
    cells += [(r["kind"], r["name"], r["transformation"], str(r["pairs"]), f"{r['rep']:.4f}")
              for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(5)]
    lines = []
    for c in cells:
        left = "  ".join(c[i].ljust(widths[i]) for i in range(3))
        right = "  ".join(c[i].rjust(widths[i]) for i in range(3, 5))
        lines.append(f"{left}  {right}".rstrip())
    return "\n".join(lines) + "\n"


# -- argument handling -------------------------------------------------------

def _add_param_flags(p: argparse.ArgumentParser) -> None:
    d = DetectorParams()
    p.add_argument("--grad-thresh", type=float, default=d.grad_thresh,
                   help="minimum normalized gradient magnitude (default %(default)s)")
    p.add_argument("--radius", type=float, default=d.equalize_radius,
                   help="anchor equalization radius in px (default %(default)s)")
    p.add_argument("--endpoint-thresh", type=float, default=d.endpoint_thresh,
                   help="endpoint gap for loops and merges in px (default %(default)s)")
    p.add_argument("--inlier-ratio", type=float, default=d.inlier_ratio,
                   help="minimum inlier ratio (default %(default)s)")
    p.add_argument("--dist-thresh", type=float, default=d.dist_thresh,
                   help="inlier distance threshold in px (default %(default)s)")
    p.add_argument("--angle-thresh", type=float, default=d.angle_thresh,
                   help="inlier level-line angle threshold in degrees (default %(default)s)")
    p.add_argument("--rho", type=float, default=d.rho,
                   help="weight of the angle term in the loss (default %(default)s)")
    p.add_argument("--min-length", type=float, default=d.min_length,
                   help="minimum segment length in px (default %(default)s)")
    p.add_argument("--init-window", type=int, default=d.init_window,
                   help="points in the initial fitting window (default %(default)s)")
    p.add_argument("--no-init-refine", action="store_true",
                   help="skip loss refinement of the initial window")
    p.add_argument("--no-angle-check", action="store_true",
                   help="validate inliers by distance only")


def _params_from_args(args) -> DetectorParams:
    return DetectorParams(
        grad_thresh=args.grad_thresh, equalize_radius=args.radius,
        endpoint_thresh=args.endpoint_thresh, inlier_ratio=args.inlier_ratio,
        dist_thresh=args.dist_thresh, angle_thresh=args.angle_thresh, rho=args.rho,
        min_length=args.min_length, init_window=args.init_window,
        init_refine=not args.no_init_refine, use_angle_check=not args.no_angle_check,
    )


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", choices=sorted(PRESETS), default="loose",
                   help="evaluation preset (default %(default)s)")
    p.add_argument("--ed", type=float, help="distance threshold in px, overrides the preset")
    p.add_argument("--ea", type=float, help="angle threshold in degrees, overrides the preset")
    p.add_argument("--eo", type=float, help="overlap threshold, overrides the preset")


def _config_from_args(args) -> EvalConfig:
    base = PRESETS[args.config]
    return EvalConfig(
        args.ed if args.ed is not None else base.dist_thresh,
        args.ea if args.ea is not None else base.angle_thresh,
        args.eo if args.eo is not None else base.overlap_thresh,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levelseg", description="Level-line guided line segment detection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect segments on one image")
    p.add_argument("image", help="PNG, PGM or PPM image")
    p.add_argument("-o", "--out", help="record file to write (default: stdout)")
    p.add_argument("--svg", help="also write an SVG overlay")
    _add_param_flags(p)

    p = sub.add_parser("eval", help="repeatability between two detection records")
    p.add_argument("ref", help="reference record")
    p.add_argument("test", help="test record")
    p.add_argument("homography", nargs="?",
                   help="homography file mapping ref to test (default: identity)")
    _add_config_flags(p)
    p.add_argument("--report", help="write a JSON report")

    p = sub.add_parser("bench", help="repeatability over a dataset root")
    p.add_argument("root", help="directory of sequences, or one sequence")
    _add_param_flags(p)
    _add_config_flags(p)
    p.add_argument("--csv", help="write the table as CSV")
    p.add_argument("--jobs", type=int, default=1, help="sequences evaluated in parallel")

    p = sub.add_parser("render", help="SVG overlay of a detection record")
    p.add_argument("record", help="detection record")
    p.add_argument("-o", "--out", required=True, help="SVG file to write")
    p.add_argument("--image", help="background image (default: the record's image path)")
    return parser


def _cmd_detect(args) -> int:
    params = _params_from_args(args)
    record = run_detect(args.image, params, args.out, args.svg)
    if args.out is None:
        sys.stdout.write(record.dumps())
    else:
        print(f"{len(record.segments)} segments -> {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    ref = DetectionRecord.read(args.ref)
    test = DetectionRecord.read(args.test)
    H = parse_homography_file(args.homography) if args.homography else Homography.identity()
    report = run_eval(ref, test, H, cfg)
    print(f"n_r {report.n_r}\nn_t {report.n_t}\nn_m {report.n_m}\nrep {report.rep:.6f}")
    if args.report:
        data = {"ref": args.ref, "test": args.test, "config": asdict(cfg), **report.to_dict()}
        Path(args.report).write_text(json.dumps(data, indent=1) + "\n")
    return EXIT_OK


def _cmd_bench(args) -> int:
    if args.jobs < 1:
        raise InputError("--jobs must be at least 1")
    rows = run_bench(args.root, _params_from_args(args), _config_from_args(args), args.jobs)
    sys.stdout.write(bench_table(rows))
    if args.csv:
        Path(args.csv).write_text(bench_csv(rows))
    return EXIT_OK


def _cmd_render(args) -> int:
    record = DetectionRecord.read(args.record)
    img = load_grayscale(args.image or record.image)
    if img.shape != (record.height, record.width):
        raise InputError(f"image is {img.shape[1]}x{img.shape[0]}, record says "
                         f"{record.width}x{record.height}")
    Path(args.out).write_text(render_svg(record.segments, record.width, record.height, image=img))
    return EXIT_OK


COMMANDS = {"detect": _cmd_detect, "eval": _cmd_eval, "bench": _cmd_bench, "render": _cmd_render}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InputError, ValueError, *INPUT_ERRORS) as exc:
        print(f"levelseg: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"levelseg: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
