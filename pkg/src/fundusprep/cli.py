"""fundus-prep command line: batch runs, preview grids, metric tables."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .errors import FundusPrepError, LengthMismatch, ManifestInvalid
from .erosion import ErosionParams
from .histops import ClaheParams
from .image import load_image
from .methods import METHOD_TAGS, MethodSettings, apply_method, normalize_tag
from .metrics import build_cm, metrics, report_csv, report_table
from .pipeline import (
    AUGMENT_OPS,
    TASK_CLASSES,
    load_manifest,
    preview_grid,
    run_batch,
)
from .restore import DpfrParams


def _parse_tile_grid(text: str):
    try:
        rows, cols = text.lower().split("x")
        return (int(rows), int(cols))
    except ValueError:
        raise argparse.ArgumentTypeError(f"tile grid must look like 8x8, got {text!r}")


def _add_method_options(p: argparse.ArgumentParser):
    p.add_argument("--clip-limit", type=float, default=2.0, help="CLAHE histogram cap (>= 1)")
    p.add_argument("--tile-grid", type=_parse_tile_grid, default=(8, 8), metavar="RxC")
    p.add_argument("--eps-coarse", type=float, default=DpfrParams.eps_coarse)
    p.add_argument("--dehaze-coarse-gain", type=float, default=DpfrParams.dehaze_coarse_gain)
    p.add_argument("--dehaze-fine", type=float, default=DpfrParams.dehaze_fine)
    p.add_argument("--scatter", type=float, default=DpfrParams.scatter_strength)
    p.add_argument("--mode", choices=("single", "composite"), default="composite",
                   help="amplification candidate selection")
    p.add_argument("--sharpen", action="store_true", help="unsharp-mask each candidate")
    p.add_argument("--start-patch", type=int, default=32, choices=(4, 8, 16, 32, 64))
    p.add_argument("--kernel", choices=("average", "gaussian"), default="average")
    p.add_argument("--boundary", choices=("wrap", "clamp"), default="wrap")
    p.add_argument("--min-patch", type=int, default=2)
    p.add_argument("--roi-threshold", type=float, default=0.02,
                   help="near-black cutoff for the fundus region crop")


def _settings_from_args(args) -> MethodSettings:
    return MethodSettings(
        clahe=ClaheParams(clip_limit=args.clip_limit, tile_grid=args.tile_grid),
        dpfr=DpfrParams(
            eps_coarse=args.eps_coarse,
            dehaze_coarse_gain=args.dehaze_coarse_gain,
            dehaze_fine=args.dehaze_fine,
            scatter_strength=args.scatter,
        ),
        erosion=ErosionParams(
            start_patch=args.start_patch,
            kernel=args.kernel,
            boundary=args.boundary,
            min_patch=args.min_patch,
        ),
        pcar_mode=args.mode,
        sharpen=args.sharpen,
        roi_threshold=args.roi_threshold,
    )


def _cmd_run(args) -> int:
    manifest = load_manifest(args.manifest, args.task, args.method)
    ops = [o for o in (args.augment or "").split(",") if o]
    report = run_batch(
        manifest,
        args.out,
        size=(args.size, args.size),
        settings=_settings_from_args(args),
        augment_ops=ops,
        seed=args.seed,
        force=args.force,
        workers=args.workers,
    )
    print(report.summary())
    for path, message in report.failures:
        print(f"  FAILED {path}: {message}", file=sys.stderr)
    return 0 if report.ok else 1


def _cmd_preview(args) -> int:
    manifest = load_manifest(args.manifest, args.task, args.method)
    entries = manifest.entries[: args.count]
    before = [load_image(e.path) for e in entries]
    settings = _settings_from_args(args)
    after = [apply_method(manifest.method, img, settings=settings) for img in before]
    out = preview_grid(before, after, args.out)
    print(f"wrote {out}")
    return 0


def _read_label_csv(path, value_col):
    rows = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows[row["path"]] = int(row[value_col])
    return rows


def _cmd_metrics(args) -> int:
    pred_path = Path(args.pred)
    if args.truth:
        pred = _read_label_csv(pred_path, "label")
        truth = _read_label_csv(args.truth, "label")
        missing = sorted(set(truth) - set(pred))
        if missing:
            raise LengthMismatch(f"{len(missing)} paths missing from predictions, e.g. {missing[0]}")
        keys = sorted(truth)
        pairs = [(pred[k], truth[k]) for k in keys]
    else:
        pairs = []
        with open(pred_path, newline="") as fh:
            for row in csv.DictReader(fh):
                pairs.append((int(row["predicted"]), int(row["true"])))
        if not pairs:
            raise ManifestInvalid(f"{pred_path}: no rows")
    k = args.classes or (max(max(p, t) for p, t in pairs) + 1)
    cm = build_cm([p for p, _ in pairs], [t for _, t in pairs], k)
    report = metrics(cm)
    name = args.method_name or pred_path.stem
    print(report_table([report], [name]))
    print("confusion matrix (rows predicted, cols true):")
    for row in cm.counts:
        print("  " + " ".join(f"{v:6d}" for v in row))
    if args.out_csv:
        Path(args.out_csv).write_text(report_csv([report], [name]))
        print(f"wrote {args.out_csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fundus-prep",
        description="Batch pre-processing and evaluation for retinal fundus images",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="process a manifest of images with one method")
    run.add_argument("--manifest", required=True)
    run.add_argument("--task", required=True, choices=sorted(TASK_CLASSES))
    run.add_argument("--method", required=True, type=normalize_tag,
                     metavar="{" + ",".join(METHOD_TAGS) + "}")
    run.add_argument("--out", required=True)
    run.add_argument("--size", type=int, default=224, help="square output size (Lanczos)")
    run.add_argument("--augment", default="",
                     help=f"comma list from {','.join(AUGMENT_OPS)} (train split only)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--force", action="store_true", help="overwrite existing outputs")
    run.add_argument("--workers", type=int, default=4)
    _add_method_options(run)
    run.set_defaults(func=_cmd_run)

    preview = sub.add_parser("preview", help="write a before/after comparison grid")
    preview.add_argument("--manifest", required=True)
    preview.add_argument("--task", required=True, choices=sorted(TASK_CLASSES))
    preview.add_argument("--method", required=True, type=normalize_tag)
    preview.add_argument("--out", required=True)
    preview.add_argument("-n", "--count", type=int, default=3)
    _add_method_options(preview)
    preview.set_defaults(func=_cmd_preview)

    met = sub.add_parser("metrics", help="score predictions against ground truth")
    met.add_argument("--pred", required=True,
                     help="CSV with path,predicted,true (or path,label with --truth)")
    met.add_argument("--truth", help="CSV with path,label; joins on path")
    met.add_argument("--classes", type=int, help="class count (default: inferred)")
    met.add_argument("--method-name", help="row label for the report table")
    met.add_argument("--out-csv", help="also write the per-class CSV here")
    met.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FundusPrepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
