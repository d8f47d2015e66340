"""Command line interface.

Subcommands cover the whole pipeline: convert (DICOM -> internal volume),
bootstrap (fixed-threshold first-pass masks), segment (2.5D harness or
external probability maps), patches (classifier patch export), filter
(region-level false-positive removal), analyze (full case report), evaluate
(benchmark summary), overlay (contour images), phantom (synthetic test data).

Exit codes: 0 success, 2 input error, 3 pipeline error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import dicom, io, phantom, report, threshold_seg
from .errors import InputFormatError, PipelineError
from .preprocess import clip_hu, normalize_to_gray
from .region_filter import (
    FilterConfig,
    builtin_patch_score,
    export_patches,
    extract_candidates,
    filter_regions,
    score_regions,
)
from .report import AnalyzeConfig, CaseMasks, StageError, analyze_case, analyze_to_masks
from .seg_harness import binarize, load_probmaps, run_25d, threshold_probability_segmenter
from .volume import CtVolume


def load_volume(path) -> CtVolume:
    """Internal header file, or a directory holding a DICOM series."""
    path = Path(path)
    if path.is_dir():
        return dicom.read_dicom_series(path)
    return io.read_internal(path)


def _cmd_convert(args) -> int:
    volume = dicom.read_dicom_series(args.dicom_dir)
    io.write_internal(volume, args.out)
    print(f"wrote {args.out} ({volume.dims[0]}x{volume.dims[1]}x{volume.dims[2]} voxels)")
    return 0


def _cmd_bootstrap(args) -> int:
    volume = load_volume(args.volume)
    lung, infected = threshold_seg.bootstrap_labels(volume, args.t_lung, args.t_inf)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_mask(lung, out / "lung.json", case_id=volume.case_id)
    io.write_mask(infected, out / "infected.json", case_id=volume.case_id)
    print(f"bootstrap masks at t_lung={args.t_lung}, t_inf={args.t_inf}: "
          f"lung {lung.count} voxels, infected {infected.count} voxels -> {out}")
    return 0


def _cmd_segment(args) -> int:
    volume = load_volume(args.volume)
    if args.probmaps:
        pmap = load_probmaps(args.probmaps)
    else:
        gray = normalize_to_gray(clip_hu(volume))
        segmenter = threshold_probability_segmenter(args.builtin_threshold)
        pmap = run_25d(gray, segmenter, threads=args.threads)
    mask = binarize(pmap, args.tau)
    io.write_mask(mask, args.out, case_id=volume.case_id)
    print(f"segmented {mask.count} voxels -> {args.out}")
    return 0


def _cmd_patches(args) -> int:
    mask = io.read_mask(args.mask)
    volume = load_volume(args.volume)
    gray = normalize_to_gray(clip_hu(volume))
    candidates = extract_candidates(mask, gray)
    written = export_patches(candidates, args.out_dir)
    print(f"{len(candidates)} regions, {len(written)} patches -> {args.out_dir}")
    return 0


def _cmd_filter(args) -> int:
    mask = io.read_mask(args.mask)
    volume = load_volume(args.volume)
    gray = normalize_to_gray(clip_hu(volume))
    candidates = extract_candidates(mask, gray)
    if args.scores:
        scored = score_regions(candidates, region_scores=io.read_region_scores(args.scores),
                               threads=args.threads)
    else:
        scored = score_regions(candidates, patch_scorer=builtin_patch_score,
                               threads=args.threads)
    config = FilterConfig(threshold=args.threshold, min_region_voxels=args.min_region_voxels)
    kept = filter_regions(scored, config, dims=mask.dims, spacing=mask.spacing)
    io.write_mask(kept, args.out)
    print(f"kept {kept.count} of {mask.count} voxels "
          f"({sum(1 for s in scored if s.score >= args.threshold)}/{len(scored)} regions) "
          f"-> {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    volume = load_volume(args.volume)
    if args.config:
        config = AnalyzeConfig.from_json(json.loads(Path(args.config).read_text()))
    else:
        config = AnalyzeConfig()
    if args.threads != 1:
        config = dataclasses.replace(config, threads=args.threads)
    case_report = analyze_case(volume, config)
    Path(args.out).write_text(case_report.to_json())
    if args.masks_dir or args.overlay_dir:
        lung, infected = analyze_to_masks(volume, config)
        if args.masks_dir:
            masks_dir = Path(args.masks_dir)
            masks_dir.mkdir(parents=True, exist_ok=True)
            io.write_mask(lung, masks_dir / "lung.json", case_id=volume.case_id)
            io.write_mask(infected, masks_dir / "infected.json", case_id=volume.case_id)
        if args.overlay_dir:
            report.emit_overlays(volume, lung, infected, args.overlay_dir)
    print(f"{case_report.case_id}: infected proportion "
          f"{case_report.poir_fraction * 100.0:.2f}% -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    case_ids = sorted(
        p.name.removesuffix(".lung.json")
        for p in pred_dir.glob("*.lung.json")
        if (gt_dir / p.name).exists()
    )
    if not case_ids:
        raise InputFormatError(
            f"no matching '<case>.lung.json' pairs under {pred_dir} and {gt_dir}")
    cases = []
    for cid in case_ids:
        cases.append(CaseMasks(
            case_id=cid,
            lung_pred=io.read_mask(pred_dir / f"{cid}.lung.json"),
            infected_pred=io.read_mask(pred_dir / f"{cid}.infected.json"),
            lung_gt=io.read_mask(gt_dir / f"{cid}.lung.json"),
            infected_gt=io.read_mask(gt_dir / f"{cid}.infected.json"),
        ))
    summary = report.evaluate_benchmark({args.method: cases})
    Path(args.out).write_text(summary.to_json())
    for method, structure, m_dice in summary.rows:
        print(f"{method:24s} {structure:16s} m-Dice {m_dice:.3f}")
    print(f"proportion correlation r={summary.pearson_r:.3f}, "
          f"mAPE {summary.mape_percent:.1f}% -> {args.out}")
    return 0


def _cmd_overlay(args) -> int:
    volume = load_volume(args.volume)
    lung = io.read_mask(args.lung)
    infected = io.read_mask(args.infected)
    written = report.emit_overlays(volume, lung, infected, args.out_dir)
    print(f"{len(written)} overlay slices -> {args.out_dir}")
    return 0


def _cmd_phantom(args) -> int:
    if args.spec:
        spec = phantom.load_spec(args.spec)
    else:
        spec = phantom.PhantomSpec.default()
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    volume, gt_lung, gt_infected = phantom.make_phantom(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_internal(volume, out / "volume.json")
    io.write_mask(gt_lung, out / "gt_lung.json", case_id=volume.case_id)
    io.write_mask(gt_infected, out / "gt_infected.json", case_id=volume.case_id)
    if args.dicom:
        phantom.write_phantom_dicom(volume, out / "dicom")
    ratio = gt_infected.count / gt_lung.count if gt_lung.count else 0.0
    print(f"phantom '{spec.case_id}' seed={spec.seed}: lung {gt_lung.count} voxels, "
          f"infected {gt_infected.count} voxels (proportion {ratio:.4f}) -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctpoir",
        description="Quantify the infected proportion of lung from CT volumes.")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for parallel stages (default 1)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the phantom seed")
    parser.add_argument("--config", default=None,
                        help="JSON pipeline config (used by analyze)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="read a DICOM series into the internal volume format")
    p.add_argument("dicom_dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("bootstrap", help="fixed-threshold first-pass lung/infected masks")
    p.add_argument("volume")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--t-lung", type=int, default=threshold_seg.DEFAULT_LUNG_HU)
    p.add_argument("--t-inf", type=int, default=threshold_seg.DEFAULT_INFECTED_HU)
    p.set_defaults(func=_cmd_bootstrap)

    p = sub.add_parser("segment", help="probability-map segmentation to a binary mask")
    p.add_argument("volume")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--probmaps", help="externally produced probability map file")
    group.add_argument("--builtin-threshold", type=int,
                       help="run the 2.5D harness with the HU-threshold segmenter")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("patches", help="export per-region classifier patches as PGM")
    p.add_argument("mask")
    p.add_argument("volume")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_patches)

    p = sub.add_parser("filter", help="drop low-scoring regions from a mask")
    p.add_argument("mask")
    p.add_argument("volume")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--scores", help="sidecar CSV region_id,score")
    group.add_argument("--builtin", action="store_true",
                       help="use the built-in heuristic scorer")
    p.add_argument("--threshold", type=float, default=0.45)
    p.add_argument("--min-region-voxels", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("analyze", help="full pipeline -> quantified case report")
    p.add_argument("volume")
    p.add_argument("--out", required=True)
    p.add_argument("--masks-dir", default=None, help="also write the final masks")
    p.add_argument("--overlay-dir", default=None, help="also write contour overlays")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("evaluate", help="benchmark summary over prediction/truth mask dirs")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--method", default="pred", help="method label for the summary rows")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("overlay", help="contour overlay images for given masks")
    p.add_argument("volume")
    p.add_argument("--lung", required=True)
    p.add_argument("--infected", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_overlay)

    p = sub.add_parser("phantom", help="generate a synthetic phantom with ground truth")
    p.add_argument("--spec", default=None, help="phantom spec JSON (defaults otherwise)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--dicom", action="store_true", help="also emit a DICOM series")
    p.set_defaults(func=_cmd_phantom)

    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        return _exit_code(exc.cause)
    if isinstance(exc, (InputFormatError, FileNotFoundError, NotADirectoryError,
                        IsADirectoryError, json.JSONDecodeError, KeyError, ValueError)):
        return 2
    if isinstance(exc, PipelineError):
        return 3
    return 3


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single boundary for exit codes
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
