"""Command-line front end wiring the evaluation/calibration workflow.

Subcommands: augment, match, metrics, ece, reliability, calibrate-fit,
calibrate-apply, simulate, pipeline. Exit codes: 0 ok, 2 usage, 3 data
error, 4 numeric error. `DETCAL_THREADS` bounds the per-image worker pool;
results are collected in manifest order so parallel and serial runs agree.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import annotations as ann
from . import plots
from .augmentation import BlurSpec, augment_dataset
from .calibration import FeatureSpec, LabeledSample, calibrate_detections, extract_features, fit
from .calibration_error import DEFAULT_BINS, bin_outcomes, expected_calibration_error
from .errors import DataError, DetcalError, UsageError
from .matching import DEFAULT_IOU_THRESHOLD, aggregate, match_scene
from .reports import (
    METRICS_HEADER,
    RELIABILITY_HEADER,
    metrics_report_rows,
    reliability_report_rows,
    write_config,
    write_report,
)
from .simulator import ConfidenceLink, SceneStreamSpec, generate_scenes

__all__ = ["main", "entry_point"]


def _worker_count():
    value = os.environ.get("DETCAL_THREADS", "")
    try:
        return max(1, int(value)) if value else 1
    except ValueError:
        raise UsageError(f"DETCAL_THREADS must be an integer, got {value!r}") from None


def _load_scene_records(manifest_path):
    manifest = ann.load_manifest(manifest_path)
    records = []
    for entry in manifest.entries:
        with open(entry.truth_path, encoding="utf-8") as fh:
            truths = ann.parse_ground_truth(fh.read())
        detections = []
        if entry.detection_path:
            with open(entry.detection_path, encoding="utf-8") as fh:
                detections = ann.parse_detections(fh.read())
        records.append((entry.image_id, truths, detections))
    return manifest, records


def _match_all(records, threshold):
    """Match every scene; fan-out bounded by DETCAL_THREADS, ordered collect."""
    workers = _worker_count()
    if workers == 1:
        return [
            (image_id, match_scene(dets, truths, threshold))
            for image_id, truths, dets in records
        ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        summaries = list(
            pool.map(lambda r: match_scene(r[2], r[1], threshold), records)
        )
    return [(records[i][0], summaries[i]) for i in range(len(records))]


def _labeled_detections(records, scoped_summaries):
    """Flatten to (detection, correct) in manifest + input order."""
    labeled = []
    for (image_id, truths, dets), (_, summary) in zip(records, scoped_summaries):
        for outcome in summary.outcomes:
            labeled.append((dets[outcome.detection_index], outcome.correct))
    return labeled


def _feature_spec(args) -> FeatureSpec:
    names = [n.strip() for n in args.features.split(",") if n.strip()]
    alias = {"conf": "confidence"}
    names = [alias.get(n, n) for n in names]
    return FeatureSpec.from_names(
        names, confidence_transform="logit" if args.logit_confidence else "raw"
    )


def _fit_model(labeled, spec, args):
    samples = [
        LabeledSample(extract_features(det, spec), correct) for det, correct in labeled
    ]
    return fit(
        samples,
        lambda_reg=args.lambda_reg,
        spec=spec,
        with_prior_term=args.with_prior_term,
    )


def _split_labeled(labeled, fit_fraction, seed):
    if not (0.0 < fit_fraction < 1.0):
        raise UsageError(f"--fit-fraction must be in (0, 1), got {fit_fraction}")
    spec = ann.SplitSpec((fit_fraction, 1.0 - fit_fraction), seed)
    fit_idx, test_idx = ann.split_records(len(labeled), spec)
    return [labeled[i] for i in fit_idx], [labeled[i] for i in test_idx]


# --- subcommand implementations ---------------------------------------------


def _cmd_augment(args):
    manifest = ann.load_manifest(args.manifest)
    report = augment_dataset(
        manifest, BlurSpec(args.blur_length, args.blur_angle), args.out
    )
    out_manifest = os.path.join(args.out, "manifest.txt")
    ann.save_manifest(report.manifest, out_manifest)
    for image_id, message in report.errors:
        print(f"warning: {image_id}: {message}", file=sys.stderr)
    print(f"wrote {len(report.manifest.entries)} entries to {out_manifest}")
    return 0


def _cmd_match(args):
    _, records = _load_scene_records(args.manifest)
    scoped = _match_all(records, args.iou_threshold)
    header = ["image_id", "detection_index", "class_id", "confidence", "iou", "truth_index", "correct"]
    rows = []
    for (image_id, truths, dets), (_, summary) in zip(records, scoped):
        for o in summary.outcomes:
            det = dets[o.detection_index]
            rows.append(
                (image_id, o.detection_index, det.class_id, det.confidence,
                 o.iou, o.truth_index if o.truth_index is not None else -1, o.correct)
            )
    config = {"subcommand": "match", "iou_threshold": args.iou_threshold}
    _emit(args, header, rows, config)
    return 0


def _cmd_metrics(args):
    _, records = _load_scene_records(args.manifest)
    scoped = _match_all(records, args.iou_threshold)
    rows = metrics_report_rows(scoped + [("ALL", aggregate(s for _, s in scoped))])
    config = {"subcommand": "metrics", "iou_threshold": args.iou_threshold}
    _emit(args, METRICS_HEADER, rows, config)
    return 0


def _cmd_ece(args):
    _, records = _load_scene_records(args.manifest)
    scoped = _match_all(records, args.iou_threshold)
    labeled = _labeled_detections(records, scoped)
    bins = bin_outcomes([(d.confidence, k) for d, k in labeled], args.bins)
    ece = expected_calibration_error(bins)
    print(f"ece {ece:.3f}")
    if args.out:
        config = {"subcommand": "ece", "iou_threshold": args.iou_threshold, "bins": args.bins}
        rows = [("ece", repr(ece)), ("n", len(labeled))]
        write_report(args.out, ["key", "value"], rows, config, args.format)
    return 0


def _cmd_reliability(args):
    _, records = _load_scene_records(args.manifest)
    scoped = _match_all(records, args.iou_threshold)
    labeled = _labeled_detections(records, scoped)
    bins = bin_outcomes([(d.confidence, k) for d, k in labeled], args.bins)
    os.makedirs(args.out, exist_ok=True)
    config = {"subcommand": "reliability", "iou_threshold": args.iou_threshold, "bins": args.bins}
    write_report(
        os.path.join(args.out, "reliability.csv"),
        RELIABILITY_HEADER, reliability_report_rows(bins), config, args.format,
    )
    if not args.no_figures:
        plots.save_reliability_diagram(bins, os.path.join(args.out, "reliability.png"))
    print(f"ece {expected_calibration_error(bins):.3f}")
    return 0


def _cmd_calibrate_fit(args):
    _, records = _load_scene_records(args.manifest)
    scoped = _match_all(records, args.iou_threshold)
    labeled = _labeled_detections(records, scoped)
    fit_part, _ = _split_labeled(labeled, args.fit_fraction, args.seed)
    spec = _feature_spec(args)
    model = _fit_model(fit_part, spec, args)
    ann.save_model(model, args.out)
    print(f"fitted on {len(fit_part)} detections -> {args.out}")
    return 0


def _cmd_calibrate_apply(args):
    model = ann.load_model(args.model)
    manifest = ann.load_manifest(args.manifest)
    os.makedirs(args.out, exist_ok=True)
    entries = []
    for entry in manifest.entries:
        if not entry.detection_path:
            entries.append(entry)
            continue
        with open(entry.detection_path, encoding="utf-8") as fh:
            detections = ann.parse_detections(fh.read())
        out_path = os.path.join(args.out, f"{entry.image_id}.txt")
        calibrated = calibrate_detections(model, detections)
        tmp = f"{out_path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(ann.format_detections(calibrated))
        os.replace(tmp, out_path)
        entries.append(
            ann.ManifestEntry(entry.image_id, entry.image_path, entry.truth_path, out_path)
        )
    out_manifest = os.path.join(args.out, "manifest.txt")
    ann.save_manifest(ann.DatasetManifest(entries), out_manifest)
    print(f"wrote calibrated detections for {len(entries)} entries to {args.out}")
    return 0


def _cmd_simulate(args):
    spec = SceneStreamSpec(
        n_scenes=args.n_scenes,
        truths_min=args.truths_min,
        truths_max=args.truths_max,
        jitter_sigma=args.jitter_sigma,
        link=ConfidenceLink.parse(args.link),
        seed=args.seed,
    )
    scenes = generate_scenes(spec)
    truth_dir = os.path.join(args.out, "truths")
    det_dir = os.path.join(args.out, "detections")
    os.makedirs(truth_dir, exist_ok=True)
    os.makedirs(det_dir, exist_ok=True)
    entries = []
    for i, scene in enumerate(scenes):
        image_id = f"scene_{i:05d}"
        truth_path = os.path.join(truth_dir, f"{image_id}.txt")
        det_path = os.path.join(det_dir, f"{image_id}.txt")
        with open(truth_path, "w", encoding="utf-8") as fh:
            fh.write(ann.format_ground_truth(scene.truths))
        with open(det_path, "w", encoding="utf-8") as fh:
            fh.write(ann.format_detections(scene.detections))
        entries.append(ann.ManifestEntry(image_id, None, truth_path, det_path))
    manifest_path = os.path.join(args.out, "manifest.txt")
    ann.save_manifest(ann.DatasetManifest(entries), manifest_path)
    n_dets = sum(len(s.detections) for s in scenes)
    print(f"wrote {len(scenes)} scenes ({n_dets} detections) to {args.out}")
    return 0


def _cmd_pipeline(args):
    os.makedirs(args.out, exist_ok=True)
    _, records = _load_scene_records(args.manifest)
    scoped = _match_all(records, args.iou_threshold)
    labeled = _labeled_detections(records, scoped)
    if not labeled:
        raise DataError("no detections in dataset; nothing to calibrate")

    spec = _feature_spec(args)
    config = {
        "subcommand": "pipeline",
        "manifest": args.manifest,
        "iou_threshold": args.iou_threshold,
        "bins": args.bins,
        "features": spec.names,
        "confidence_transform": spec.confidence_transform,
        "lambda_reg": args.lambda_reg,
        "fit_fraction": args.fit_fraction,
        "with_prior_term": args.with_prior_term,
        "seed": args.seed,
    }
    write_config(os.path.join(args.out, "config.json"), config)

    rows = metrics_report_rows(scoped + [("ALL", aggregate(s for _, s in scoped))])
    write_report(os.path.join(args.out, "metrics.csv"), METRICS_HEADER, rows, config, args.format)

    fit_part, test_part = _split_labeled(labeled, args.fit_fraction, args.seed)
    model = _fit_model(fit_part, spec, args)
    ann.save_model(model, os.path.join(args.out, "model.txt"))

    test_dets = [d for d, _ in test_part]
    test_correct = [k for _, k in test_part]
    calibrated = calibrate_detections(model, test_dets)

    bins_pre = bin_outcomes(
        [(d.confidence, k) for d, k in zip(test_dets, test_correct)], args.bins
    )
    bins_post = bin_outcomes(
        [(d.confidence, k) for d, k in zip(calibrated, test_correct)], args.bins
    )
    ece_pre = expected_calibration_error(bins_pre)
    ece_post = expected_calibration_error(bins_post)

    write_report(
        os.path.join(args.out, "reliability_uncalibrated.csv"),
        RELIABILITY_HEADER, reliability_report_rows(bins_pre), config, args.format,
    )
    write_report(
        os.path.join(args.out, "reliability_calibrated.csv"),
        RELIABILITY_HEADER, reliability_report_rows(bins_post), config, args.format,
    )
    summary_rows = [
        ("ece", repr(ece_pre)),
        ("calibrated_ece", repr(ece_post)),
        ("before_after_delta", repr(ece_pre - ece_post)),
        ("n_fit", len(fit_part)),
        ("n_test", len(test_part)),
    ]
    write_report(
        os.path.join(args.out, "ece_summary.csv"),
        ["key", "value"], summary_rows, config, args.format,
    )
    if not args.no_figures:
        plots.save_reliability_diagram(
            bins_pre, os.path.join(args.out, "reliability_uncalibrated.png"),
            title="Reliability (uncalibrated)",
        )
        plots.save_reliability_diagram(
            bins_post, os.path.join(args.out, "reliability_calibrated.png"),
            title="Reliability (calibrated)",
        )
        plots.save_ece_comparison(
            [("test split", ece_pre, ece_post)],
            os.path.join(args.out, "ece_comparison.png"),
        )
    print(f"ece {ece_pre:.3f} -> {ece_post:.3f} (reports in {args.out})")
    return 0


def _emit(args, header, rows, config):
    if args.out:
        write_report(args.out, header, rows, config, args.format)
        print(f"wrote {args.out}")
    else:
        from .reports import render_rows

        sys.stdout.write(render_rows(header, rows, config, args.format))


# --- argument parsing -------------------------------------------------------


def _add_dataset_args(p):
    p.add_argument("--manifest", required=True, help="dataset manifest file")
    p.add_argument("--iou-threshold", type=float, default=DEFAULT_IOU_THRESHOLD)


def _add_report_args(p):
    p.add_argument("--format", choices=("csv", "table", "json-lines"), default="csv")
    p.add_argument("--out", default=None)


def _add_calibration_args(p):
    p.add_argument("--features", default="conf,cx,cy",
                   help="comma list from conf,cx,cy,w,h")
    p.add_argument("--logit-confidence", action="store_true")
    p.add_argument("--lambda", dest="lambda_reg", type=float, default=1e-6)
    p.add_argument("--fit-fraction", type=float, default=0.6)
    p.add_argument("--with-prior-term", action="store_true")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detcal",
        description="Evaluate and recalibrate object-detection outputs.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("augment", help="write blurred + flipped copies of a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--blur-length", type=int, default=7)
    p.add_argument("--blur-angle", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("match", help="per-detection match outcomes")
    _add_dataset_args(p)
    _add_report_args(p)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("metrics", help="precision/recall/F1 per image and overall")
    _add_dataset_args(p)
    _add_report_args(p)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("ece", help="expected calibration error of a dataset")
    _add_dataset_args(p)
    _add_report_args(p)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.set_defaults(func=_cmd_ece)

    p = sub.add_parser("reliability", help="reliability table + diagram")
    _add_dataset_args(p)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--format", choices=("csv", "table", "json-lines"), default="csv")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_reliability)

    p = sub.add_parser("calibrate-fit", help="fit the calibration map")
    _add_dataset_args(p)
    _add_calibration_args(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=_cmd_calibrate_fit)

    p = sub.add_parser("calibrate-apply", help="rewrite detections with calibrated scores")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_calibrate_apply)

    p = sub.add_parser("simulate", help="generate a synthetic detection dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-scenes", type=int, default=1000)
    p.add_argument("--truths-min", type=int, default=1)
    p.add_argument("--truths-max", type=int, default=4)
    p.add_argument("--jitter-sigma", type=float, default=0.02)
    p.add_argument("--link", default="identity", help="identity | power:G | affine:A:B")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("pipeline", help="match, split, calibrate, report pre/post ECE")
    _add_dataset_args(p)
    _add_calibration_args(p)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--format", choices=("csv", "table", "json-lines"), default="csv")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DetcalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return 3


def entry_point():
    raise SystemExit(main())
