"""Command-line entry point: ``logokit {filter,stats,anchors,eval,losscheck}``.

Exit codes: 0 on success, 1 on any input or validation problem (including
usage errors and a failed losscheck), 2 on an internal fault. Errors are a
single machine-parsable line on stderr, prefixed ``logokit: error:``.

Every output file is written atomically (temp file in the target directory,
then rename), so a failing run never leaves a partial artifact. A config
file of ``key=value`` lines may supply defaults for the invoked subcommand;
explicit flags always win. All randomness derives from the single ``--seed``
value. Repeating an invocation with identical inputs, flags, and seed
produces byte-identical outputs, whatever ``--threads`` says.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import annotations as ann
from . import evaluation as ev
from .anchors import ShapeSample, anchor_count_sweep, kmeans_anchors
from .errors import InputError, ToolkitError
from .gradcheck import run_gradient_check
from .geometry import Box
from .stats import compute_stats, size_bin_fractions

__all__ = ["main", "run", "parse_sweep"]

_IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp")


class _UsageError(InputError):
    """Bad argv; carries the usage line to echo."""

    def __init__(self, message: str, usage: str):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; the toolkit reserves 2 for
    # internal faults, so route usage problems through the exit-1 path.
    def error(self, message):
        raise _UsageError(message, self.format_usage().rstrip("\n"))


def parse_sweep(text: str, what: str = "sweep") -> List[float]:
    """Parse ``start:stop:step`` into an inclusive list of values.

    Values are rounded to 10 decimals so accumulated float steps land
    exactly on the grid (0.5:0.8:0.05 yields 7 points ending at 0.8).
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"{what} must look like start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise InputError(f"{what} has a non-numeric part: {exc}") from exc
    if step <= 0.0:
        raise InputError(f"{what} step must be positive, got {step}")
    if stop < start:
        raise InputError(f"{what} stop {stop} is below start {start}")
    values = []
    index = 0
    while True:
        value = round(start + index * step, 10)
        if value > stop + 1e-9:
            break
        values.append(value)
        index += 1
    return values


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic_write(path, text.encode("utf-8"))


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def _csv_text(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {what} {path!r}: {exc}") from exc


def _read_bytes(path: Path, what: str) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {what} {path!r}: {exc}") from exc


def _load_vocab(path: str) -> ann.Vocabulary:
    try:
        return ann.Vocabulary.from_json(_read_text(path, "vocabulary"))
    except json.JSONDecodeError as exc:
        raise InputError(f"vocabulary {path!r} is not valid JSON: {exc}") from exc


def _load_manifest(path: str) -> List[ann.ImageRecord]:
    return ann.read_manifest(_read_text(path, "manifest"))


def _build_parser() -> Tuple[_Parser, Dict[str, _Parser]]:
    parser = _Parser(prog="logokit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    subparsers: Dict[str, _Parser] = {}

    def common(p: _Parser) -> None:
        p.add_argument("--config", help="key=value file of defaults for this "
                                        "subcommand; flags override it")
        p.add_argument("--seed", type=int, help="master seed (default 0)")

    p = subparsers["filter"] = sub.add_parser(
        "filter", help="parse, digest, filter, and optionally split an "
        "annotated image tree")
    common(p)
    p.add_argument("--input", help="directory tree of images + VOC XML files")
    p.add_argument("--vocab", help="JSON file: category -> super-class")
    p.add_argument("--min-dim", type=int, help="reject images with a side "
                   "below this (default 300)")
    p.add_argument("--max-aspect", type=float, help="reject images with "
                   "side ratio above this (default 3.0)")
    p.add_argument("--dedup-threshold", type=int, help="max perceptual-hash "
                   "Hamming distance treated as duplicate (default 4)")
    p.add_argument("--report-out", help="where to write the filter report JSON")
    p.add_argument("--manifest-out", help="where to write the kept-record "
                   "JSON-lines manifest")
    p.add_argument("--split-fraction", type=float, help="also split the kept "
                   "records; fraction sent to test")
    p.add_argument("--trainval-out", help="path-list output for the trainval "
                   "half of the split")
    p.add_argument("--test-out", help="path-list output for the test half "
                   "of the split")
    p.add_argument("--threads", type=int, help="parallel workers for parsing "
                   "and digesting (default 1; output is identical regardless)")

    p = subparsers["stats"] = sub.add_parser(
        "stats", help="dataset statistics from a manifest")
    common(p)
    p.add_argument("--manifest", help="JSON-lines manifest of ImageRecords")
    p.add_argument("--vocab", help="JSON file: category -> super-class")
    p.add_argument("--out-dir", help="directory for the four stats artifacts")

    p = subparsers["anchors"] = sub.add_parser(
        "anchors", help="k-means anchor shapes from a manifest")
    common(p)
    p.add_argument("--manifest", help="JSON-lines manifest of ImageRecords")
    p.add_argument("--k", type=int, help="number of anchors (default 9)")
    p.add_argument("--k-sweep", help="start:stop:step sweep over k "
                   "(inclusive endpoints)")
    p.add_argument("--max-iter", type=int, help="Lloyd iteration cap "
                   "(default 300)")
    p.add_argument("--center-update", choices=["median", "mean"],
                   help="cluster-center statistic (default median)")
    p.add_argument("--out", help="anchor-set JSON output path")
    p.add_argument("--sweep-out", help="CSV output path for the sweep curve")

    p = subparsers["eval"] = sub.add_parser(
        "eval", help="AP / mAP / PR curves for detections")
    common(p)
    p.add_argument("--detections", help="JSON-lines detections: image_id, "
                   "category, score, xmin, ymin, xmax, ymax")
    p.add_argument("--gt-manifest", help="JSON-lines manifest of ground truth")
    p.add_argument("--iou", type=float, help="IoU match threshold "
                   "(default 0.5)")
    p.add_argument("--sweep", help="start:stop:step IoU-threshold sweep, e.g. "
                   "0.5:0.8:0.05")
    p.add_argument("--interpolation", choices=["all_points", "11point"],
                   help="AP interpolation rule (default all_points)")
    p.add_argument("--out", help="report JSON output path")
    p.add_argument("--pr-out", help="directory for per-class PR-curve CSVs")

    p = subparsers["losscheck"] = sub.add_parser(
        "losscheck", help="finite-difference check of the analytic loss "
        "gradients")
    common(p)
    p.add_argument("--samples", type=int, help="random instances to draw "
                   "(default 1000)")
    p.add_argument("--tolerance", type=float, help="max allowed relative "
                   "error (default 1e-4)")
    p.add_argument("--out", help="optional report JSON output path")

    return parser, subparsers


_DEFAULTS: Dict[str, Dict[str, object]] = {
    "filter": {"min_dim": 300, "max_aspect": 3.0, "dedup_threshold": 4,
               "threads": 1, "seed": 0},
    "stats": {"seed": 0},
    "anchors": {"k": 9, "max_iter": 300, "center_update": "median", "seed": 0},
    "eval": {"iou": 0.5, "interpolation": "all_points", "seed": 0},
    "losscheck": {"samples": 1000, "tolerance": 1e-4, "seed": 7},
}

_REQUIRED: Dict[str, Tuple[str, ...]] = {
    "filter": ("input", "vocab", "report_out"),
    "stats": ("manifest", "vocab", "out_dir"),
    "anchors": ("manifest",),
    "eval": ("detections", "gt_manifest"),
    "losscheck": (),
}


def _apply_config(args: argparse.Namespace, parser_actions: Dict[str, argparse.Action]) -> None:
    """Fill unset options from the key=value config file, if any."""
    if not args.config:
        return
    text = _read_text(args.config, "config file")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{args.config}:{lineno}: expected key=value, "
                             f"got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest in ("config", "subcommand") or dest not in parser_actions:
            raise InputError(f"{args.config}:{lineno}: unknown key {key!r} "
                             f"for subcommand {args.subcommand!r}")
        if getattr(args, dest) is not None:
            continue  # explicit flag wins
        action = parser_actions[dest]
        try:
            converted = action.type(value) if action.type else value
        except ValueError as exc:
            raise InputError(f"{args.config}:{lineno}: bad value for "
                             f"{key!r}: {exc}") from exc
        if action.choices and converted not in action.choices:
            raise InputError(f"{args.config}:{lineno}: {key!r} must be one "
                             f"of {list(action.choices)}")
        setattr(args, dest, converted)


def _finalize_args(args: argparse.Namespace, usage: str) -> None:
    for dest, value in _DEFAULTS[args.subcommand].items():
        if getattr(args, dest, None) is None:
            setattr(args, dest, value)
    missing = [dest for dest in _REQUIRED[args.subcommand]
               if getattr(args, dest) is None]
    if missing:
        flags = ", ".join("--" + dest.replace("_", "-") for dest in missing)
        raise _UsageError(f"missing required arguments: {flags}", usage)


def _scan_annotation_files(root: str) -> List[Tuple[Path, Path]]:
    """All (xml, image) pairs under root, sorted by annotation path."""
    base = Path(root)
    if not base.is_dir():
        raise InputError(f"input directory {root!r} does not exist")
    pairs: List[Tuple[Path, Path]] = []
    for xml_path in sorted(base.rglob("*.xml")):
        image_path = None
        for extension in _IMAGE_EXTENSIONS:
            candidate = xml_path.with_suffix(extension)
            if candidate.is_file():
                image_path = candidate
                break
        if image_path is None:
            raise InputError(f"no image alongside annotation {xml_path}")
        pairs.append((xml_path, image_path))
    return pairs


def _ingest_one(pair: Tuple[Path, Path]) -> ann.ImageRecord:
    xml_path, image_path = pair
    record = ann.parse_annotation(_read_bytes(xml_path, "annotation"),
                                  path=str(image_path))
    return ann.compute_digests(record, _read_bytes(image_path, "image"))


def _cmd_filter(args: argparse.Namespace) -> int:
    vocab = _load_vocab(args.vocab)
    cfg = ann.FilterConfig(
        min_dimension=args.min_dim,
        max_aspect_ratio=args.max_aspect,
        dedup_hamming_threshold=args.dedup_threshold,
    )
    if args.threads < 1:
        raise InputError(f"--threads must be >= 1, got {args.threads}")
    pairs = _scan_annotation_files(args.input)
    if args.threads == 1:
        records = [_ingest_one(pair) for pair in pairs]
    else:
        # executor.map preserves input order, so worker count cannot change
        # the record sequence the serial filter pass sees.
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            records = list(pool.map(_ingest_one, pairs))

    kept, report = ann.apply_filters(records, vocab, cfg)
    report_obj = {
        "total": report.total,
        "kept": report.kept,
        "rejected_by_rule": report.rejected_by_rule,
        "config": {
            "min_dimension": cfg.min_dimension,
            "max_aspect_ratio": cfg.max_aspect_ratio,
            "dedup_hamming_threshold": cfg.dedup_hamming_threshold,
        },
    }
    _atomic_write_text(Path(args.report_out), _json_dumps(report_obj))
    if args.manifest_out:
        _atomic_write_text(Path(args.manifest_out), ann.write_manifest(kept))

    if args.split_fraction is not None:
        if not (args.trainval_out and args.test_out):
            raise InputError("--split-fraction needs --trainval-out and "
                             "--test-out")
        trainval, test = ann.split_dataset(kept, args.split_fraction,
                                           seed=args.seed)
        _atomic_write_text(Path(args.trainval_out),
                           "".join(r.path + "\n" for r in trainval))
        _atomic_write_text(Path(args.test_out),
                           "".join(r.path + "\n" for r in test))
    print(f"kept {report.kept} of {report.total} images")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    vocab = _load_vocab(args.vocab)
    manifest = _load_manifest(args.manifest)
    result = compute_stats(manifest, vocab)
    out_dir = Path(args.out_dir)

    category_rows = [("category", "super_class", "image_count", "object_count")]
    category_rows += [
        (c.category, c.super_class, c.image_count, c.object_count)
        for c in result.category_stats
    ]
    _atomic_write_text(out_dir / "category_stats.csv", _csv_text(category_rows))

    super_rows = [("super_class", "category_count", "image_count",
                   "object_count")]
    super_rows += [
        (s.super_class, s.category_count, s.image_count, s.object_count)
        for s in result.super_class_stats
    ]
    _atomic_write_text(out_dir / "super_class_stats.csv", _csv_text(super_rows))

    bins = result.size_bins
    if bins.total > 0:
        small_pct, medium_pct, large_pct = size_bin_fractions(bins)
    else:
        small_pct = medium_pct = large_pct = 0.0
    _atomic_write_text(out_dir / "size_bins.json", _json_dumps({
        "small": bins.small,
        "medium": bins.medium,
        "large": bins.large,
        "small_pct": small_pct,
        "medium_pct": medium_pct,
        "large_pct": large_pct,
        "total_categories": result.total_categories,
        "total_images": result.total_images,
        "total_objects": result.total_objects,
        "multi_super_class_images": result.multi_super_class_images,
    }))

    opi_rows = [("objects", "images")]
    opi_rows += list(result.objects_per_image.items())
    _atomic_write_text(out_dir / "objects_per_image.csv", _csv_text(opi_rows))
    print(f"wrote 4 artifacts to {out_dir}")
    return 0


def _manifest_shapes(manifest: List[ann.ImageRecord]) -> Tuple[List[ShapeSample], int]:
    samples: List[ShapeSample] = []
    skipped = 0
    for record in manifest:
        for obj in record.objects:
            w, h = obj.box.width(), obj.box.height()
            if w > 0.0 and h > 0.0:
                samples.append(ShapeSample(w=w, h=h))
            else:
                skipped += 1
    if not samples:
        raise InputError("manifest contains no boxes with positive area")
    return samples, skipped


def _cmd_anchors(args: argparse.Namespace) -> int:
    manifest = _load_manifest(args.manifest)
    samples, skipped = _manifest_shapes(manifest)

    anchor_set = kmeans_anchors(samples, args.k, seed=args.seed,
                                max_iter=args.max_iter,
                                center_update=args.center_update)
    result = {
        "k": anchor_set.k,
        "centers": [[shape.w, shape.h] for shape in anchor_set.shapes],
        "avg_iou": anchor_set.avg_iou,
        "num_samples": len(samples),
        "skipped_degenerate": skipped,
    }
    if args.out:
        _atomic_write_text(Path(args.out), _json_dumps(result))
    else:
        sys.stdout.write(_json_dumps(result))

    if args.k_sweep:
        if not args.sweep_out:
            raise InputError("--k-sweep needs --sweep-out")
        ks = []
        for value in parse_sweep(args.k_sweep, what="--k-sweep"):
            if value != int(value):
                raise InputError("--k-sweep must step through integers, "
                                 f"got {value}")
            ks.append(int(value))
        curve = anchor_count_sweep(samples, ks, seed=args.seed,
                                   max_iter=args.max_iter,
                                   center_update=args.center_update)
        rows = [("k", "avg_iou")] + [(k, value) for k, value in curve]
        _atomic_write_text(Path(args.sweep_out), _csv_text(rows))
    return 0


def _load_detections(path: str) -> List[ev.Detection]:
    detections = []
    for lineno, line in enumerate(_read_text(path, "detections").splitlines(),
                                  start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            detections.append(ev.Detection(
                image_id=obj["image_id"],
                category=obj["category"],
                score=float(obj["score"]),
                box=Box(float(obj["xmin"]), float(obj["ymin"]),
                        float(obj["xmax"]), float(obj["ymax"])),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{path}:{lineno}: bad detection line: {exc}") from exc
    return detections


def _safe_name(category: str, used: set) -> str:
    base = "".join(c if c.isalnum() or c in "._-" else "_" for c in category)
    name = base or "_"
    suffix = 1
    while name in used:
        suffix += 1
        name = f"{base}_{suffix}"
    used.add(name)
    return name


def _cmd_eval(args: argparse.Namespace) -> int:
    detections = _load_detections(args.detections)
    ground_truth = _load_manifest(args.gt_manifest)
    report = ev.evaluate(detections, ground_truth, args.iou,
                         interpolation=args.interpolation)
    result = {
        "iou_threshold": report.iou_threshold,
        "map": report.map,
        "per_class_ap": dict(sorted(report.per_class_ap.items())),
        "no_gt_classes": dict(sorted(report.no_gt_classes.items())),
    }
    if args.sweep:
        thresholds = parse_sweep(args.sweep, what="--sweep")
        sweep = ev.threshold_sweep(detections, ground_truth, thresholds,
                                   interpolation=args.interpolation)
        result["sweep"] = [{"iou_threshold": t, "map": m} for t, m in sweep]
    if args.out:
        _atomic_write_text(Path(args.out), _json_dumps(result))
    else:
        sys.stdout.write(_json_dumps(result))

    if args.pr_out:
        pr_dir = Path(args.pr_out)
        used: set = set()
        for category in sorted(report.pr_curves):
            rows = [("score_threshold", "recall", "precision")]
            rows += [(p.score_threshold, p.recall, p.precision)
                     for p in report.pr_curves[category]]
            _atomic_write_text(pr_dir / f"{_safe_name(category, used)}.csv",
                               _csv_text(rows))
    return 0


def _cmd_losscheck(args: argparse.Namespace) -> int:
    if args.tolerance <= 0.0:
        raise InputError(f"--tolerance must be positive, got {args.tolerance}")
    report = run_gradient_check(args.samples, args.seed,
                                tolerance=args.tolerance)
    result = {
        "samples": report.samples,
        "max_rel_err_ciou": report.max_rel_err_ciou,
        "max_rel_err_focal": report.max_rel_err_focal,
        "tolerance": report.tolerance,
        "pass": report.passed,
    }
    text = _json_dumps(result)
    sys.stdout.write(text)
    if args.out:
        _atomic_write_text(Path(args.out), text)
    return 0 if report.passed else 1


_HANDLERS = {
    "filter": _cmd_filter,
    "stats": _cmd_stats,
    "anchors": _cmd_anchors,
    "eval": _cmd_eval,
    "losscheck": _cmd_losscheck,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, dispatch, and map errors to the exit-code contract."""
    parser, subparsers = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.subcommand:
            raise _UsageError("a subcommand is required",
                              parser.format_usage().rstrip("\n"))
        subparser = subparsers[args.subcommand]
        actions = {a.dest: a for a in subparser._actions
                   if a.dest not in ("help",)}
        _apply_config(args, actions)
        _finalize_args(args, subparser.format_usage().rstrip("\n"))
        return _HANDLERS[args.subcommand](args)
    except _UsageError as exc:
        print(exc.usage, file=sys.stderr)
        print(f"logokit: error: {exc}", file=sys.stderr)
        return 1
    except (InputError, ToolkitError) as exc:
        print(f"logokit: error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 1
    except Exception as exc:  # internal fault: anything not raised on purpose
        print(f"logokit: internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
