#!/usr/bin/env python3
"""Summarize a LogoDet-3K-style annotation tree.

Walks a directory laid out as ``<root>/<super-class>/<brand>/*.xml`` (images
beside the annotations are not read — only the XML is needed for counting),
derives the category -> super-class vocabulary from the directory layout,
and prints the headline dataset numbers: totals, per-super-class rows, and
the small/medium/large object-size distribution. Optionally clusters all
box shapes into k anchors and saves the parsed manifest for reuse with the
``logokit`` CLI.

Example:
    python3 scripts/dataset_report.py --root /data/LogoDet-3K
    python3 scripts/dataset_report.py --root /data/LogoDet-3K \
        --anchors 9 --manifest-out logodet3k.jsonl
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from logokit.annotations import (SUPER_CLASSES, ImageRecord, Vocabulary,
                                 parse_annotation, write_manifest)
from logokit.anchors import ShapeSample, kmeans_anchors
from logokit.stats import compute_stats, size_bin_fractions

_PROGRESS_EVERY = 20_000


def load_tree(root: Path) -> Tuple[List[ImageRecord], Vocabulary]:
    """Parse every annotation under root; vocabulary from directory names."""
    records: List[ImageRecord] = []
    vocab_map: Dict[str, str] = {}
    xml_paths = sorted(root.rglob("*.xml"))
    if not xml_paths:
        raise SystemExit(f"no .xml annotations under {root}")
    for count, xml_path in enumerate(xml_paths, start=1):
        record = parse_annotation(xml_path.read_bytes(), path=str(xml_path))
        records.append(record)
        super_class = next((part for part in
                            xml_path.relative_to(root).parts
                            if part in SUPER_CLASSES), None)
        if super_class is None:
            raise SystemExit(f"no super-class directory above {xml_path}; "
                             f"expected one of {', '.join(SUPER_CLASSES)}")
        for obj in record.objects:
            vocab_map.setdefault(obj.category, super_class)
        if count % _PROGRESS_EVERY == 0:
            print(f"  parsed {count}/{len(xml_paths)} annotations",
                  file=sys.stderr)
    return records, Vocabulary(vocab_map)


def print_report(records: List[ImageRecord], vocab: Vocabulary) -> None:
    result = compute_stats(records, vocab)
    print(f"categories {result.total_categories}  "
          f"images {result.total_images}  objects {result.total_objects}")
    print()
    print(f"{'super-class':<15} {'categories':>10} {'images':>8} {'objects':>8}")
    for row in result.super_class_stats:
        print(f"{row.super_class:<15} {row.category_count:>10} "
              f"{row.image_count:>8} {row.object_count:>8}")
    print()
    small, medium, large = size_bin_fractions(result.size_bins)
    print(f"object sizes: small {small:.2f}%  medium {medium:.2f}%  "
          f"large {large:.2f}%")
    if result.multi_super_class_images:
        print(f"images spanning several super-classes: "
              f"{result.multi_super_class_images}")


def print_anchors(records: List[ImageRecord], k: int, seed: int) -> None:
    samples = [ShapeSample(obj.box.width(), obj.box.height())
               for record in records for obj in record.objects
               if obj.box.width() > 0.0 and obj.box.height() > 0.0]
    started = time.perf_counter()
    anchors = kmeans_anchors(samples, k, seed=seed)
    elapsed = time.perf_counter() - started
    centers = ", ".join(f"({shape.w:.0f}, {shape.h:.0f})"
                        for shape in anchors.shapes)
    print()
    print(f"k={k} anchors on {len(samples)} shapes "
          f"({elapsed:.1f}s): {centers}")
    print(f"avg_iou = {anchors.avg_iou:.4f}")


def main(argv: Sequence[str] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Parse a LogoDet-3K-style tree and print dataset "
                    "statistics.")
    parser.add_argument("--root", required=True,
                        help="dataset root: <root>/<super-class>/<brand>/*.xml")
    parser.add_argument("--anchors", type=int, metavar="K",
                        help="also cluster all box shapes into K anchors")
    parser.add_argument("--seed", type=int, default=0,
                        help="clustering seed (default: %(default)s)")
    parser.add_argument("--manifest-out",
                        help="save the parsed records as a JSON-lines "
                             "manifest for the logokit CLI")
    args = parser.parse_args(argv)

    root = Path(args.root)
    if not root.is_dir():
        raise SystemExit(f"--root {root} is not a directory")

    started = time.perf_counter()
    records, vocab = load_tree(root)
    print(f"parsed {len(records)} annotations in "
          f"{time.perf_counter() - started:.1f}s")
    print()
    print_report(records, vocab)
    if args.anchors is not None:
        print_anchors(records, args.anchors, args.seed)
    if args.manifest_out:
        Path(args.manifest_out).write_text(write_manifest(records))
        print(f"\nwrote {args.manifest_out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
