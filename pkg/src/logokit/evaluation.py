"""Detection evaluation: greedy matching, per-class AP, mAP, and PR curves.

Matching is score-greedy and one-to-one: detections are processed in score
order (ties broken by input order) and each takes the ground-truth box it
overlaps best, provided that box is still free and the IoU clears the
threshold (the boundary is inclusive: IoU equal to the threshold matches).

AP uses the all-points interpolation — the exact area under the precision
envelope over recall — with the 11-point variant available via
``interpolation="11point"``. mAP averages AP over classes that have at least
one ground-truth object; detections for classes with no ground truth count
as false positives of their own class and are reported separately, never
averaged in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .annotations import ImageRecord
from .errors import InputError
from .geometry import Box, iou

__all__ = [
    "Detection",
    "PRPoint",
    "EvalReport",
    "match_detections",
    "average_precision",
    "evaluate",
    "threshold_sweep",
]


@dataclass(frozen=True)
class Detection:
    """One predicted object: image id, category, confidence, and box."""

    image_id: str
    category: str
    score: float
    box: Box

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise InputError(f"detection score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class PRPoint:
    """One point on a precision-recall curve, tagged with its score cutoff."""

    recall: float
    precision: float
    score_threshold: float


@dataclass(frozen=True)
class EvalReport:
    """Per-class AP, their mean, PR curves, and unmatched-class FP counts."""

    iou_threshold: float
    per_class_ap: Dict[str, float]
    map: float
    pr_curves: Dict[str, List[PRPoint]]
    no_gt_classes: Dict[str, int]


def match_detections(
    detections: Sequence[Detection],
    ground_truths: Sequence[Box],
    iou_threshold: float,
) -> List[Tuple[Detection, bool]]:
    """Greedy one-to-one matching for one image and one class.

    Returns (detection, matched) pairs in score-descending order (ties keep
    input order). Each detection takes the free ground truth it overlaps
    best when that IoU is >= the threshold; every ground truth matches at
    most once.
    """
    _check_threshold(iou_threshold)
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))
    taken = [False] * len(ground_truths)
    result: List[Tuple[Detection, bool]] = []
    for i in order:
        det = detections[i]
        best_iou, best_gt = 0.0, -1
        for g, gt_box in enumerate(ground_truths):
            if taken[g]:
                continue
            overlap = iou(det.box, gt_box)
            if overlap > best_iou:
                best_iou, best_gt = overlap, g
        matched = best_gt >= 0 and best_iou >= iou_threshold
        if matched:
            taken[best_gt] = True
        result.append((det, matched))
    return result


def average_precision(
    matched_flags: Sequence[bool],
    num_gt: int,
    interpolation: str = "all_points",
) -> float:
    """AP from score-ordered match flags and the ground-truth count.

    ``all_points`` integrates the precision envelope over recall exactly;
    ``11point`` averages the envelope at recalls 0.0, 0.1, ..., 1.0.
    """
    if num_gt < 1:
        raise InputError("average_precision needs num_gt >= 1; classes "
                         "without ground truth are excluded upstream")
    if interpolation not in ("all_points", "11point"):
        raise InputError(f"unknown interpolation {interpolation!r}")
    if not matched_flags:
        return 0.0

    flags = np.asarray(matched_flags, dtype=bool)
    tp = np.cumsum(flags)
    ranks = np.arange(1, len(flags) + 1)
    precision = tp / ranks
    recall = tp / num_gt

    if interpolation == "11point":
        total = 0.0
        for level in np.linspace(0.0, 1.0, 11):
            reachable = precision[recall >= level - 1e-12]
            total += reachable.max() if reachable.size else 0.0
        return float(total / 11.0)

    # Precision envelope: monotone non-increasing hull, integrated over the
    # recall steps. Recall is padded to [0, 1] and precision to 0 at both
    # ends so unreached recall contributes nothing.
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    steps = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def evaluate(
    detections: Sequence[Detection],
    ground_truth: Sequence[ImageRecord],
    iou_threshold: float = 0.5,
    interpolation: str = "all_points",
) -> EvalReport:
    """Score detections against an annotated manifest at one IoU threshold.

    Detections reference images by the manifest record's ``path``. A
    detection naming an unknown image id is rejected.
    """
    _check_threshold(iou_threshold)
    known_images = {record.path for record in ground_truth}
    for det in detections:
        if det.image_id not in known_images:
            raise InputError(f"detection references unknown image id "
                             f"{det.image_id!r}")

    gt_boxes: Dict[Tuple[str, str], List[Box]] = {}
    gt_count: Dict[str, int] = {}
    for record in ground_truth:
        for obj in record.objects:
            gt_boxes.setdefault((record.path, obj.category), []).append(obj.box)
            gt_count[obj.category] = gt_count.get(obj.category, 0) + 1

    det_by_class: Dict[str, List[Tuple[int, Detection]]] = {}
    for index, det in enumerate(detections):
        det_by_class.setdefault(det.category, []).append((index, det))

    per_class_ap: Dict[str, float] = {}
    pr_curves: Dict[str, List[PRPoint]] = {}
    no_gt_classes: Dict[str, int] = {}

    for category in sorted(set(gt_count) | set(det_by_class)):
        class_dets = det_by_class.get(category, [])
        if category not in gt_count:
            no_gt_classes[category] = len(class_dets)
            continue

        # Match per image, then order all flags by (score desc, input order)
        # to build the class-wide PR sequence.
        scored: List[Tuple[float, int, bool]] = []
        by_image: Dict[str, List[Tuple[int, Detection]]] = {}
        for index, det in class_dets:
            by_image.setdefault(det.image_id, []).append((index, det))
        for image_id, entries in by_image.items():
            ordered = sorted(entries, key=lambda e: (-e[1].score, e[0]))
            matches = match_detections(
                [det for _, det in ordered],
                gt_boxes.get((image_id, category), []),
                iou_threshold,
            )
            for (index, _), (det, matched) in zip(ordered, matches):
                scored.append((det.score, index, matched))
        scored.sort(key=lambda item: (-item[0], item[1]))
        flags = [matched for _, _, matched in scored]

        per_class_ap[category] = average_precision(
            flags, gt_count[category], interpolation=interpolation
        )
        curve: List[PRPoint] = []
        tp = 0
        for rank, (score, _, matched) in enumerate(scored, start=1):
            tp += 1 if matched else 0
            curve.append(
                PRPoint(
                    recall=tp / gt_count[category],
                    precision=tp / rank,
                    score_threshold=score,
                )
            )
        pr_curves[category] = curve

    mean_ap = (
        sum(per_class_ap.values()) / len(per_class_ap) if per_class_ap else 0.0
    )
    return EvalReport(
        iou_threshold=iou_threshold,
        per_class_ap=per_class_ap,
        map=mean_ap,
        pr_curves=pr_curves,
        no_gt_classes=no_gt_classes,
    )


def threshold_sweep(
    detections: Sequence[Detection],
    ground_truth: Sequence[ImageRecord],
    thresholds: Sequence[float],
    interpolation: str = "all_points",
) -> List[Tuple[float, float]]:
    """mAP at each IoU threshold; returns [(threshold, mAP), ...]."""
    if not len(thresholds):
        raise InputError("threshold_sweep needs at least one threshold")
    return [
        (t, evaluate(detections, ground_truth, t, interpolation=interpolation).map)
        for t in thresholds
    ]


def _check_threshold(iou_threshold: float) -> None:
    if not 0.0 < iou_threshold < 1.0:
        raise InputError(f"iou threshold must lie in (0, 1), got {iou_threshold}")
