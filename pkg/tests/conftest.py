"""Shared fixtures and independent oracles for the test suite.

The oracles here re-derive every checked quantity from first principles with
straight-line code, without calling the library's implementations, so a test
failure always means a real disagreement between two derivations.
"""

from __future__ import annotations

import itertools
import math
import os
import statistics
from io import BytesIO
from typing import List, Sequence, Tuple

import numpy as np
import pytest
from hypothesis import settings
from PIL import Image

from logokit.annotations import ImageRecord, LabeledObject
from logokit.geometry import Box, CenterBox

settings.register_profile("suite", max_examples=60, deadline=None)
settings.load_profile("suite")

LOGODET_ENV = "LOGODET3K_ROOT"


def logodet_root() -> str:
    root = os.environ.get(LOGODET_ENV, "")
    if not root or not os.path.isdir(root):
        pytest.skip(f"{LOGODET_ENV} not set or not a directory; "
                    "dataset-conditional check skipped")
    return root


# ---------------------------------------------------------------------------
# Independent CIoU oracle: straight-line evaluation, no shared helpers.

def oracle_ciou_parts(pred: CenterBox, gt: CenterBox) -> dict:
    px1, px2 = pred.cx - pred.w / 2, pred.cx + pred.w / 2
    py1, py2 = pred.cy - pred.h / 2, pred.cy + pred.h / 2
    gx1, gx2 = gt.cx - gt.w / 2, gt.cx + gt.w / 2
    gy1, gy2 = gt.cy - gt.h / 2, gt.cy + gt.h / 2
    iw = min(px2, gx2) - max(px1, gx1)
    ih = min(py2, gy2) - max(py1, gy1)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = pred.w * pred.h + gt.w * gt.h - inter
    iou = inter / union
    dist2 = (pred.cx - gt.cx) ** 2 + (pred.cy - gt.cy) ** 2
    diag2 = (max(px2, gx2) - min(px1, gx1)) ** 2 + (max(py2, gy2) - min(py1, gy1)) ** 2
    v = 4.0 / math.pi**2 * (math.atan(gt.w / gt.h) - math.atan(pred.w / pred.h)) ** 2
    alpha = v / ((1 - iou) + v) if (1 - iou) + v > 0 else 0.0
    loss = (1 - iou) + dist2 / diag2 + alpha * v
    return {"iou": iou, "dist2": dist2, "diag2": diag2, "v": v,
            "alpha": alpha, "loss": loss}


def fd_ciou_gradient(pred: CenterBox, gt: CenterBox, step: float) -> np.ndarray:
    """Central difference of the oracle loss with alpha frozen at the center
    point (the analytic gradient deliberately does not flow through alpha)."""
    alpha = oracle_ciou_parts(pred, gt)["alpha"]

    def frozen(p: CenterBox) -> float:
        parts = oracle_ciou_parts(p, gt)
        return (1 - parts["iou"]) + parts["dist2"] / parts["diag2"] + alpha * parts["v"]

    grads = np.empty(4)
    base = [pred.cx, pred.cy, pred.w, pred.h]
    for i in range(4):
        lo, hi = list(base), list(base)
        lo[i] -= step
        hi[i] += step
        grads[i] = (frozen(CenterBox(*hi)) - frozen(CenterBox(*lo))) / (2 * step)
    return grads


def draw_clear_pair(rng: np.random.Generator, step_scale: float = 1e-4,
                    guard: float = 16.0) -> Tuple[CenterBox, CenterBox, float]:
    """Random box pair whose finite-difference interval stays on one side of
    every min/max selection boundary."""
    while True:
        cx, cy, gcx, gcy = rng.uniform(0, 512, size=4)
        w, h, gw, gh = rng.uniform(1, 512, size=4)
        step = step_scale * min(w, h, gw, gh)
        x1, x2, y1, y2 = cx - w / 2, cx + w / 2, cy - h / 2, cy + h / 2
        gx1, gx2, gy1, gy2 = gcx - gw / 2, gcx + gw / 2, gcy - gh / 2, gcy + gh / 2
        margins = (abs(x1 - gx1), abs(x2 - gx2), abs(y1 - gy1), abs(y2 - gy2),
                   abs(min(x2, gx2) - max(x1, gx1)),
                   abs(min(y2, gy2) - max(y1, gy1)))
        if min(margins) > guard * step:
            return CenterBox(cx, cy, w, h), CenterBox(gcx, gcy, gw, gh), step


# ---------------------------------------------------------------------------
# Independent AP oracle: each true positive contributes the best precision
# at or beyond its rank.

def oracle_average_precision(flags: Sequence[bool], num_gt: int) -> float:
    best_at_or_after = []
    best = 0.0
    n = len(flags)
    tp_counts = list(itertools.accumulate(1 if f else 0 for f in flags))
    for rank in range(n, 0, -1):
        best = max(best, tp_counts[rank - 1] / rank)
        best_at_or_after.append(best)
    best_at_or_after.reverse()
    total = 0.0
    for rank, flag in enumerate(flags, start=1):
        if flag:
            total += best_at_or_after[rank - 1]
    return total / num_gt


def oracle_greedy_flags(dets: Sequence[Tuple[float, Box]],
                        gts: Sequence[Box], threshold: float) -> List[bool]:
    """Independent greedy matcher: score-descending, best free GT, IoU >=
    threshold, one-to-one. Returns flags in score order."""

    def box_iou(a: Box, b: Box) -> float:
        iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
        ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        union = ((a.xmax - a.xmin) * (a.ymax - a.ymin)
                 + (b.xmax - b.xmin) * (b.ymax - b.ymin) - inter)
        return inter / union

    order = sorted(range(len(dets)), key=lambda i: (-dets[i][0], i))
    free = set(range(len(gts)))
    flags = []
    for i in order:
        best_iou, best_g = 0.0, None
        for g in sorted(free):
            overlap = box_iou(dets[i][1], gts[g])
            if overlap > best_iou:
                best_iou, best_g = overlap, g
        if best_g is not None and best_iou >= threshold:
            free.discard(best_g)
            flags.append(True)
        else:
            flags.append(False)
    return flags


# ---------------------------------------------------------------------------
# Brute-force clustering oracle: best Avg-IoU over all partitions of the
# samples into at most k clusters, scoring component-wise median centers.

def oracle_best_partition_avg_iou(shapes: Sequence[Tuple[float, float]],
                                  k: int) -> float:
    def pair_iou(a, b):
        overlap = min(a[0], b[0]) * min(a[1], b[1])
        return overlap / (a[0] * a[1] + b[0] * b[1] - overlap)

    def score(assign: Sequence[int]) -> float:
        centers = []
        for cluster in range(max(assign) + 1):
            members = [shapes[i] for i, a in enumerate(assign) if a == cluster]
            centers.append((statistics.median(m[0] for m in members),
                            statistics.median(m[1] for m in members)))
        return sum(max(pair_iou(s, c) for c in centers) for s in shapes) / len(shapes)

    n = len(shapes)
    best = 0.0

    def grow(assign: List[int], used: int):
        nonlocal best
        if len(assign) == n:
            best = max(best, score(assign))
            return
        for cluster in range(min(used + 1, k)):
            assign.append(cluster)
            grow(assign, max(used, cluster + 1))
            assign.pop()

    grow([], 0)
    return best


# ---------------------------------------------------------------------------
# Fixture builders.

def voc_xml(width: int, height: int, objects: Sequence[Tuple[str, float, float, float, float]],
            path: str = "") -> bytes:
    parts = ["<annotation>"]
    if path:
        parts.append(f"<path>{path}</path>")
    parts.append(f"<size><width>{width}</width><height>{height}</height></size>")
    for name, xmin, ymin, xmax, ymax in objects:
        parts.append(
            f"<object><name>{name}</name><bndbox>"
            f"<xmin>{xmin}</xmin><ymin>{ymin}</ymin>"
            f"<xmax>{xmax}</xmax><ymax>{ymax}</ymax>"
            f"</bndbox></object>"
        )
    parts.append("</annotation>")
    return "\n".join(parts).encode("utf-8")


def patterned_image_bytes(seed: int, size: Tuple[int, int] = (320, 320),
                          fmt: str = "PNG", quality: int = 95) -> bytes:
    """A deterministic, structured test image: random 16px blocks plus a
    gradient, so perceptual hashes carry real signal."""
    rng = np.random.default_rng(seed)
    w, h = size
    blocks = rng.integers(0, 256, (h // 16 + 1, w // 16 + 1, 3), dtype=np.uint8)
    arr = np.kron(blocks, np.ones((16, 16, 1), dtype=np.uint8))[:h, :w]
    ramp = np.linspace(0, 80, w, dtype=np.uint8)[None, :, None]
    arr = np.clip(arr.astype(np.int16) + ramp, 0, 255).astype(np.uint8)
    buf = BytesIO()
    img = Image.fromarray(arr)
    if fmt.upper() == "JPEG":
        img.save(buf, fmt, quality=quality)
    else:
        img.save(buf, fmt)
    return buf.getvalue()


def make_record(path: str, width: int = 400, height: int = 400,
                objects: Sequence[Tuple[str, float, float, float, float]] = (),
                content_digest: str = None,
                perceptual_digest: int = None) -> ImageRecord:
    return ImageRecord(
        path=path,
        width=width,
        height=height,
        objects=tuple(
            LabeledObject(category=name, box=Box(x0, y0, x1, y1))
            for name, x0, y0, x1, y1 in objects
        ),
        content_digest=content_digest,
        perceptual_digest=perceptual_digest,
    )
