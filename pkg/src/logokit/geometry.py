"""Axis-aligned box types, overlap metrics, and box-regression losses.

Two box representations are used throughout the toolkit:

- :class:`Box` — corner form ``(xmin, ymin, xmax, ymax)``; the annotation and
  evaluation unit. Zero-area boxes are allowed, negative extents are not.
- :class:`CenterBox` — center form ``(cx, cy, w, h)`` with strictly positive
  sizes; the regression unit for the CIoU loss and its gradient.

All arithmetic is double precision. Functions are pure and safe for
unrestricted parallel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

__all__ = [
    "Box",
    "CenterBox",
    "OverlapBreakdown",
    "iou",
    "giou",
    "diou",
    "ciou_breakdown",
    "ciou_loss",
    "ciou_loss_gradient",
]


@dataclass(frozen=True)
class Box:
    """Corner-form rectangle in pixel coordinates.

    ``xmax``/``ymax`` are exclusive-edge reals, so ``width = xmax - xmin``.
    Zero-area boxes are permitted; negative extents are rejected.
    """

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if self.xmax < self.xmin or self.ymax < self.ymin:
            raise InputError(
                f"box has negative extent: ({self.xmin}, {self.ymin}, "
                f"{self.xmax}, {self.ymax})"
            )

    def width(self) -> float:
        return self.xmax - self.xmin

    def height(self) -> float:
        return self.ymax - self.ymin

    def area(self) -> float:
        return self.width() * self.height()


@dataclass(frozen=True)
class CenterBox:
    """Center-form rectangle ``(cx, cy, w, h)`` with w > 0 and h > 0."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0.0 and self.h > 0.0):
            raise InputError(
                f"center box needs positive width and height, got "
                f"w={self.w}, h={self.h}"
            )

    def to_box(self) -> Box:
        return Box(
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )

    @classmethod
    def from_box(cls, box: Box) -> "CenterBox":
        return cls(
            (box.xmin + box.xmax) / 2.0,
            (box.ymin + box.ymax) / 2.0,
            box.xmax - box.xmin,
            box.ymax - box.ymin,
        )


@dataclass(frozen=True)
class OverlapBreakdown:
    """All intermediate quantities of the CIoU loss for one box pair."""

    iou: float
    center_distance_sq: float
    enclosing_diagonal_sq: float
    aspect_term_v: float
    tradeoff_alpha: float


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two corner-form boxes, in [0, 1].

    Returns 0 when the union has zero area (two degenerate boxes).
    """
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def giou(a: Box, b: Box) -> float:
    """Generalized IoU metric: IoU minus the enclosing-box slack, in (-1, 1]."""
    iw = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    ih = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = a.area() + b.area() - inter
    cw = max(a.xmax, b.xmax) - min(a.xmin, b.xmin)
    ch = max(a.ymax, b.ymax) - min(a.ymin, b.ymin)
    enclosing = cw * ch
    if union <= 0.0 or enclosing <= 0.0:
        return 0.0
    return inter / union - (enclosing - union) / enclosing


def diou(pred: CenterBox, gt: CenterBox) -> float:
    """Distance IoU metric: IoU minus the normalized center distance."""
    parts = ciou_breakdown(pred, gt)
    return parts.iou - parts.center_distance_sq / parts.enclosing_diagonal_sq


def ciou_breakdown(pred: CenterBox, gt: CenterBox) -> OverlapBreakdown:
    """Compute every term of the CIoU loss for a predicted/target pair.

    Returns the IoU, the squared center distance, the squared diagonal of the
    smallest enclosing box, the aspect-consistency term
    ``v = (4/pi^2) * (arctan(w_gt/h_gt) - arctan(w/h))^2``, and the trade-off
    weight ``alpha = v / ((1 - iou) + v)`` (0 when that denominator is 0).
    """
    x1, y1 = pred.cx - pred.w / 2.0, pred.cy - pred.h / 2.0
    x2, y2 = pred.cx + pred.w / 2.0, pred.cy + pred.h / 2.0
    gx1, gy1 = gt.cx - gt.w / 2.0, gt.cy - gt.h / 2.0
    gx2, gy2 = gt.cx + gt.w / 2.0, gt.cy + gt.h / 2.0

    iw = min(x2, gx2) - max(x1, gx1)
    ih = min(y2, gy2) - max(y1, gy1)
    inter = iw * ih if (iw > 0.0 and ih > 0.0) else 0.0
    union = (x2 - x1) * (y2 - y1) + (gx2 - gx1) * (gy2 - gy1) - inter
    iou_val = inter / union

    dist_sq = (pred.cx - gt.cx) ** 2 + (pred.cy - gt.cy) ** 2
    cw = max(x2, gx2) - min(x1, gx1)
    ch = max(y2, gy2) - min(y1, gy1)
    diag_sq = cw * cw + ch * ch

    delta = math.atan(gt.w / gt.h) - math.atan(pred.w / pred.h)
    v = (4.0 / math.pi**2) * delta * delta
    denom = (1.0 - iou_val) + v
    alpha = v / denom if denom > 0.0 else 0.0

    return OverlapBreakdown(
        iou=iou_val,
        center_distance_sq=dist_sq,
        enclosing_diagonal_sq=diag_sq,
        aspect_term_v=v,
        tradeoff_alpha=alpha,
    )


def ciou_loss(pred: CenterBox, gt: CenterBox) -> float:
    """CIoU regression loss: ``1 - IoU + dist^2/diag^2 + alpha * v``.

    Zero exactly when the boxes coincide; each penalty term is bounded by 1,
    so the loss lies in [0, 3].
    """
    parts = ciou_breakdown(pred, gt)
    return (
        (1.0 - parts.iou)
        + parts.center_distance_sq / parts.enclosing_diagonal_sq
        + parts.tradeoff_alpha * parts.aspect_term_v
    )


def _dmin(a: float, b: float) -> float:
    # d min(a, b) / da, with the symmetric subgradient weight 0.5 at exact
    # ties; makes the gradient vanish identically at pred == gt.
    if a < b:
        return 1.0
    return 0.5 if a == b else 0.0


def ciou_loss_gradient(pred: CenterBox, gt: CenterBox) -> np.ndarray:
    """Analytic gradient of :func:`ciou_loss` w.r.t. ``(cx, cy, w, h)`` of pred.

    The trade-off weight alpha is treated as a constant of the forward pass
    (no derivative flows through it), which keeps the gradient bounded as
    IoU approaches 1. Returns a float64 array of shape (4,).
    """
    cx, cy, w, h = pred.cx, pred.cy, pred.w, pred.h
    x1, y1 = cx - w / 2.0, cy - h / 2.0
    x2, y2 = cx + w / 2.0, cy + h / 2.0
    gx1, gy1 = gt.cx - gt.w / 2.0, gt.cy - gt.h / 2.0
    gx2, gy2 = gt.cx + gt.w / 2.0, gt.cy + gt.h / 2.0

    iw = min(x2, gx2) - max(x1, gx1)
    ih = min(y2, gy2) - max(y1, gy1)
    overlapping = iw > 0.0 and ih > 0.0
    inter = iw * ih if overlapping else 0.0
    area_p = (x2 - x1) * (y2 - y1)
    area_g = (gx2 - gx1) * (gy2 - gy1)
    union = area_p + area_g - inter

    # Intersection-width derivatives via min/max selection indicators.
    sx_hi = _dmin(x2, gx2)
    sx_lo = _dmin(gx1, x1)
    sy_hi = _dmin(y2, gy2)
    sy_lo = _dmin(gy1, y1)
    if overlapping:
        di = np.array(
            [
                ih * (sx_hi - sx_lo),
                iw * (sy_hi - sy_lo),
                ih * (sx_hi + sx_lo) / 2.0,
                iw * (sy_hi + sy_lo) / 2.0,
            ]
        )
    else:
        di = np.zeros(4)

    d_area_p = np.array([0.0, 0.0, y2 - y1, x2 - x1])
    d_union = d_area_p - di
    d_iou = (di * union - inter * d_union) / (union * union)

    dx, dy = cx - gt.cx, cy - gt.cy
    dist_sq = dx * dx + dy * dy
    d_dist = np.array([2.0 * dx, 2.0 * dy, 0.0, 0.0])

    # Enclosing-box derivatives use the opposite min/max selections.
    tx_hi = _dmin(gx2, x2)
    tx_lo = _dmin(x1, gx1)
    ty_hi = _dmin(gy2, y2)
    ty_lo = _dmin(y1, gy1)
    cw = max(x2, gx2) - min(x1, gx1)
    ch = max(y2, gy2) - min(y1, gy1)
    diag_sq = cw * cw + ch * ch
    d_diag = np.array(
        [
            2.0 * cw * (tx_hi - tx_lo),
            2.0 * ch * (ty_hi - ty_lo),
            cw * (tx_hi + tx_lo),
            ch * (ty_hi + ty_lo),
        ]
    )
    d_ratio = (d_dist * diag_sq - dist_sq * d_diag) / (diag_sq * diag_sq)

    delta = math.atan(gt.w / gt.h) - math.atan(w / h)
    v = (4.0 / math.pi**2) * delta * delta
    iou_val = inter / union
    denom = (1.0 - iou_val) + v
    alpha = v / denom if denom > 0.0 else 0.0
    size_sq = w * w + h * h
    d_v = np.array(
        [
            0.0,
            0.0,
            -8.0 * delta * h / (math.pi**2 * size_sq),
            8.0 * delta * w / (math.pi**2 * size_sq),
        ]
    )

    return -d_iou + d_ratio + alpha * d_v
