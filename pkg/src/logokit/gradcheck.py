"""Finite-difference verification of the analytic loss gradients.

Draws random box pairs and probabilities from a seeded stream, compares the
analytic gradients against central finite differences, and reports the worst
relative error seen. Two care points make the difference a valid oracle:

- The box-loss gradient deliberately does not flow through the aspect
  trade-off weight alpha (it is a constant of the forward pass), so the
  differenced function freezes alpha at its center-point value. Differencing
  the raw loss would instead measure the full derivative, which the analytic
  gradient intentionally omits.
- The step is sized to the smallest box dimension in play, and draws whose
  difference interval would straddle a min/max selection boundary are
  rejected and redrawn: a central difference across such a kink measures the
  average of two one-sided slopes, not the derivative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InputError
from .geometry import CenterBox, ciou_breakdown, ciou_loss_gradient
from .losses import FocalParams, focal_loss, focal_loss_gradient
from .seeding import derive_rng

__all__ = ["GradCheckReport", "run_gradient_check"]

_BOX_STEP_SCALE = 1e-4  # step = this fraction of the smallest box dimension
_KINK_GUARD = 16.0  # redraw when a selection boundary is this many steps away
_FOCAL_STEP = 1e-6


@dataclass(frozen=True)
class GradCheckReport:
    """Worst-case relative errors from one verification run."""

    samples: int
    max_rel_err_ciou: float
    max_rel_err_focal: float
    tolerance: float
    passed: bool


def _draw_pair(rng: np.random.Generator) -> tuple:
    """One (pred, gt, step) draw clear of every min/max selection boundary."""
    while True:
        cx, cy, gcx, gcy = rng.uniform(0.0, 512.0, size=4)
        w, h, gw, gh = rng.uniform(1.0, 512.0, size=4)
        step = _BOX_STEP_SCALE * min(w, h, gw, gh)
        x1, x2 = cx - w / 2.0, cx + w / 2.0
        y1, y2 = cy - h / 2.0, cy + h / 2.0
        gx1, gx2 = gcx - gw / 2.0, gcx + gw / 2.0
        gy1, gy2 = gcy - gh / 2.0, gcy + gh / 2.0
        iw = min(x2, gx2) - max(x1, gx1)
        ih = min(y2, gy2) - max(y1, gy1)
        margins = (
            abs(x1 - gx1), abs(x2 - gx2), abs(y1 - gy1), abs(y2 - gy2),
            abs(iw), abs(ih),
        )
        if min(margins) > _KINK_GUARD * step:
            return CenterBox(cx, cy, w, h), CenterBox(gcx, gcy, gw, gh), step


def _frozen_alpha_loss(pred: CenterBox, gt: CenterBox, alpha: float) -> float:
    # The surrogate the analytic gradient differentiates: the CIoU loss with
    # the trade-off weight pinned to its center-point value.
    parts = ciou_breakdown(pred, gt)
    return (
        (1.0 - parts.iou)
        + parts.center_distance_sq / parts.enclosing_diagonal_sq
        + alpha * parts.aspect_term_v
    )


def _fd_ciou_gradient(pred: CenterBox, gt: CenterBox, step: float) -> np.ndarray:
    alpha = ciou_breakdown(pred, gt).tradeoff_alpha
    grads = np.empty(4)
    params = [pred.cx, pred.cy, pred.w, pred.h]
    for i in range(4):
        lo, hi = list(params), list(params)
        lo[i] -= step
        hi[i] += step
        f_lo = _frozen_alpha_loss(CenterBox(*lo), gt, alpha)
        f_hi = _frozen_alpha_loss(CenterBox(*hi), gt, alpha)
        grads[i] = (f_hi - f_lo) / (2.0 * step)
    return grads


def _rel_err_vec(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def _rel_err_scalar(analytic: float, numeric: float) -> float:
    scale = max(abs(analytic), abs(numeric), 1e-8)
    return abs(analytic - numeric) / scale


def run_gradient_check(
    samples: int,
    seed: int,
    tolerance: float = 1e-4,
    ciou_gradient: Optional[Callable] = None,
    focal_gradient: Optional[Callable] = None,
) -> GradCheckReport:
    """Verify both analytic gradients on ``samples`` seeded random instances.

    ``ciou_gradient`` / ``focal_gradient`` default to the shipped
    implementations; tests inject corrupted ones as a negative control.
    """
    if samples < 1:
        raise InputError(f"samples must be >= 1, got {samples}")
    ciou_grad = ciou_gradient or ciou_loss_gradient
    focal_grad = focal_gradient or focal_loss_gradient
    rng = derive_rng(seed, "losscheck")
    focal_params = FocalParams()

    worst_ciou = 0.0
    worst_focal = 0.0
    for _ in range(samples):
        pred, gt, step = _draw_pair(rng)
        analytic = np.asarray(ciou_grad(pred, gt), dtype=np.float64)
        numeric = _fd_ciou_gradient(pred, gt, step)
        worst_ciou = max(worst_ciou, _rel_err_vec(analytic, numeric))

        y_prime = float(rng.uniform(0.02, 0.98))
        y = int(rng.integers(0, 2))
        a = focal_grad(y_prime, y, focal_params)
        f_hi = focal_loss(y_prime + _FOCAL_STEP, y, focal_params)
        f_lo = focal_loss(y_prime - _FOCAL_STEP, y, focal_params)
        n = (f_hi - f_lo) / (2.0 * _FOCAL_STEP)
        worst_focal = max(worst_focal, _rel_err_scalar(a, n))

    return GradCheckReport(
        samples=samples,
        max_rel_err_ciou=worst_ciou,
        max_rel_err_focal=worst_focal,
        tolerance=tolerance,
        passed=worst_ciou < tolerance and worst_focal < tolerance,
    )
