"""Focal classification loss and the combined detection loss over a batch.

The focal loss is the binary form: for a positive label the penalty is
``-alpha * (1 - p)^beta * log(p)`` and for a negative label
``-(1 - alpha) * p^beta * log(1 - p)``. Probabilities are clamped to
``[1e-7, 1 - 1e-7]`` before the logarithm so every admissible input yields a
finite value.

``batch_loss`` combines the focal term (summed over anchors and classes,
normalized by the positive count with a floor of 1) with the mean CIoU
regression loss over positive anchors, weighted by ``lambda_reg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InputError
from .geometry import CenterBox, ciou_loss

__all__ = [
    "PROB_CLAMP",
    "FocalParams",
    "AnchorAssignment",
    "LossReport",
    "focal_loss",
    "focal_loss_gradient",
    "batch_loss",
]

PROB_CLAMP = 1e-7  # keeps log() finite; well below every test tolerance


@dataclass(frozen=True)
class FocalParams:
    """Focal-loss hyperparameters: class balance alpha, focusing power beta."""

    alpha: float = 0.25
    beta: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.beta < 0.0:
            raise InputError(f"beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class AnchorAssignment:
    """One anchor's prediction plus its matching target, if any.

    Positive assignments carry a target class index and a target box;
    negative assignments carry neither. ``predicted_class_prob`` holds one
    post-activation probability per class.
    """

    anchor_index: int
    is_positive: bool
    predicted_class_prob: Sequence[float]
    predicted_box: CenterBox
    target_class: Optional[int] = None
    target_box: Optional[CenterBox] = None

    def __post_init__(self):
        if self.anchor_index < 0:
            raise InputError(f"anchor_index must be >= 0, got {self.anchor_index}")
        has_targets = self.target_class is not None and self.target_box is not None
        if self.is_positive != has_targets:
            raise InputError(
                "positive assignments need target_class and target_box; "
                "negative assignments must carry neither"
            )
        if self.is_positive and not (
            0 <= self.target_class < len(self.predicted_class_prob)
        ):
            raise InputError(
                f"target_class {self.target_class} out of range for "
                f"{len(self.predicted_class_prob)} classes"
            )
        for p in self.predicted_class_prob:
            if not (0.0 <= p <= 1.0):
                raise InputError(f"class probability {p} outside [0, 1]")


@dataclass(frozen=True)
class LossReport:
    """Classification and regression components of one batch loss."""

    classification_loss: float
    regression_loss: float
    total: float
    num_positives: int


def _clamped(y_prime: float) -> float:
    if not (0.0 <= y_prime <= 1.0):
        raise InputError(f"probability {y_prime} outside [0, 1]")
    return min(max(y_prime, PROB_CLAMP), 1.0 - PROB_CLAMP)


def _check_label(y: int) -> None:
    if y not in (0, 1):
        raise InputError(f"label must be 1 (positive) or 0 (negative), got {y}")


def focal_loss(y_prime: float, y: int, params: FocalParams) -> float:
    """Binary focal loss for one predicted probability and one {1, 0} label."""
    _check_label(y)
    q = _clamped(y_prime)
    if y == 1:
        return -params.alpha * (1.0 - q) ** params.beta * math.log(q)
    return -(1.0 - params.alpha) * q**params.beta * math.log(1.0 - q)


def focal_loss_gradient(y_prime: float, y: int, params: FocalParams) -> float:
    """Derivative of :func:`focal_loss` w.r.t. the predicted probability.

    Evaluated at the clamped probability, so the returned slope is the
    analytic one even when ``y_prime`` sits on the clamp boundary.
    """
    _check_label(y)
    q = _clamped(y_prime)
    a, b = params.alpha, params.beta
    if y == 1:
        grad = -a * (1.0 - q) ** b / q
        if b > 0.0:  # skip the 0 * log term that 0**(b-1) would blow up
            grad += a * b * (1.0 - q) ** (b - 1.0) * math.log(q)
        return grad
    grad = (1.0 - a) * q**b / (1.0 - q)
    if b > 0.0:
        grad += -(1.0 - a) * b * q ** (b - 1.0) * math.log(1.0 - q)
    return grad


def batch_loss(
    assignments: Sequence[AnchorAssignment],
    focal: FocalParams,
    lambda_reg: float = 1.0,
) -> LossReport:
    """Combined focal + CIoU loss over a batch of anchor assignments.

    Every anchor contributes one focal term per class (the positive branch on
    its target class, the negative branch elsewhere); the sum is normalized
    by ``max(num_positives, 1)``. Regression is the mean CIoU loss over
    positive anchors, scaled by ``lambda_reg``. Both reductions use exact
    compensated summation, so the result is independent of assignment order.
    """
    if not assignments:
        raise InputError("batch_loss needs at least one assignment")
    if lambda_reg < 0.0:
        raise InputError(f"lambda_reg must be >= 0, got {lambda_reg}")

    focal_terms = []
    regression_terms = []
    num_positives = 0
    for a in assignments:
        for cls, prob in enumerate(a.predicted_class_prob):
            y = 1 if (a.is_positive and cls == a.target_class) else 0
            focal_terms.append(focal_loss(prob, y, focal))
        if a.is_positive:
            num_positives += 1
            regression_terms.append(ciou_loss(a.predicted_box, a.target_box))

    classification = math.fsum(focal_terms) / max(num_positives, 1)
    if regression_terms:
        regression = lambda_reg * (math.fsum(regression_terms) / num_positives)
    else:
        regression = 0.0
    return LossReport(
        classification_loss=classification,
        regression_loss=regression,
        total=classification + regression,
        num_positives=num_positives,
    )
