"""Anchor design: k-means over box shapes under the 1 - IoU distance.

Shapes are (width, height) pairs compared as if both rectangles shared one
corner, so only the size matters:

    shape_iou(a, b) = min(wa, wb) * min(ha, hb) / (wa*ha + wb*hb - overlap)

``kmeans_anchors`` runs Lloyd iteration from several deterministic seedings
(farthest-point starts, plus every k-subset on small instances) and keeps the
best center set visited by any run. Each run assigns every sample to its
max-IoU center and recomputes centers as the component-wise median of their
members (mean available via ``center_update="mean"``). The clustering quality
score is the Avg-IoU objective: the mean over samples of their best IoU
against the anchor set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InputError

__all__ = [
    "AnchorShape",
    "ShapeSample",
    "AnchorSet",
    "shape_iou",
    "avg_iou_objective",
    "kmeans_anchors",
    "anchor_count_sweep",
]


@dataclass(frozen=True)
class AnchorShape:
    """A cluster-center (width, height) pair in pixels."""

    w: float
    h: float

    def __post_init__(self):
        _require_positive(self.w, self.h)


@dataclass(frozen=True)
class ShapeSample:
    """A ground-truth box's (width, height) in pixels, origin-aligned."""

    w: float
    h: float

    def __post_init__(self):
        _require_positive(self.w, self.h)


@dataclass(frozen=True)
class AnchorSet:
    """A clustered anchor set: k shapes sorted by area ascending, plus score."""

    shapes: tuple
    k: int
    avg_iou: float


def _require_positive(w: float, h: float) -> None:
    if not (w > 0.0 and h > 0.0):
        raise InputError(f"shape extents must be positive, got w={w}, h={h}")


def shape_iou(a, b) -> float:
    """IoU of two rectangles compared by size alone, in (0, 1]."""
    _require_positive(a.w, a.h)
    _require_positive(b.w, b.h)
    overlap = min(a.w, b.w) * min(a.h, b.h)
    return overlap / (a.w * a.h + b.w * b.h - overlap)


def _as_array(shapes: Iterable, what: str) -> np.ndarray:
    arr = np.array([(s.w, s.h) for s in shapes], dtype=np.float64)
    if arr.size == 0:
        raise InputError(f"{what} must be non-empty")
    if not np.all(arr > 0.0):
        raise InputError(f"{what} must have positive extents")
    return arr


def _iou_matrix(samples: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (N, k) matrix of shape_iou between every sample and every center.
    sw, sh = samples[:, 0:1], samples[:, 1:2]
    cw, ch = centers[:, 0], centers[:, 1]
    overlap = np.minimum(sw, cw) * np.minimum(sh, ch)
    return overlap / (sw * sh + cw * ch - overlap)


def avg_iou_objective(
    samples: Sequence[ShapeSample],
    anchors: Union[AnchorSet, Sequence[AnchorShape]],
) -> float:
    """Mean over samples of their best shape IoU against the anchor set."""
    shapes = anchors.shapes if isinstance(anchors, AnchorSet) else anchors
    sample_arr = _as_array(samples, "samples")
    center_arr = _as_array(shapes, "anchors")
    best = _iou_matrix(sample_arr, center_arr).max(axis=1)
    return float(np.mean(best))


def _farthest_point_seed(samples: np.ndarray, k: int, start: int) -> np.ndarray:
    """Deterministic seeding: start at the given index, then repeatedly take
    the sample with the smallest best-IoU against the centers chosen so far."""
    chosen = [start]
    best_iou = _iou_matrix(samples, samples[chosen])[:, 0]
    while len(chosen) < k:
        nxt = int(np.argmin(best_iou))
        chosen.append(nxt)
        best_iou = np.maximum(best_iou, _iou_matrix(samples, samples[[nxt]])[:, 0])
    return samples[chosen].copy()


# Instances with at most this many k-subsets get every subset tried as an
# initial center set, which is what makes small clustering problems land
# within a hair of the exhaustive-search optimum.
_SUBSET_SEED_BUDGET = 64


def _score(sample_arr: np.ndarray, centers: np.ndarray) -> float:
    return float(_iou_matrix(sample_arr, centers).max(axis=1).mean())


def _lloyd_run(sample_arr: np.ndarray, centers: np.ndarray, k: int,
               max_iter: int, reduce_fn) -> tuple:
    """One Lloyd run from the given seed centers.

    The median update is not guaranteed to improve the Avg-IoU objective, so
    every center set visited along the way is scored and the best one is
    returned rather than only the final iterate.
    """
    n = len(sample_arr)
    best_centers, best_score = centers.copy(), -1.0
    assign = None
    for _ in range(max_iter):
        ious = _iou_matrix(sample_arr, centers)
        score = float(ious.max(axis=1).mean())
        if score > best_score:
            best_centers, best_score = centers.copy(), score
        new_assign = np.argmax(ious, axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            return best_centers, best_score
        assign = new_assign
        covered = ious[np.arange(n), assign]
        for ci in range(k):
            members = sample_arr[assign == ci]
            if len(members) == 0:
                # Re-seed a dead center from the farthest (worst-covered)
                # sample and claim it so two dead centers never grab the same
                # one.
                worst = int(np.argmin(covered))
                centers[ci] = sample_arr[worst]
                covered[worst] = 1.0
            else:
                centers[ci] = reduce_fn(members, axis=0)
    # max_iter exhausted: the last update has not been scored yet.
    score = _score(sample_arr, centers)
    if score > best_score:
        best_centers, best_score = centers.copy(), score
    return best_centers, best_score


def kmeans_anchors(
    samples: Sequence[ShapeSample],
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    center_update: str = "median",
    restarts: int = 10,
) -> AnchorSet:
    """Cluster sample shapes into k anchors under the 1 - shape_iou distance.

    Lloyd iteration: assign every sample to its max-IoU center (ties go to
    the lowest center index), then move each center to the component-wise
    median of its members. A center left with no members is re-seeded from
    the sample currently farthest from every center. Each run stops when the
    assignment vector is unchanged or after ``max_iter`` rounds.

    The 1 - IoU distance gives Lloyd iteration no monotonicity guarantee, so
    the search keeps the best-scoring center set it ever visits and restarts
    from several seedings: ``min(restarts, len(samples))`` deterministic
    farthest-point seedings (start indices ``seed``, ``seed + 1``, ... modulo
    the sample count), plus — when the instance is small enough that
    ``comb(len(samples), k)`` is within a fixed budget — every k-subset of the
    samples. The highest Avg-IoU wins; ties keep the earliest candidate.
    Fully deterministic for a fixed (samples order, k, seed, max_iter,
    restarts).
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if center_update not in ("median", "mean"):
        raise InputError(f"center_update must be 'median' or 'mean', got {center_update!r}")
    sample_arr = _as_array(samples, "samples")
    if k > len(sample_arr):
        raise InputError(f"k={k} exceeds the number of samples ({len(sample_arr)})")
    if max_iter < 1:
        raise InputError(f"max_iter must be >= 1, got {max_iter}")
    if restarts < 1:
        raise InputError(f"restarts must be >= 1, got {restarts}")

    n = len(sample_arr)
    reduce_fn = np.median if center_update == "median" else np.mean
    seedings = [_farthest_point_seed(sample_arr, k, (int(seed) + j) % n)
                for j in range(min(restarts, n))]
    if math.comb(n, k) <= _SUBSET_SEED_BUDGET:
        seedings.extend(sample_arr[list(subset)].copy()
                        for subset in itertools.combinations(range(n), k))

    best_centers, best_score = None, -1.0
    for seed_centers in seedings:
        centers, score = _lloyd_run(sample_arr, seed_centers, k, max_iter,
                                    reduce_fn)
        if score > best_score:
            best_centers, best_score = centers, score

    order = np.lexsort((best_centers[:, 1], best_centers[:, 0],
                        best_centers[:, 0] * best_centers[:, 1]))
    shapes = tuple(AnchorShape(float(w), float(h)) for w, h in best_centers[order])
    score = avg_iou_objective(samples, shapes)
    return AnchorSet(shapes=shapes, k=k, avg_iou=score)


def anchor_count_sweep(
    samples: Sequence[ShapeSample],
    k_range: Sequence[int],
    seed: int = 0,
    max_iter: int = 300,
    center_update: str = "median",
    restarts: int = 10,
) -> list:
    """Run kmeans_anchors for every k in k_range; returns [(k, avg_iou), ...]."""
    ks = list(k_range)
    if not ks:
        raise InputError("k_range must be non-empty")
    return [
        (k, kmeans_anchors(samples, k, seed=seed, max_iter=max_iter,
                           center_update=center_update, restarts=restarts).avg_iou)
        for k in ks
    ]
