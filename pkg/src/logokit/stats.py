"""Dataset statistics: per-category, per-super-class, size-bin, and
objects-per-image summaries over a manifest of annotated images.

Object areas are measured in raw annotation pixels. The size bins follow the
usual detection convention: small (area < 32 squared), medium (32 squared
through 96 squared, both ends inclusive), large (above 96 squared).

All counting is integer-exact and invariant to manifest ordering. An image
whose objects span several super-classes is counted once per super-class in
the rollup; the number of such images is reported separately so the rollup's
image column can be reconciled against the dataset total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from .annotations import SUPER_CLASSES, ImageRecord, Vocabulary
from .errors import InputError

__all__ = [
    "SizeBins",
    "CategoryStats",
    "SuperClassStats",
    "DatasetStats",
    "compute_stats",
    "size_bin_fractions",
    "per_logo_distribution",
]

_SMALL_MAX_AREA = 32.0 * 32.0
_MEDIUM_MAX_AREA = 96.0 * 96.0


@dataclass(frozen=True)
class SizeBins:
    """Object counts per area bin: small < 32^2 <= medium <= 96^2 < large."""

    small: int
    medium: int
    large: int

    @property
    def total(self) -> int:
        return self.small + self.medium + self.large


@dataclass(frozen=True)
class CategoryStats:
    category: str
    image_count: int
    object_count: int
    super_class: str


@dataclass(frozen=True)
class SuperClassStats:
    super_class: str
    category_count: int
    image_count: int
    object_count: int


@dataclass(frozen=True)
class DatasetStats:
    """Everything :func:`compute_stats` derives from one manifest."""

    category_stats: Tuple[CategoryStats, ...]
    super_class_stats: Tuple[SuperClassStats, ...]
    size_bins: SizeBins
    objects_per_image: Dict[int, int]
    total_categories: int
    total_images: int
    total_objects: int
    multi_super_class_images: int


def compute_stats(manifest: Sequence[ImageRecord], vocab: Vocabulary) -> DatasetStats:
    """Count categories, images, objects, size bins, and super-class rollups.

    Raises on any category missing from the vocabulary (filtering should
    have removed those records).
    """
    cat_images: Dict[str, set] = {}
    cat_objects: Dict[str, int] = {}
    objects_per_image: Dict[int, int] = {}
    small = medium = large = 0
    multi_super = 0

    for record in manifest:
        supers = set()
        for obj in record.objects:
            if obj.category not in vocab:
                raise InputError(
                    f"category {obj.category!r} is not in the vocabulary"
                )
            supers.add(vocab.super_class_of[obj.category])
            cat_images.setdefault(obj.category, set()).add(record.path)
            cat_objects[obj.category] = cat_objects.get(obj.category, 0) + 1
            area = obj.box.area()
            if area < _SMALL_MAX_AREA:
                small += 1
            elif area <= _MEDIUM_MAX_AREA:
                medium += 1
            else:
                large += 1
        objects_per_image[len(record.objects)] = (
            objects_per_image.get(len(record.objects), 0) + 1
        )
        if len(supers) > 1:
            multi_super += 1

    category_stats = tuple(
        CategoryStats(
            category=c,
            image_count=len(cat_images[c]),
            object_count=cat_objects[c],
            super_class=vocab.super_class_of[c],
        )
        for c in sorted(cat_images)
    )

    super_images: Dict[str, set] = {s: set() for s in SUPER_CLASSES}
    super_objects: Dict[str, int] = {s: 0 for s in SUPER_CLASSES}
    super_categories: Dict[str, int] = {s: 0 for s in SUPER_CLASSES}
    for cs in category_stats:
        super_categories[cs.super_class] += 1
        super_objects[cs.super_class] += cs.object_count
        super_images[cs.super_class] |= cat_images[cs.category]
    super_class_stats = tuple(
        SuperClassStats(
            super_class=s,
            category_count=super_categories[s],
            image_count=len(super_images[s]),
            object_count=super_objects[s],
        )
        for s in SUPER_CLASSES
    )

    return DatasetStats(
        category_stats=category_stats,
        super_class_stats=super_class_stats,
        size_bins=SizeBins(small=small, medium=medium, large=large),
        objects_per_image=dict(sorted(objects_per_image.items())),
        total_categories=len(category_stats),
        total_images=len(manifest),
        total_objects=sum(cat_objects.values()),
        multi_super_class_images=multi_super,
    )


def size_bin_fractions(bins: SizeBins) -> Tuple[float, float, float]:
    """Size-bin percentages rounded to 2 decimals; requires a non-empty total."""
    if bins.total <= 0:
        raise InputError("size_bin_fractions needs at least one object")
    return (
        round(100.0 * bins.small / bins.total, 2),
        round(100.0 * bins.medium / bins.total, 2),
        round(100.0 * bins.large / bins.total, 2),
    )


def per_logo_distribution(manifest: Sequence[ImageRecord]) -> List[Tuple[str, int]]:
    """Categories ordered by image count descending, ties by name ascending."""
    if not manifest:
        raise InputError("per_logo_distribution needs a non-empty manifest")
    images: Dict[str, set] = {}
    for record in manifest:
        for obj in record.objects:
            images.setdefault(obj.category, set()).add(record.path)
    return sorted(
        ((c, len(paths)) for c, paths in images.items()),
        key=lambda item: (-item[1], item[0]),
    )
