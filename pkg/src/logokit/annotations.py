"""Annotation ingestion, image-level filtering, and dataset splitting.

Input is the VOC XML layout: one file per image carrying
``size{width,height}`` and any number of ``object{name, bndbox{xmin, ymin,
xmax, ymax}}`` entries. ``xmax``/``ymax`` are exclusive-edge reals (so a
10-pixel-wide object spans xmin=0, xmax=10); boxes are clamped to the image
bounds on parse.

Filtering applies five rules in a fixed, first-match-wins order:
``too_small``, ``extreme_aspect``, ``duplicate``, ``no_logo``,
``not_in_vocabulary``. Duplicates are detected against earlier *kept* records
only (input order), by exact content hash or by perceptual-hash Hamming
distance, so re-filtering a kept set rejects nothing.

Splitting is stratified per category and driven entirely by hashes of
``(seed, category, path)``, so the split is reproducible across runs,
platforms, and input orderings.
"""

from __future__ import annotations

import hashlib
import io
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from PIL import Image

from .errors import (
    AnnotationParseError,
    AnnotationSchemaError,
    ImageDecodeError,
    InputError,
)
from .geometry import Box

__all__ = [
    "SUPER_CLASSES",
    "FILTER_RULES",
    "LabeledObject",
    "ImageRecord",
    "Vocabulary",
    "FilterConfig",
    "FilterReport",
    "parse_annotation",
    "compute_digests",
    "dhash64",
    "hamming64",
    "apply_filters",
    "split_dataset",
    "record_to_json",
    "record_from_json",
    "write_manifest",
    "read_manifest",
]

# The nine fixed top-level logo groupings; every vocabulary entry maps to one.
SUPER_CLASSES = (
    "Food",
    "Clothes",
    "Necessities",
    "Others",
    "Electronic",
    "Transportation",
    "Leisure",
    "Sports",
    "Medical",
)

# Rejection rules in application order; the first match wins.
FILTER_RULES = (
    "too_small",
    "extreme_aspect",
    "duplicate",
    "no_logo",
    "not_in_vocabulary",
)


@dataclass(frozen=True)
class LabeledObject:
    """One annotated logo instance: category name plus its box."""

    category: str
    box: Box


@dataclass(frozen=True)
class ImageRecord:
    """One annotated image: path, pixel size, objects, and content digests."""

    path: str
    width: int
    height: int
    objects: Tuple[LabeledObject, ...]
    content_digest: Optional[str] = None  # sha256 hex of the image bytes
    perceptual_digest: Optional[int] = None  # 64-bit difference hash

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InputError(
                f"{self.path}: image size must be positive, got "
                f"{self.width}x{self.height}"
            )


@dataclass(frozen=True)
class Vocabulary:
    """The allowed category names, each mapped to one of the 9 super-classes."""

    super_class_of: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for category, super_class in self.super_class_of.items():
            if not category:
                raise InputError("vocabulary category names must be non-empty")
            if super_class not in SUPER_CLASSES:
                raise InputError(
                    f"unknown super-class {super_class!r} for category "
                    f"{category!r}; expected one of {', '.join(SUPER_CLASSES)}"
                )

    @property
    def entries(self) -> frozenset:
        return frozenset(self.super_class_of)

    def __contains__(self, category: str) -> bool:
        return category in self.super_class_of

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        """Load from a JSON object mapping category name -> super-class name."""
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise InputError("vocabulary file must be a JSON object")
        return cls(super_class_of=dict(obj))


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds for the image-level rejection rules."""

    min_dimension: int = 300
    max_aspect_ratio: float = 3.0
    dedup_hamming_threshold: int = 4

    def __post_init__(self):
        if self.min_dimension < 1:
            raise InputError(f"min_dimension must be >= 1, got {self.min_dimension}")
        if not self.max_aspect_ratio > 1.0:
            raise InputError(
                f"max_aspect_ratio must be > 1, got {self.max_aspect_ratio}"
            )
        if not 0 <= self.dedup_hamming_threshold <= 64:
            raise InputError(
                f"dedup_hamming_threshold must lie in [0, 64], got "
                f"{self.dedup_hamming_threshold}"
            )


@dataclass(frozen=True)
class FilterReport:
    """Exact accounting of one filtering pass."""

    kept: int
    rejected_by_rule: Dict[str, int]

    @property
    def total(self) -> int:
        return self.kept + sum(self.rejected_by_rule.values())


def _text_of(parent: ET.Element, tag: str, context: str) -> str:
    node = parent.find(tag)
    if node is None or node.text is None:
        raise AnnotationSchemaError(f"{context}: missing <{tag}>")
    return node.text.strip()


def _byte_offset(xml_bytes: bytes, line: int, column: int) -> int:
    # ElementTree reports (line, column); recover the byte offset by summing
    # the preceding full lines.
    lines = xml_bytes.split(b"\n")
    return sum(len(l) + 1 for l in lines[: line - 1]) + column


def parse_annotation(xml_bytes: bytes, path: str = "") -> ImageRecord:
    """Parse one VOC XML payload into an ImageRecord (digests unset).

    Boxes are clamped to the image bounds. A box inverted by at most 1 pixel
    is repaired by reordering the coordinate pair; a larger inversion raises
    a schema error naming the object index. ``path`` overrides the file
    locator stored in the XML (``<path>`` or ``<filename>``).
    """
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        line, column = exc.position
        offset = _byte_offset(xml_bytes, line, column)
        raise AnnotationParseError(
            f"malformed annotation XML at byte {offset}: {exc}", byte_offset=offset
        ) from exc

    size = root.find("size")
    if size is None:
        raise AnnotationSchemaError("annotation is missing <size>")
    try:
        width = int(_text_of(size, "width", "size"))
        height = int(_text_of(size, "height", "size"))
    except ValueError as exc:
        raise AnnotationSchemaError(f"non-integer image size: {exc}") from exc
    if width <= 0 or height <= 0:
        raise AnnotationSchemaError(f"non-positive image size {width}x{height}")

    if not path:
        for tag in ("path", "filename"):
            node = root.find(tag)
            if node is not None and node.text:
                path = node.text.strip()
                break

    objects: List[LabeledObject] = []
    for index, obj in enumerate(root.findall("object")):
        name = _text_of(obj, "name", f"object {index}")
        if not name:
            raise AnnotationSchemaError(f"object {index}: empty <name>")
        bndbox = obj.find("bndbox")
        if bndbox is None:
            raise AnnotationSchemaError(f"object {index}: missing <bndbox>")
        try:
            coords = {
                tag: float(_text_of(bndbox, tag, f"object {index}"))
                for tag in ("xmin", "ymin", "xmax", "ymax")
            }
        except ValueError as exc:
            raise AnnotationSchemaError(
                f"object {index}: non-numeric bndbox: {exc}"
            ) from exc
        for lo, hi in (("xmin", "xmax"), ("ymin", "ymax")):
            if coords[hi] < coords[lo]:
                if coords[lo] - coords[hi] > 1.0:
                    raise AnnotationSchemaError(
                        f"object {index}: inverted box ({lo}={coords[lo]}, "
                        f"{hi}={coords[hi]})"
                    )
                coords[lo], coords[hi] = coords[hi], coords[lo]
        box = Box(
            xmin=min(max(coords["xmin"], 0.0), float(width)),
            ymin=min(max(coords["ymin"], 0.0), float(height)),
            xmax=min(max(coords["xmax"], 0.0), float(width)),
            ymax=min(max(coords["ymax"], 0.0), float(height)),
        )
        objects.append(LabeledObject(category=name, box=box))

    return ImageRecord(path=path, width=width, height=height, objects=tuple(objects))


def dhash64(image_bytes: bytes, path: str = "") -> int:
    """64-bit difference hash: 9x8 grayscale downsample, horizontal gradients."""
    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            gray = img.convert("L").resize((9, 8), Image.LANCZOS)
    except Exception as exc:
        raise ImageDecodeError(f"{path or '<bytes>'}: cannot decode image: {exc}",
                               path=path) from exc
    px = gray.tobytes()  # L mode: one byte per pixel, row-major
    bits = 0
    for row in range(8):
        for col in range(8):
            left, right = px[row * 9 + col], px[row * 9 + col + 1]
            bits = (bits << 1) | (1 if left > right else 0)
    return bits


def hamming64(a: int, b: int) -> int:
    """Number of differing bits between two 64-bit hashes."""
    return ((a ^ b) & 0xFFFFFFFFFFFFFFFF).bit_count()


def compute_digests(record: ImageRecord, image_bytes: bytes) -> ImageRecord:
    """Return a copy of ``record`` with content and perceptual digests set."""
    return replace(
        record,
        content_digest=hashlib.sha256(image_bytes).hexdigest(),
        perceptual_digest=dhash64(image_bytes, path=record.path),
    )


def apply_filters(
    records: Sequence[ImageRecord],
    vocab: Vocabulary,
    cfg: FilterConfig,
) -> Tuple[List[ImageRecord], FilterReport]:
    """Apply the five rejection rules in order; returns (kept, report).

    Requires digests on every record (the duplicate rule compares them).
    The duplicate rule checks each record against all earlier *kept* records,
    in input order, so the first occurrence of a near-duplicate group
    survives and the pass is idempotent.
    """
    rejected = {rule: 0 for rule in FILTER_RULES}
    kept: List[ImageRecord] = []
    seen_content: set = set()
    seen_perceptual: List[int] = []

    for record in records:
        if record.content_digest is None or record.perceptual_digest is None:
            raise InputError(f"{record.path}: record is missing digests")
        rule = _first_rejection(
            record, vocab, cfg, seen_content, seen_perceptual
        )
        if rule is None:
            seen_content.add(record.content_digest)
            seen_perceptual.append(record.perceptual_digest)
            kept.append(record)
        else:
            rejected[rule] += 1

    return kept, FilterReport(kept=len(kept), rejected_by_rule=rejected)


def _first_rejection(
    record: ImageRecord,
    vocab: Vocabulary,
    cfg: FilterConfig,
    seen_content: set,
    seen_perceptual: List[int],
) -> Optional[str]:
    if min(record.width, record.height) < cfg.min_dimension:
        return "too_small"
    aspect = max(record.width, record.height) / min(record.width, record.height)
    if aspect > cfg.max_aspect_ratio:
        return "extreme_aspect"
    if record.content_digest in seen_content:
        return "duplicate"
    for other in seen_perceptual:
        if hamming64(record.perceptual_digest, other) <= cfg.dedup_hamming_threshold:
            return "duplicate"
    if not record.objects:
        return "no_logo"
    if any(obj.category not in vocab for obj in record.objects):
        return "not_in_vocabulary"
    return None


def _split_key(seed: int, category: str, path: str) -> str:
    payload = f"{seed}\x00{category}\x00{path}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def split_dataset(
    records: Sequence[ImageRecord],
    test_fraction: float,
    seed: int = 0,
) -> Tuple[List[ImageRecord], List[ImageRecord]]:
    """Stratified trainval/test split, deterministic under ``seed``.

    Each record is stratified by the lexicographically smallest category it
    contains. Within a stratum, records are ordered by a seed-keyed hash and
    the first ``round(n * test_fraction)`` go to test, capped at ``n - 1`` so
    every stratum with at least 2 records keeps one in trainval. Output lists
    are in (stratum, hash) order, so permuting the input changes nothing.
    """
    if not records:
        raise InputError("split_dataset needs a non-empty record list")
    if not 0.0 < test_fraction < 1.0:
        raise InputError(f"test_fraction must lie in (0, 1), got {test_fraction}")

    strata: Dict[str, List[ImageRecord]] = {}
    for record in records:
        stratum = min((o.category for o in record.objects), default="")
        strata.setdefault(stratum, []).append(record)

    trainval: List[ImageRecord] = []
    test: List[ImageRecord] = []
    for stratum in sorted(strata):
        members = sorted(
            strata[stratum], key=lambda r: _split_key(seed, stratum, r.path)
        )
        n = len(members)
        n_test = round(n * test_fraction)
        if n >= 2:
            n_test = min(n_test, n - 1)
        test.extend(members[:n_test])
        trainval.extend(members[n_test:])
    return trainval, test


# Manifest serialization: one JSON object per line, fixed key order, floats
# emitted via repr so a parse -> write -> parse round trip is exact.

def record_to_json(record: ImageRecord) -> str:
    obj = {
        "path": record.path,
        "width": record.width,
        "height": record.height,
        "objects": [
            {
                "category": o.category,
                "xmin": o.box.xmin,
                "ymin": o.box.ymin,
                "xmax": o.box.xmax,
                "ymax": o.box.ymax,
            }
            for o in record.objects
        ],
        "content_digest": record.content_digest,
        "perceptual_digest": record.perceptual_digest,
    }
    return json.dumps(obj, separators=(",", ":"))


def record_from_json(line: str) -> ImageRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise InputError(f"bad manifest line: {exc}") from exc
    try:
        return ImageRecord(
            path=obj["path"],
            width=int(obj["width"]),
            height=int(obj["height"]),
            objects=tuple(
                LabeledObject(
                    category=o["category"],
                    box=Box(o["xmin"], o["ymin"], o["xmax"], o["ymax"]),
                )
                for o in obj["objects"]
            ),
            content_digest=obj.get("content_digest"),
            perceptual_digest=obj.get("perceptual_digest"),
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"manifest line is missing field {exc}") from exc


def write_manifest(records: Sequence[ImageRecord]) -> str:
    """Serialize records as JSON lines (returned as one string)."""
    return "".join(record_to_json(r) + "\n" for r in records)


def read_manifest(text: str) -> List[ImageRecord]:
    """Parse a JSON-lines manifest produced by :func:`write_manifest`."""
    return [record_from_json(line) for line in text.splitlines() if line.strip()]
