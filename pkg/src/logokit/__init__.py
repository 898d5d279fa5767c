"""logokit: box-regression losses, anchor clustering, detection evaluation,
and dataset curation tooling for logo detection datasets."""

from .anchors import (
    AnchorSet,
    AnchorShape,
    ShapeSample,
    anchor_count_sweep,
    avg_iou_objective,
    kmeans_anchors,
    shape_iou,
)
from .annotations import (
    FILTER_RULES,
    SUPER_CLASSES,
    FilterConfig,
    FilterReport,
    ImageRecord,
    LabeledObject,
    Vocabulary,
    apply_filters,
    compute_digests,
    parse_annotation,
    read_manifest,
    split_dataset,
    write_manifest,
)
from .errors import (
    AnnotationParseError,
    AnnotationSchemaError,
    ImageDecodeError,
    InputError,
    ToolkitError,
)
from .evaluation import (
    Detection,
    EvalReport,
    PRPoint,
    average_precision,
    evaluate,
    match_detections,
    threshold_sweep,
)
from .geometry import (
    Box,
    CenterBox,
    OverlapBreakdown,
    ciou_breakdown,
    ciou_loss,
    ciou_loss_gradient,
    diou,
    giou,
    iou,
)
from .gradcheck import GradCheckReport, run_gradient_check
from .losses import (
    AnchorAssignment,
    FocalParams,
    LossReport,
    batch_loss,
    focal_loss,
    focal_loss_gradient,
)
from .stats import (
    CategoryStats,
    DatasetStats,
    SizeBins,
    SuperClassStats,
    compute_stats,
    per_logo_distribution,
    size_bin_fractions,
)

__version__ = "0.1.0"
