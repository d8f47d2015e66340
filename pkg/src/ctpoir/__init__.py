"""ctpoir: infected-proportion-of-lung quantification from CT volumes.

A numpy/scipy library plus a thin CLI. The pipeline: HU clipping and
grayscale normalization, threshold-based or pluggable 2.5D segmentation,
region-level false-positive filtering, physical volume computation, and an
evaluation metric suite, all exercised against a deterministic synthetic
phantom testkit.
"""

from .dicom import read_dicom_series, read_dicom_series_with_meta, write_dicom_series
from .errors import (
    DimMismatch,
    EmptyIntersection,
    EmptyList,
    EmptyLung,
    HeaderMismatch,
    InconsistentSeries,
    InputFormatError,
    MissingTag,
    OutOfRange,
    PipelineError,
    ScorerFailure,
    SegmenterFailure,
    SingleClass,
    SpecViolation,
    UnsupportedTransferSyntax,
    ValueOutOfRange,
    ZeroGroundTruth,
    ZeroVariance,
)
from .io import (
    load_probmaps,
    read_internal,
    read_mask,
    read_region_scores,
    write_histogram_csv,
    write_internal,
    write_mask,
    write_probmap,
    write_region_scores,
)
from .mask_ops import (
    Region,
    connected_components,
    intersect,
    mask_from_regions,
    min_square_bbox,
    square_window,
    subtract,
    union,
    volume_mm3,
)
from .metrics import PairedSeries, RocCurve, dice, mape, mean_dice, pearson, poir, roc_auc
from .phantom import (
    Blob,
    BorderBlurDecoy,
    PhantomSpec,
    TubeDecoy,
    make_phantom,
    write_phantom_dicom,
)
from .preprocess import HuHistogram, clip_hu, hu_histogram, hu_to_gray, normalize_to_gray
from .region_filter import (
    FilterConfig,
    Patch,
    ScoredRegion,
    builtin_patch_score,
    export_patches,
    extract_candidates,
    filter_regions,
    score_regions,
)
from .report import (
    AnalyzeConfig,
    CaseMasks,
    CaseReport,
    MaskSource,
    MetricsSummary,
    StageError,
    analyze_case,
    analyze_to_masks,
    contour_pixels,
    emit_overlays,
    evaluate_benchmark,
)
from .seg_harness import (
    SliceStack,
    binarize,
    coverage_counts,
    run_25d,
    stack_slices,
    threshold_probability_segmenter,
)
from .threshold_seg import (
    DEFAULT_INFECTED_HU,
    DEFAULT_LUNG_HU,
    SWEEP_THRESHOLDS,
    SweepResult,
    bootstrap_labels,
    infected_by_subtraction,
    infected_candidate,
    segment_by_threshold,
    sweep_lung_threshold,
)
from .volume import BinaryMask3D, CtVolume, GrayVolume, ProbabilityMap3D, SliceMeta

__version__ = "0.1.0"
