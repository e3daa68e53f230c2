"""Controllable segmentation-error synthesis and a 20-metric evaluation suite.

The package splits into five layers:

    mask_io   binary masks, contour tracing, rasterization
    synth     Fourier-descriptor, spiculation and affine error engines
    metrics   confusion-count, overlap and boundary-distance metrics
    study     battery runner, ranking, correlation grouping, experiments
    service   local HTTP API backing the interactive frontend
"""

from .errors import (
    ContourError,
    DegenerateContourError,
    EmptyMaskError,
    MaskFormatError,
    MetricError,
    RasterError,
    SegsynthError,
    SynthesisError,
)
from .mask_io import (
    BinaryMask,
    Contour,
    Point,
    boundary_pixels,
    extract_contour,
    load_mask,
    load_mask_bytes,
    mask_to_bytes,
    pad,
    rasterize,
    save_mask,
)
from .metrics import (
    DIRECTIONS,
    METRIC_ORDER,
    ConfusionCounts,
    MetricReport,
    confusion,
    count_metrics,
    distance_metrics,
    evaluate_all,
    msi,
)
from .synth import (
    AffineParams,
    FdParams,
    FourierDescriptors,
    SeededRng,
    SegmentorConfig,
    SpiculationParams,
    SpiculationRange,
    SynthesisResult,
    add_spiculation,
    affine_transform,
    apply_pipeline,
    builtin_segmentors_path,
    derive_cell_seed,
    from_fourier,
    load_segmentor_configs,
    modify_fd,
    synthesize,
    to_fourier,
)

__version__ = "0.1.0"

__all__ = [
    "AffineParams", "BinaryMask", "ConfusionCounts", "Contour", "ContourError",
    "DIRECTIONS", "DegenerateContourError", "EmptyMaskError", "FdParams",
    "FourierDescriptors", "METRIC_ORDER", "MaskFormatError", "MetricError",
    "MetricReport", "Point", "RasterError", "SeededRng", "SegmentorConfig",
    "SegsynthError", "SpiculationParams", "SpiculationRange", "SynthesisError",
    "SynthesisResult", "add_spiculation", "affine_transform", "apply_pipeline",
    "boundary_pixels", "builtin_segmentors_path", "confusion", "count_metrics",
    "derive_cell_seed", "distance_metrics", "evaluate_all", "extract_contour",
    "from_fourier", "load_mask", "load_mask_bytes", "load_segmentor_configs",
    "mask_to_bytes", "modify_fd", "msi", "pad", "rasterize", "save_mask",
    "synthesize", "to_fourier",
]
