"""SISE and Ada-SISE visual explanations for small CNNs.

Four-phase pipeline: capture pooling-layer feature maps with their
class-logit gradients, select maps (fixed threshold, or the adaptive
Otsu-style search over positive gradient scores), score attribution
masks by masked forward passes, and fuse layer maps cascadingly into
one explanation heatmap. Ships the evaluation metrics and the phase
profiler used to compare the two selection policies.
"""

__version__ = "0.1.0"

from .aggregate import (
    ExplanationMap,
    LayerVisualizationMap,
    PhaseTimings,
    explain,
    fuse,
    score_masks,
)
from .backend import available_backends, get_backend, set_backend
from .errors import (
    AdasiseError,
    AnnotationError,
    BenchmarkError,
    InvalidClassError,
    ModelError,
    ModelFormatError,
    ShapeMismatchError,
    UndefinedDropError,
)
from .evaluation import (
    BenchmarkRecord,
    GroundTruthAnnotation,
    bbox_metric,
    drop_increase,
    ebpg,
    load_annotations,
    run_benchmark,
)
from .extract import (
    LayerGradientReport,
    extract_all,
    extract_layer,
    gradient_histogram,
)
from .model import (
    CaptureResult,
    InspectableModel,
    feature_gradients,
    forward_capture,
    forward_score,
)
from .modelio import load_model, save_model
from .numcore import bilinear_resize, hadamard, minmax_normalize, otsu_binarize
from .selection import (
    AdaptiveOtsu,
    AttributionMaskSet,
    FixedThreshold,
    PositiveGradientSet,
    adaptive_mu,
    adaptive_split,
    build_positive_set,
    class_means,
    inter_class_variance,
    select_and_postprocess,
)

__all__ = [
    "__version__",
    "AdaptiveOtsu",
    "AdasiseError",
    "AnnotationError",
    "AttributionMaskSet",
    "BenchmarkError",
    "BenchmarkRecord",
    "CaptureResult",
    "ExplanationMap",
    "FixedThreshold",
    "GroundTruthAnnotation",
    "InspectableModel",
    "InvalidClassError",
    "LayerGradientReport",
    "LayerVisualizationMap",
    "ModelError",
    "ModelFormatError",
    "PhaseTimings",
    "PositiveGradientSet",
    "ShapeMismatchError",
    "UndefinedDropError",
    "adaptive_mu",
    "adaptive_split",
    "available_backends",
    "bbox_metric",
    "bilinear_resize",
    "build_positive_set",
    "class_means",
    "drop_increase",
    "ebpg",
    "explain",
    "extract_all",
    "extract_layer",
    "feature_gradients",
    "forward_capture",
    "forward_score",
    "fuse",
    "get_backend",
    "gradient_histogram",
    "hadamard",
    "inter_class_variance",
    "load_annotations",
    "load_model",
    "minmax_normalize",
    "otsu_binarize",
    "run_benchmark",
    "save_model",
    "score_masks",
    "select_and_postprocess",
    "set_backend",
]
