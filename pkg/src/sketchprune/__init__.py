"""Covariance-preserving structured pruning via Frequent Directions sketching."""

from .archive import (
    LayerSpec,
    ModelManifest,
    TensorArchive,
    flatten_filters,
    load_archive,
    save_archive,
    unflatten_filters,
)
from .analysis import (
    ComplexityReport,
    QualityReport,
    WeightStats,
    compare_models,
    count_flops_params,
    sketch_quality,
    weight_stats,
)
from .architectures import ARCHITECTURES, build_manifest, load_manifest, random_archive
from .estimator import FilterSketcher
from .planner import (
    PrunePlan,
    PruneReport,
    build_plan,
    random_subsample,
    sketch_model,
    svd_truncate,
)
from .sketch import (
    SketchResult,
    SvdShrinkState,
    fd_sketch,
    frobenius_normalize,
    sketch_size,
    svd_shrink,
)

__version__ = "0.1.0"

__all__ = [
    "LayerSpec",
    "ModelManifest",
    "TensorArchive",
    "flatten_filters",
    "unflatten_filters",
    "load_archive",
    "save_archive",
    "SketchResult",
    "SvdShrinkState",
    "sketch_size",
    "fd_sketch",
    "svd_shrink",
    "frobenius_normalize",
    "PrunePlan",
    "PruneReport",
    "build_plan",
    "sketch_model",
    "random_subsample",
    "svd_truncate",
    "QualityReport",
    "WeightStats",
    "ComplexityReport",
    "sketch_quality",
    "weight_stats",
    "count_flops_params",
    "compare_models",
    "ARCHITECTURES",
    "build_manifest",
    "load_manifest",
    "random_archive",
    "FilterSketcher",
    "__version__",
]
