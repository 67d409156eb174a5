"""Scale-adaptive detection evaluation toolkit.

Measures that blend overlap with a normalized Wasserstein similarity as a
function of ground-truth scale, matching losses with analytic gradients, a
challenge-protocol evaluator that accepts any of the measures, plus dataset,
track and mask utilities for multimodal tiny-object benchmarks.
"""

__version__ = "0.1.0"

from .boxes import BBox
from .errors import ConfigError, DataError, WarpError
from .metrics import (
    MEASURE_IDS,
    NwdParams,
    SAFitParams,
    blend_weight,
    ciou,
    diou,
    giou,
    iou,
    nwd,
    pairwise,
    resolve,
    safit,
    safit_g,
    safit_s,
    wasserstein_sq,
)
from .losses import LossGrad, fd_check, loss
from .data import (
    DENSITY_BINS,
    LIGHT_LEVELS,
    MODALITIES,
    SCALE_BINS,
    Annotation,
    Detection,
    GroundTruthDataset,
    Homography,
    ImageInfo,
    PredictionSet,
    SequenceMeta,
    StatsReport,
    ValidationIssue,
    dataset_stats,
    density_level,
    interpolate_dataset,
    interpolate_track,
    load_ground_truth,
    load_predictions,
    parse_ground_truth,
    parse_predictions,
    save_ground_truth,
    save_predictions,
    scale_bin_of_area,
    scale_level,
    warp_bbox,
)
from .masks import Mask, load_mask, mask_to_bboxes, rasterize, save_mask
from .evaluation import (
    DEFAULT_THRESHOLDS,
    EvalConfig,
    EvalReport,
    Match,
    deviation_curve,
    evaluate,
    match,
)

__all__ = [
    "__version__",
    "BBox",
    "ConfigError",
    "DataError",
    "WarpError",
    "MEASURE_IDS",
    "NwdParams",
    "SAFitParams",
    "blend_weight",
    "iou",
    "giou",
    "diou",
    "ciou",
    "nwd",
    "safit",
    "safit_s",
    "safit_g",
    "wasserstein_sq",
    "pairwise",
    "resolve",
    "LossGrad",
    "loss",
    "fd_check",
    "DENSITY_BINS",
    "LIGHT_LEVELS",
    "MODALITIES",
    "SCALE_BINS",
    "Annotation",
    "Detection",
    "GroundTruthDataset",
    "Homography",
    "ImageInfo",
    "PredictionSet",
    "SequenceMeta",
    "StatsReport",
    "ValidationIssue",
    "dataset_stats",
    "density_level",
    "interpolate_dataset",
    "interpolate_track",
    "load_ground_truth",
    "load_predictions",
    "parse_ground_truth",
    "parse_predictions",
    "save_ground_truth",
    "save_predictions",
    "scale_bin_of_area",
    "scale_level",
    "warp_bbox",
    "Mask",
    "load_mask",
    "mask_to_bboxes",
    "rasterize",
    "save_mask",
    "DEFAULT_THRESHOLDS",
    "EvalConfig",
    "EvalReport",
    "Match",
    "deviation_curve",
    "evaluate",
    "match",
]
