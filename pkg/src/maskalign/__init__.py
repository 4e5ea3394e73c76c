"""Weakly-supervised temporal event localization via differentiable mask alignment."""

from .dataio import (
    Dataset,
    RunConfig,
    VideoSample,
    load_dataset,
    load_runconfig,
    read_embeddings,
    read_params_json,
    save_runconfig,
    write_dataset,
    write_embeddings,
    write_params_json,
)
from .errors import MaskAlignError
from .evaluate import (
    LocReport,
    Segment,
    WidthStats,
    corpus_mean_best_iou,
    corpus_scores,
    localization_scores,
    mask_to_segment,
    temporal_iou,
    width_stats,
)
from .gradcheck import GradCheckReport, run_gradcheck
from .kernels import BACKEND, backend_names
from .losses import LossBreakdown, LossConfig, PoolingMode
from .masks import (
    EngineConfig,
    Mask,
    MaskKind,
    MaskParams,
    RawMaskParams,
    fixed_uniform_params,
)
from .optim import AdamW, TrainReport, train
from .simulate import (
    Layout,
    ScenarioSpec,
    SparsifyPolicy,
    gen_dataset,
    gen_video,
    sparsify,
    to_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "BACKEND",
    "Dataset",
    "EngineConfig",
    "GradCheckReport",
    "Layout",
    "LocReport",
    "LossBreakdown",
    "LossConfig",
    "Mask",
    "MaskAlignError",
    "MaskKind",
    "MaskParams",
    "PoolingMode",
    "RawMaskParams",
    "RunConfig",
    "ScenarioSpec",
    "Segment",
    "SparsifyPolicy",
    "TrainReport",
    "VideoSample",
    "WidthStats",
    "__version__",
    "backend_names",
    "corpus_mean_best_iou",
    "corpus_scores",
    "fixed_uniform_params",
    "gen_dataset",
    "gen_video",
    "load_dataset",
    "load_runconfig",
    "localization_scores",
    "mask_to_segment",
    "read_embeddings",
    "read_params_json",
    "run_gradcheck",
    "save_runconfig",
    "sparsify",
    "temporal_iou",
    "to_dataset",
    "train",
    "width_stats",
    "write_dataset",
    "write_embeddings",
    "write_params_json",
]
