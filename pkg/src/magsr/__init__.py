"""Uncertainty-aware single-image super-resolution for solar magnetograms.

Pipeline: Gaussian-smooth + block-average degradation manufactures LR/HR
pairs; a dropout-instrumented encoder-decoder trained with a per-pixel
heteroskedastic Gaussian NLL predicts mean field and noise variance;
MC-dropout sampling decomposes predictive uncertainty into epistemic and
aleatoric per-pixel maps.
"""

from .data import (
    Magnetogram,
    PatchPair,
    SplitAssignment,
    SyntheticSpec,
    center_crop,
    generate_synthetic,
    ingest,
    make_pairs,
    make_temporal_split,
)
from .degrade import (
    DegradeConfig,
    GaussianKernel,
    block_average,
    default_degrade_config,
    degrade,
    make_gaussian_kernel,
    smooth,
)
from .eval import (
    ConditionalStats,
    ConsistencyReport,
    VariantReport,
    conditional_mapping,
    consistency_check,
    evaluate_variant,
    run_table1,
)
from .inference import SampleSet, UncertaintyMaps, decompose, sample, streaming_decompose
from .loss import LossValue, heteroskedastic_nll, mse_loss, nll_terms, optimal_variance_check
from .model import (
    ModelConfig,
    ModelOutput,
    build_model,
    forward,
    load_snapshot,
    predicted_variance,
    save_snapshot,
)
from .train import TrainingBudget, TrainingResult, train_variant

__version__ = "0.1.0"

__all__ = [
    "Magnetogram",
    "PatchPair",
    "SplitAssignment",
    "SyntheticSpec",
    "center_crop",
    "generate_synthetic",
    "ingest",
    "make_pairs",
    "make_temporal_split",
    "DegradeConfig",
    "GaussianKernel",
    "block_average",
    "default_degrade_config",
    "degrade",
    "make_gaussian_kernel",
    "smooth",
    "ConditionalStats",
    "ConsistencyReport",
    "VariantReport",
    "conditional_mapping",
    "consistency_check",
    "evaluate_variant",
    "run_table1",
    "SampleSet",
    "UncertaintyMaps",
    "decompose",
    "sample",
    "streaming_decompose",
    "LossValue",
    "heteroskedastic_nll",
    "mse_loss",
    "nll_terms",
    "optimal_variance_check",
    "ModelConfig",
    "ModelOutput",
    "build_model",
    "forward",
    "load_snapshot",
    "predicted_variance",
    "save_snapshot",
    "TrainingBudget",
    "TrainingResult",
    "train_variant",
]
