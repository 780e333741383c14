"""Attention-weighted neural encoding toolkit.

Feature stacks are pooled through spatial attention maps (fixed gaze-derived
maps or a trainable end-to-end regime) into response predictions, evaluated
voxelwise; companion modules cover saliency metrics, representational
similarity, lag estimation, and a fully synthetic test harness.
"""

from .attention import (
    FixationTable,
    center_attention_map,
    channel_conv_same,
    gaze_attention_map,
    kde_density_map,
    kde_log_density,
    modulate_and_pool,
    saliency_forward,
    spatial_softmax,
)
from .data import DatasetManifest, EncodingDataset, load_fixations, pair_dataset, save_fixations
from .encoder import (
    Adam,
    EncoderConfig,
    EncoderModel,
    encoder_backward,
    encoder_forward,
    encoder_loss,
    load_model,
    save_model,
    train_encoder,
)
from .evalmetrics import (
    ThresholdSweep,
    VoxelScoreMap,
    accuracy_threshold_sweep,
    benjamini_hochberg,
    correlation_p_values,
    estimate_lag,
    pearson_per_voxel,
    significance_mask,
    synchrony_map,
)
from .numerics import (
    bilinear_resize,
    convolve2d_same,
    correlate_same,
    gaussian_blur,
    gaussian_kernel2d,
    resize_matrix,
    zscore,
)
from .ridge import RidgeConfig, ridge_cv_select, ridge_fit
from .rsa import build_rdm, kendall_tau_a, model_representations, rsa_compare
from .saliencymetrics import (
    FixationSet,
    evaluate_prediction,
    fixation_density_map,
    metric_auc,
    metric_cc,
    metric_nss,
    metric_sauc,
    metric_sim,
    shuffled_negatives,
)
from .synth import SyntheticSpec, gen_synthetic
from .tensorfile import TensorFileError, read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "FixationTable",
    "center_attention_map",
    "channel_conv_same",
    "gaze_attention_map",
    "kde_density_map",
    "kde_log_density",
    "modulate_and_pool",
    "saliency_forward",
    "spatial_softmax",
    "DatasetManifest",
    "EncodingDataset",
    "load_fixations",
    "pair_dataset",
    "save_fixations",
    "Adam",
    "EncoderConfig",
    "EncoderModel",
    "encoder_backward",
    "encoder_forward",
    "encoder_loss",
    "load_model",
    "save_model",
    "train_encoder",
    "ThresholdSweep",
    "VoxelScoreMap",
    "accuracy_threshold_sweep",
    "benjamini_hochberg",
    "correlation_p_values",
    "estimate_lag",
    "pearson_per_voxel",
    "significance_mask",
    "synchrony_map",
    "bilinear_resize",
    "convolve2d_same",
    "correlate_same",
    "gaussian_blur",
    "gaussian_kernel2d",
    "resize_matrix",
    "zscore",
    "RidgeConfig",
    "ridge_cv_select",
    "ridge_fit",
    "build_rdm",
    "kendall_tau_a",
    "model_representations",
    "rsa_compare",
    "FixationSet",
    "evaluate_prediction",
    "fixation_density_map",
    "metric_auc",
    "metric_cc",
    "metric_nss",
    "metric_sauc",
    "metric_sim",
    "shuffled_negatives",
    "SyntheticSpec",
    "gen_synthetic",
    "TensorFileError",
    "read_tensor",
    "write_tensor",
    "__version__",
]
