"""Super-resolution engines: interpolation, SRCNN, VDCNN, SRGAN and PCA eigen-patches."""

from .engine import (ENGINE_KINDS, INTERPOLATION_KINDS, SREngine, UnsupportedFactorError,
                     engine_digest, interpolation_engine, load_engine, reconstruct_degraded,
                     save_engine, super_resolve)
from .models import (SRCNN_MARGIN, build_discriminator, build_generator, build_srcnn, build_srgan,
                     build_vdcnn, conv_layers)
from .pairs import PairSet, TrainingPair, prepare_pairs
from .pca import PCAEigenPatchModel, combination_weights, pca_reconstruct, pca_train
from .train import (discriminator_accuracy, fit_regression, train_pca, train_srcnn, train_srgan,
                    train_vdcnn, warmup_discriminator)

__all__ = [
    "ENGINE_KINDS", "INTERPOLATION_KINDS", "SREngine", "UnsupportedFactorError", "engine_digest",
    "interpolation_engine", "load_engine", "reconstruct_degraded", "save_engine", "super_resolve",
    "SRCNN_MARGIN", "build_discriminator", "build_generator", "build_srcnn", "build_srgan",
    "build_vdcnn", "conv_layers", "PairSet", "TrainingPair", "prepare_pairs", "PCAEigenPatchModel",
    "combination_weights", "pca_reconstruct", "pca_train", "discriminator_accuracy",
    "fit_regression", "train_pca", "train_srcnn", "train_srgan", "train_vdcnn",
    "warmup_discriminator",
]
