"""Iris segmentation, normalization, encoding and matching."""

from .codes import (ENCODERS, GABOR_WAVELENGTHS, IrisCode, encode_gabor, encode_qsw,
                    gabor_kernel, hamming_distance, load_template, qsw_details, save_template)
from .normalize import NormalizedIris, normalize, sample_grid
from .segment import (Circle, SegmentationError, SegmentationResult, SegmentConfig,
                      load_segmentation, save_segmentation, segment, sidecar_path)
from .sift import KeypointSet, sift_extract, sift_match

__all__ = [
    "ENCODERS", "GABOR_WAVELENGTHS", "IrisCode", "encode_gabor", "encode_qsw", "gabor_kernel",
    "hamming_distance", "load_template", "qsw_details", "save_template", "NormalizedIris",
    "normalize", "sample_grid", "Circle", "SegmentationError", "SegmentationResult",
    "SegmentConfig", "load_segmentation", "save_segmentation", "segment", "sidecar_path",
    "KeypointSet", "sift_extract", "sift_match",
]
