"""Gray rasters, resampling, patches and full-reference quality metrics.

Images are plain 2-D float64 numpy arrays with intensities in [0, 1].
"""

from .io import ImageFormatError, as_gray, load_image, save_image
from .metrics import QualityTriple, fsim, psnr, quality, ssim
from .resample import degrade, downscale, extract_patches, patch_count, resize

__all__ = [
    "ImageFormatError", "as_gray", "load_image", "save_image", "QualityTriple", "fsim", "psnr",
    "quality", "ssim", "degrade", "downscale", "extract_patches", "patch_count", "resize",
]
