"""Full-reference quality metrics for [0, 1] rasters: PSNR, SSIM and FSIM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

FSIM_T1 = 0.85
FSIM_T2 = 160.0 / 255.0**2
FSIM_MIN_SIZE = 32


@dataclass(frozen=True)
class QualityTriple:
    psnr: float
    ssim: float
    fsim: float


def _pair(ref, test):
    a = np.asarray(ref, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(ref, test) -> float:
    """Peak signal-to-noise ratio with peak 1.0; ``inf`` for identical images."""
    a, b = _pair(ref, test)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _valid_filter(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    half = g.size // 2
    out = ndimage.correlate1d(img, g, axis=0, mode="constant")
    out = ndimage.correlate1d(out, g, axis=1, mode="constant")
    return out[half:img.shape[0] - half, half:img.shape[1] - half]


def ssim_map(ref, test) -> np.ndarray:
    a, b = _pair(ref, test)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = gaussian_window()
    mu_a = _valid_filter(a, g)
    mu_b = _valid_filter(b, g)
    ab = mu_a * mu_b
    var_a = _valid_filter(a * a, g) - mu_a * mu_a
    var_b = _valid_filter(b * b, g) - mu_b * mu_b
    cov = _valid_filter(a * b, g) - ab
    num = (2.0 * ab + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def ssim(ref, test) -> float:
    """Mean SSIM over all fully contained 11x11 Gaussian windows."""
    return float(np.mean(ssim_map(ref, test)))


# --- FSIM -----------------------------------------------------------------

def _freq_grid(rows: int, cols: int):
    def axis(n):
        if n % 2:
            return np.arange(-(n - 1) / 2, (n - 1) / 2 + 1) / (n - 1)
        return np.arange(-n / 2, n / 2) / n

    x, y = np.meshgrid(axis(cols), axis(rows))
    radius = np.fft.ifftshift(np.sqrt(x**2 + y**2))
    theta = np.fft.ifftshift(np.arctan2(-y, x))
    return radius, theta


def phase_congruency(img, nscale: int = 4, norient: int = 4, min_wavelength: float = 6.0,
                     mult: float = 2.0, sigma_onf: float = 0.55,
                     dtheta_on_sigma: float = 1.2, k: float = 2.0,
                     epsilon: float = 1e-4) -> np.ndarray:
    """Kovesi phase congruency summed over orientations (log-Gabor bank)."""
    img = np.asarray(img, dtype=np.float64)
    rows, cols = img.shape
    theta_sigma = np.pi / norient / dtheta_on_sigma
    spectrum = np.fft.fft2(img)

    radius, theta = _freq_grid(rows, cols)
    lowpass = 1.0 / (1.0 + (radius / 0.45) ** (2 * 15))
    radius[0, 0] = 1.0
    sin_t, cos_t = np.sin(theta), np.cos(theta)

    log_gabor = []
    for s in range(nscale):
        fo = 1.0 / (min_wavelength * mult**s)
        lg = np.exp(-(np.log(radius / fo) ** 2) / (2.0 * np.log(sigma_onf) ** 2)) * lowpass
        lg[0, 0] = 0.0
        log_gabor.append(lg)

    # noise statistics only depend on the filters, not on orientation data
    energy_all = np.zeros((rows, cols))
    an_all = np.zeros((rows, cols))
    for o in range(norient):
        angle = o * np.pi / norient
        ds = sin_t * np.cos(angle) - cos_t * np.sin(angle)
        dc = cos_t * np.cos(angle) + sin_t * np.sin(angle)
        spread = np.exp(-np.arctan2(ds, dc) ** 2 / (2.0 * theta_sigma**2))

        sum_e = np.zeros((rows, cols))
        sum_o = np.zeros((rows, cols))
        sum_an = np.zeros((rows, cols))
        responses = []
        spatial = []
        for s in range(nscale):
            filt = log_gabor[s] * spread
            spatial.append(np.real(np.fft.ifft2(filt)) * np.sqrt(rows * cols))
            eo = np.fft.ifft2(spectrum * filt)
            responses.append(eo)
            sum_an += np.abs(eo)
            sum_e += eo.real
            sum_o += eo.imag
            if s == 0:
                em_n = np.sum(filt**2)

        x_energy = np.sqrt(sum_e**2 + sum_o**2) + epsilon
        mean_e = sum_e / x_energy
        mean_o = sum_o / x_energy
        energy = np.zeros((rows, cols))
        for eo in responses:
            e, od = eo.real, eo.imag
            energy += e * mean_e + od * mean_o - np.abs(e * mean_o - od * mean_e)

        median_e2n = np.median(np.abs(responses[0]) ** 2)
        mean_e2n = -median_e2n / np.log(0.5)
        noise_power = mean_e2n / em_n

        est_sum_an2 = sum(f**2 for f in spatial)
        est_sum_aiaj = np.zeros((rows, cols))
        for i in range(nscale - 1):
            for j in range(i + 1, nscale):
                est_sum_aiaj += spatial[i] * spatial[j]
        noise_energy2 = 2.0 * noise_power * est_sum_an2.sum() + 4.0 * noise_power * est_sum_aiaj.sum()
        tau = np.sqrt(noise_energy2 / 2.0)
        noise_mean = tau * np.sqrt(np.pi / 2.0)
        noise_sigma = np.sqrt((2.0 - np.pi / 2.0) * tau**2)
        threshold = (noise_mean + k * noise_sigma) / 1.7

        energy_all += np.maximum(energy - threshold, 0.0)
        an_all += sum_an
    # flat regions have no amplitude at all; their congruency is taken as 0
    return np.divide(energy_all, an_all, out=np.zeros_like(an_all), where=an_all > 0)


SCHARR_X = np.array([[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]]) / 16.0
SCHARR_Y = SCHARR_X.T.copy()


def gradient_magnitude(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    gx = ndimage.convolve(img, SCHARR_X, mode="constant")
    gy = ndimage.convolve(img, SCHARR_Y, mode="constant")
    return np.sqrt(gx**2 + gy**2)


def _fsim_prepare(img: np.ndarray) -> np.ndarray:
    rows, cols = img.shape
    f = max(1, int(round(min(rows, cols) / 256)))
    if f == 1:
        return img
    kernel = np.full((f, f), 1.0 / (f * f))
    smoothed = ndimage.convolve(img, kernel, mode="constant")
    return smoothed[::f, ::f]


def fsim(ref, test) -> float:
    """Feature similarity index (phase congruency + gradient magnitude)."""
    a, b = _pair(ref, test)
    if min(a.shape) < FSIM_MIN_SIZE:
        raise ValueError(f"FSIM needs images of at least {FSIM_MIN_SIZE}x{FSIM_MIN_SIZE}")
    a, b = _fsim_prepare(a), _fsim_prepare(b)
    # the noise model and epsilon assume an 8-bit intensity scale
    pc_a, pc_b = phase_congruency(a * 255.0), phase_congruency(b * 255.0)
    g_a, g_b = gradient_magnitude(a), gradient_magnitude(b)
    s_pc = (2.0 * pc_a * pc_b + FSIM_T1) / (pc_a**2 + pc_b**2 + FSIM_T1)
    s_g = (2.0 * g_a * g_b + FSIM_T2) / (g_a**2 + g_b**2 + FSIM_T2)
    pc_m = np.maximum(pc_a, pc_b)
    total = np.sum(pc_m)
    if total <= 0:
        return float(np.mean(s_g * s_pc))
    return float(np.sum(s_g * s_pc * pc_m) / total)


def quality(ref, test) -> QualityTriple:
    return QualityTriple(psnr(ref, test), ssim(ref, test), fsim(ref, test))
