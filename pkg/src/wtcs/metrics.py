"""Image quality metrics: PSNR and single-scale SSIM.

Images are [0,1] floats internally but both metrics are reported on the
8-bit intensity scale (peak 255), the convention used throughout the
compression literature.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

_WINDOW = 11
_SIGMA = 1.5
_K1 = 0.01
_K2 = 0.03
_PEAK = 255.0


@dataclass(frozen=True)
class QualityReport:
    psnr_db: float
    ssim: float


def _check_pair(ref, test):
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise DimensionError(
            f"image shapes differ: {ref.shape} vs {test.shape}"
        )
    if ref.ndim != 2 or ref.size == 0:
        raise DimensionError(f"expected nonempty 2-D images, got shape {ref.shape}")
    return ref, test


def psnr(ref, test):
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    ref, test = _check_pair(ref, test)
    diff = (ref - test) * _PEAK
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(_PEAK * _PEAK / mse)


def _gaussian_kernel():
    half = (_WINDOW - 1) / 2.0
    x = np.arange(_WINDOW, dtype=np.float64) - half
    g = np.exp(-(x * x) / (2.0 * _SIGMA * _SIGMA))
    return g / np.sum(g)


_KERNEL_1D = _gaussian_kernel()


def _filter_valid(img):
    """Separable Gaussian filter, valid positions only."""
    rows = sliding_window_view(img, _WINDOW, axis=1) @ _KERNEL_1D
    return sliding_window_view(rows, _WINDOW, axis=0) @ _KERNEL_1D


def ssim(ref, test):
    """Mean structural similarity: 11x11 Gaussian window, sigma 1.5.

    The standard single-scale formulation with K1=0.01, K2=0.03 on dynamic
    range 255, averaged over all fully-valid window positions.
    """
    ref, test = _check_pair(ref, test)
    if min(ref.shape) < _WINDOW:
        raise DimensionError(
            f"images must be at least {_WINDOW} pixels per side for SSIM, "
            f"got {ref.shape}"
        )
    x = ref * _PEAK
    y = test * _PEAK
    c1 = (_K1 * _PEAK) ** 2
    c2 = (_K2 * _PEAK) ** 2

    mu_x = _filter_valid(x)
    mu_y = _filter_valid(y)
    xx = _filter_valid(x * x)
    yy = _filter_valid(y * y)
    xy = _filter_valid(x * y)

    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def quality_report(ref, test):
    """Both metrics in one pass-friendly record."""
    return QualityReport(psnr_db=psnr(ref, test), ssim=ssim(ref, test))
