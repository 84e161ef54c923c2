"""Shared low-level filters: box mean, gaussian, minimum and guided filter.

All functions work on bare 2-D float arrays; callers wrap results back into
buffers and handle clamping.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

_PAD_MODE = {"wrap": "wrap", "clamp": "edge"}
_NDIMAGE_MODE = {"wrap": "wrap", "clamp": "nearest"}


def box_mean(plane: np.ndarray, size: int, boundary: str = "clamp") -> np.ndarray:
    """Mean over a size x size window via an integral image.

    The window for output pixel i spans rows [i - (size-1)//2, i + size//2],
    so odd sizes are centered and even sizes lean one pixel down-right.
    """
    if size < 1:
        raise ValueError("box size must be >= 1")
    if size == 1:
        return plane.astype(np.float64, copy=True)
    lo = (size - 1) // 2
    hi = size // 2
    padded = np.pad(plane.astype(np.float64), ((lo, hi), (lo, hi)), mode=_PAD_MODE[boundary])
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    np.cumsum(np.cumsum(padded, axis=0), axis=1, out=integral[1:, 1:])
    h, w = plane.shape
    s = integral
    total = (
        s[size : size + h, size : size + w]
        - s[0:h, size : size + w]
        - s[size : size + h, 0:w]
        + s[0:h, 0:w]
    )
    return total / float(size * size)


def gaussian_blur(plane: np.ndarray, sigma: float, boundary: str = "clamp") -> np.ndarray:
    if sigma <= 0:
        return plane.astype(np.float64, copy=True)
    return ndimage.gaussian_filter(
        plane.astype(np.float64), sigma=sigma, mode=_NDIMAGE_MODE[boundary]
    )


def min_filter(plane: np.ndarray, size: int) -> np.ndarray:
    """Edge-clamped minimum filter."""
    if size == 1:
        return plane.astype(np.float64, copy=True)
    return ndimage.minimum_filter(plane.astype(np.float64), size=size, mode="nearest")


def guided_filter(
    guide: np.ndarray, src: np.ndarray, radius: int, eps: float
) -> np.ndarray:
    """Classic single-channel guided filter (He et al. lineage).

    Smooths `src` while following edges of `guide`; larger eps smooths more.
    """
    size = 2 * int(radius) + 1
    guide = guide.astype(np.float64)
    src = src.astype(np.float64)
    mean_g = box_mean(guide, size)
    mean_s = box_mean(src, size)
    corr_gg = box_mean(guide * guide, size)
    corr_gs = box_mean(guide * src, size)
    var_g = np.maximum(corr_gg - mean_g * mean_g, 0.0)
    cov_gs = corr_gs - mean_g * mean_s
    a = cov_gs / (var_g + eps)
    b = mean_s - a * mean_g
    mean_a = box_mean(a, size)
    mean_b = box_mean(b, size)
    return mean_a * guide + mean_b
