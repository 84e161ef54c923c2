"""Histogram contrast methods: HE, CLAHE (per-channel and 3-channel RGB), CGH."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TileTooSmall, WrongChannelCount
from .image import ImageBuffer, extract_channel, merge_channels

N_BINS = 256
MIN_TILE_PIXELS = 8


@dataclass(frozen=True)
class ClaheParams:
    """clip_limit caps each histogram bin at clip_limit times the mean bin count."""

    clip_limit: float = 2.0
    tile_grid: tuple = (8, 8)

    def __post_init__(self):
        if self.clip_limit < 1.0:
            raise ValueError("clip_limit must be >= 1.0")
        rows, cols = self.tile_grid
        if rows < 1 or cols < 1:
            raise ValueError("tile_grid dims must be >= 1")


def _to_bins(plane: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(plane * 255.0), 0, 255).astype(np.intp)


def _cdf_lut(hist: np.ndarray) -> np.ndarray:
    total = hist.sum()
    if total <= 0:
        return np.linspace(1.0 / N_BINS, 1.0, N_BINS)
    return np.cumsum(hist) / total


def hist_equalize(img: ImageBuffer) -> ImageBuffer:
    """Map intensities through their own CDF. Monotone; output in (0, 1]."""
    if img.channels != 1:
        raise WrongChannelCount("hist_equalize needs a single-channel image")
    bins = _to_bins(img.plane(0))
    hist = np.bincount(bins.ravel(), minlength=N_BINS).astype(np.float64)
    lut = _cdf_lut(hist)
    return ImageBuffer(lut[bins])


def _clipped_lut(tile_bins: np.ndarray, clip_limit: float) -> np.ndarray:
    """Tile LUT: clip histogram, spread the excess uniformly once, discard the rest."""
    hist = np.bincount(tile_bins.ravel(), minlength=N_BINS).astype(np.float64)
    n_px = tile_bins.size
    if math.isfinite(clip_limit):
        limit = clip_limit * n_px / N_BINS
        kept = np.minimum(hist, limit)
        excess = n_px - kept.sum()
        kept += excess / N_BINS
        kept = np.minimum(kept, limit)
        hist = kept
    return _cdf_lut(hist)


def clahe_channel(img: ImageBuffer, params: ClaheParams) -> ImageBuffer:
    """Per-tile clipped equalization with bilinear blending between tile LUTs."""
    if img.channels != 1:
        raise WrongChannelCount("clahe_channel needs a single-channel image")
    rows, cols = params.tile_grid
    h, w = img.height, img.width
    if h // rows < MIN_TILE_PIXELS or w // cols < MIN_TILE_PIXELS:
        raise TileTooSmall(
            f"{rows}x{cols} grid on {h}x{w} image makes tiles under "
            f"{MIN_TILE_PIXELS}x{MIN_TILE_PIXELS}"
        )
    plane = img.plane(0)
    bins = _to_bins(plane)

    row_edges = np.linspace(0, h, rows + 1).astype(int)
    col_edges = np.linspace(0, w, cols + 1).astype(int)
    luts = np.empty((rows, cols, N_BINS))
    for r in range(rows):
        for c in range(cols):
            tile = bins[row_edges[r] : row_edges[r + 1], col_edges[c] : col_edges[c + 1]]
            luts[r, c] = _clipped_lut(tile, params.clip_limit)

    # Bilinear interpolation between tile-center mappings; borders clamp to
    # the outermost tile.
    centers_y = (row_edges[:-1] + row_edges[1:] - 1) / 2.0
    centers_x = (col_edges[:-1] + col_edges[1:] - 1) / 2.0

    def _axis_weights(coords, centers):
        hi = np.searchsorted(centers, coords)
        lo = np.clip(hi - 1, 0, len(centers) - 1)
        hi = np.clip(hi, 0, len(centers) - 1)
        span = centers[hi] - centers[lo]
        frac = np.where(span > 0, (coords - centers[lo]) / np.where(span > 0, span, 1), 0.0)
        return lo, hi, np.clip(frac, 0.0, 1.0)

    y_lo, y_hi, wy = _axis_weights(np.arange(h, dtype=np.float64), centers_y)
    x_lo, x_hi, wx = _axis_weights(np.arange(w, dtype=np.float64), centers_x)

    yl = y_lo[:, None]
    yh = y_hi[:, None]
    xl = x_lo[None, :]
    xh = x_hi[None, :]
    wy = wy[:, None]
    wx = wx[None, :]

    v00 = luts[yl, xl, bins]
    v01 = luts[yl, xh, bins]
    v10 = luts[yh, xl, bins]
    v11 = luts[yh, xh, bins]
    out = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11)
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def clahe_rgb3(img: ImageBuffer, params: ClaheParams | None = None) -> ImageBuffer:
    """CLAHE applied to R, G and B independently, then remerged (clip 2.0 default)."""
    if img.channels != 3:
        raise WrongChannelCount("clahe_rgb3 needs a 3-channel image")
    params = params or ClaheParams()
    planes = [clahe_channel(extract_channel(img, c), params) for c in range(3)]
    return merge_channels(*planes)


def cgh(img: ImageBuffer, params: ClaheParams | None = None) -> ImageBuffer:
    """3-channel CLAHE, keep the green plane, then plain histogram equalization."""
    if img.channels != 3:
        raise WrongChannelCount("cgh needs a 3-channel image")
    return hist_equalize(extract_channel(clahe_rgb3(img, params), 1))
