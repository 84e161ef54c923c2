"""Reflection-aware restoration tuned for 640x480 pediatric fundus captures.

Pipeline: crop the fundus region, divide out a smooth per-channel
illumination field, remove the dark-channel veil (a coarse pass scaled by
dehaze_coarse_gain, then a gentler fine pass on luminance), and subtract a
smooth scatter residual. The border outside the region is left untouched.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateImage, WrongChannelCount
from .filtering import gaussian_blur, guided_filter, min_filter
from .histops import ClaheParams, clahe_rgb3
from .image import (
    LUMA_WEIGHTS,
    ImageBuffer,
    center_crop_roi,
    clipped,
    embed_roi,
    luma,
)

log = logging.getLogger(__name__)

# Coarse-stage dehaze strength before the gain multiplier is applied.
COARSE_DEHAZE_BASE = 0.15
DARK_PATCH = 15
T_FLOOR = 0.05
ATMOSPHERE_PERCENTILE = 99.0


@dataclass(frozen=True)
class DpfrParams:
    """Tuning knobs; zero disables the corresponding correction entirely."""

    eps_coarse: float = 1e-3
    dehaze_coarse_gain: float = 2.0
    dehaze_fine: float = 0.5
    scatter_strength: float = 0.5

    def __post_init__(self):
        for name in ("eps_coarse", "dehaze_coarse_gain", "dehaze_fine", "scatter_strength"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.eps_coarse == 0:
            raise ValueError("eps_coarse must be > 0")


@dataclass(frozen=True)
class ReflectionModel:
    """Estimated fields of the two-component reflection model plus restored image."""

    observed: ImageBuffer
    illumination: np.ndarray  # per-channel smooth field, mean-normalized
    lens_transmission: np.ndarray  # folded into illumination; kept at 1
    scatter_transmission: np.ndarray
    restored: ImageBuffer

    def reconstruction_residual(self) -> float:
        """RMS gap between the observed image and the model's forward render."""
        t_sc = self.scatter_transmission[:, :, np.newaxis]
        forward = (
            self.illumination
            * self.lens_transmission[:, :, np.newaxis] ** 2
            * (t_sc**2 * self.restored.data + 1.0 - t_sc)
        )
        diff = self.observed.data - forward
        return float(np.sqrt(np.mean(diff * diff)))


def _atmosphere(img: ImageBuffer) -> np.ndarray:
    """Per-channel bright-end estimate, floored away from zero."""
    a = np.percentile(img.data.reshape(-1, img.channels), ATMOSPHERE_PERCENTILE, axis=0)
    return np.maximum(a, 0.05)


def _normalized_dark_channel(img: ImageBuffer, atmosphere: np.ndarray) -> np.ndarray:
    ratio = np.min(img.data / atmosphere[np.newaxis, np.newaxis, :], axis=2)
    return min_filter(np.clip(ratio, 0.0, 1.0), DARK_PATCH)


def _dehaze_luminance(img: ImageBuffer, strength: float) -> ImageBuffer:
    """Invert the haze model on luminance and scale channels proportionally."""
    if strength == 0.0:
        return img
    atmo = _atmosphere(img)
    dark = _normalized_dark_channel(img, atmo)
    t = np.clip(1.0 - strength * dark, T_FLOOR, 1.0)
    lum = luma(img)
    atmo_l = float(np.dot(LUMA_WEIGHTS, atmo))
    restored_l = (lum - atmo_l * (1.0 - t)) / t
    gain = np.where(lum > 1e-6, restored_l / np.maximum(lum, 1e-6), 1.0)
    gain = np.clip(gain, 0.0, None)
    return clipped(img.data * gain[:, :, np.newaxis])


def coarse_illumination(img: ImageBuffer, params: DpfrParams | None = None):
    """Divide out a smooth per-channel illumination field, then a coarse dehaze.

    Returns (corrected image, illumination field). The field is normalized to
    its per-channel mean, so a uniformly lit image passes through unchanged.
    """
    params = params or DpfrParams()
    if img.channels != 3:
        raise WrongChannelCount("coarse_illumination needs a 3-channel image")
    radius = max(min(img.height, img.width) // 4, 16)
    fields = []
    corrected = np.empty_like(img.data)
    for c in range(3):
        plane = img.plane(c)
        if plane.max() <= 0.0:
            raise DegenerateImage(f"channel {c} is constant zero")
        # Guiding with a blurred plane keeps the field blind to thin structure
        # (vessels survive the division) while eps still sets how tightly the
        # field follows large-scale shading.
        smooth_guide = gaussian_blur(plane, sigma=radius / 2.0)
        field = guided_filter(smooth_guide, plane, radius, params.eps_coarse)
        field = np.maximum(field, 1e-4)
        rel = field / field.mean()
        corrected[:, :, c] = plane / rel
        fields.append(rel)
    out = clipped(corrected)
    out = _dehaze_luminance(out, COARSE_DEHAZE_BASE * params.dehaze_coarse_gain)
    return out, np.stack(fields, axis=2)


def fine_illumination(img: ImageBuffer, params: DpfrParams | None = None) -> ImageBuffer:
    """Gentle grayscale dark-channel dehaze; strength dehaze_fine, 0 is identity."""
    params = params or DpfrParams()
    if img.channels != 3:
        raise WrongChannelCount("fine_illumination needs a 3-channel image")
    return _dehaze_luminance(img, params.dehaze_fine)


def scatter_suppression(img: ImageBuffer, params: DpfrParams | None = None):
    """Subtract a smooth glare residual weighted by scatter_strength.

    Returns (corrected image, scatter transmission estimate). The residual is
    the blurred luminance excess over the median, so constants and local
    gradients survive.
    """
    params = params or DpfrParams()
    lum = luma(img)
    sigma = max(min(img.height, img.width) / 16.0, 4.0)
    excess = gaussian_blur(np.maximum(lum - float(np.median(lum)), 0.0), sigma)
    t_sc = np.clip(1.0 - excess, 1e-3, 1.0)
    out = clipped(img.data - params.scatter_strength * excess[:, :, np.newaxis])
    return out, t_sc


def dpfrr_with_model(
    img: ImageBuffer, params: DpfrParams | None = None, roi_threshold: float = 0.02
):
    """Full restoration; returns (image, ReflectionModel) for the cropped region."""
    params = params or DpfrParams()
    if img.channels != 3:
        raise WrongChannelCount("dpfrr needs a 3-channel image")
    crop, box = center_crop_roi(img, roi_threshold)
    stage1, illumination = coarse_illumination(crop, params)
    stage2 = fine_illumination(stage1, params)
    stage3, t_sc = scatter_suppression(stage2, params)
    model = ReflectionModel(
        observed=crop,
        illumination=illumination,
        lens_transmission=np.ones((crop.height, crop.width)),
        scatter_transmission=t_sc,
        restored=stage3,
    )
    residual = model.reconstruction_residual()
    log.debug("reflection model residual: %.6f", residual)
    if not np.isfinite(residual):
        raise DegenerateImage("non-finite reconstruction residual")
    return embed_roi(img, stage3, box), model


def dpfrr(
    img: ImageBuffer, params: DpfrParams | None = None, roi_threshold: float = 0.02
) -> ImageBuffer:
    """Crop, correct illumination, dehaze, suppress scatter, reassemble."""
    out, _model = dpfrr_with_model(img, params, roi_threshold)
    return out


def dpfrr_clahe(
    img: ImageBuffer, params: DpfrParams | None = None, roi_threshold: float = 0.02
) -> ImageBuffer:
    """Restoration followed by 3-channel CLAHE at clip 2.0."""
    return clahe_rgb3(dpfrr(img, params, roi_threshold), ClaheParams(clip_limit=2.0))
