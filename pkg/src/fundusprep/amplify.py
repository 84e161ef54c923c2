"""Dark-channel amplification family and the auto-illumination selector.

Eight brighten/darken candidates (letters A-D brighten with atmosphere 0,
W-Z darken with atmosphere 1) are built from one median-normalized depth
map, scored by how far each candidate's median luminance lands from 0.5,
and either the best single candidate or a three-way composite is returned.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BadPatchSize, WrongChannelCount
from .filtering import gaussian_blur, guided_filter, min_filter
from .histops import ClaheParams, clahe_rgb3
from .image import ColorSpace, ImageBuffer, center_crop_roi, clipped, convert_colorspace, luma

T_MIN = 0.01
GUIDED_RADIUS = 40
GUIDED_EPS = 1e-3
SHARPEN_AMOUNT = 1.0
SHARPEN_SIGMA = 1.5


class MapVariant(Enum):
    """How the transmission map is derived from the depth map d."""

    T_OF_INV = "t(1-I)"  # 1 - d
    T_OF_I = "t(I)"  # d
    ONE_MINUS_T_OF_I = "1-t(I)"  # 1 - d
    ONE_MINUS_T_OF_INV = "1-t(1-I)"  # d


@dataclass(frozen=True)
class AmplifyMethod:
    letter: str
    atmosphere: float  # 0 brightens, 1 darkens
    variant: MapVariant
    sharpen: bool = False


# Fixed evaluation order; ties resolve to the earliest letter.
AMPLIFY_METHODS = (
    AmplifyMethod("A", 0.0, MapVariant.T_OF_INV),
    AmplifyMethod("B", 0.0, MapVariant.T_OF_I),
    AmplifyMethod("C", 0.0, MapVariant.ONE_MINUS_T_OF_I),
    AmplifyMethod("D", 0.0, MapVariant.ONE_MINUS_T_OF_INV),
    AmplifyMethod("W", 1.0, MapVariant.T_OF_INV),
    AmplifyMethod("X", 1.0, MapVariant.T_OF_I),
    AmplifyMethod("Y", 1.0, MapVariant.ONE_MINUS_T_OF_I),
    AmplifyMethod("Z", 1.0, MapVariant.ONE_MINUS_T_OF_INV),
)

_BRIGHTEN = ("A", "B", "C", "D")
_DARKEN = ("W", "X", "Y", "Z")


@dataclass(frozen=True)
class TransmissionMap:
    """Per-pixel transmission t in [t_min, 1]; t_min > 0 guards the division."""

    t: np.ndarray
    t_min: float = T_MIN

    def __post_init__(self):
        arr = np.asarray(self.t, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("transmission map must be 2-D")
        object.__setattr__(self, "t", arr)

    @property
    def height(self):
        return self.t.shape[0]

    @property
    def width(self):
        return self.t.shape[1]


@dataclass(frozen=True)
class ScoredResult:
    letter: str
    image: ImageBuffer
    score: float


def dark_channel(img: ImageBuffer, patch: int = 15) -> ImageBuffer:
    """Channel-wise minimum followed by an edge-clamped patch minimum filter."""
    if img.channels != 3:
        raise WrongChannelCount("dark_channel needs a 3-channel image")
    if patch < 1 or patch % 2 == 0:
        raise BadPatchSize(f"patch must be odd and >= 1, got {patch}")
    per_pixel_min = img.data.min(axis=2)
    return ImageBuffer(min_filter(per_pixel_min, patch))


def depth_map(img: ImageBuffer) -> ImageBuffer:
    """Luminance of the YCrCb conversion, rescaled so the median sits at 0.5.

    The rescale is piecewise linear around the median (values below map to
    [0, 0.5], values above to [0.5, 1]), which makes the depth map of an
    inverted image the mirror 1 - d. A constant image degenerates to 0.5.
    """
    if img.channels != 3:
        raise WrongChannelCount("depth_map needs a 3-channel image")
    y = convert_colorspace(img, ColorSpace.RGB, ColorSpace.YCRCB).plane(0)
    med = float(np.median(y))
    lo = float(y.min())
    hi = float(y.max())
    d = np.full_like(y, 0.5)
    if hi > med:
        above = y > med
        d[above] = 0.5 + 0.5 * (y[above] - med) / (hi - med)
    if med > lo:
        below = y < med
        d[below] = 0.5 - 0.5 * (med - y[below]) / (med - lo)
    return ImageBuffer(np.clip(d, 0.0, 1.0))


def solve_transmission(
    depth: ImageBuffer,
    variant: MapVariant,
    guide: ImageBuffer | None = None,
    t_min: float = T_MIN,
    radius: int = GUIDED_RADIUS,
    eps: float = GUIDED_EPS,
) -> TransmissionMap:
    """Apply the variant's algebra to the depth map, smooth, clamp to [t_min, 1]."""
    if depth.channels != 1:
        raise WrongChannelCount("solve_transmission expects a single-channel depth map")
    d = depth.plane(0)
    if variant in (MapVariant.T_OF_INV, MapVariant.ONE_MINUS_T_OF_I):
        raw = 1.0 - d
    else:
        raw = d
    guide_plane = guide.plane(0) if guide is not None else d
    smoothed = guided_filter(guide_plane, raw, radius, eps)
    return TransmissionMap(np.clip(smoothed, t_min, 1.0), t_min)


def recover_radiance(img: ImageBuffer, atmosphere: float, tmap: TransmissionMap) -> ImageBuffer:
    """Invert the haze model: J = (I - A(1 - t)) / t, clamped to [0, 1]."""
    if (tmap.height, tmap.width) != (img.height, img.width):
        raise ValueError("transmission map dimensions differ from image")
    t = tmap.t[:, :, np.newaxis]
    j = (img.data - atmosphere * (1.0 - t)) / t
    return clipped(j)


def sharpen(img: ImageBuffer, amount: float = SHARPEN_AMOUNT, sigma: float = SHARPEN_SIGMA) -> ImageBuffer:
    """Unsharp mask: img + amount * (img - blur(img))."""
    if amount == 0.0:
        return img
    blurred = np.stack(
        [gaussian_blur(img.plane(c), sigma) for c in range(img.channels)], axis=2
    )
    return clipped(img.data + amount * (img.data - blurred))


def _score(candidate: ImageBuffer) -> float:
    return abs(float(np.median(luma(candidate))) - 0.5)


def pcar_candidates(
    img: ImageBuffer, use_sharpen: bool = False, t_min: float = T_MIN
) -> list[ScoredResult]:
    """Evaluate all eight amplification candidates on an ROI-sized image."""
    if img.channels != 3:
        raise WrongChannelCount("pcar needs a 3-channel image")
    depth = depth_map(img)
    results = []
    for method in AMPLIFY_METHODS:
        tmap = solve_transmission(depth, method.variant, guide=depth, t_min=t_min)
        candidate = recover_radiance(img, method.atmosphere, tmap)
        if use_sharpen:
            candidate = sharpen(candidate)
        results.append(ScoredResult(method.letter, candidate, _score(candidate)))
    return results


def pcar(
    img: ImageBuffer,
    mode: str = "composite",
    use_sharpen: bool = False,
    roi_threshold: float = 0.02,
    t_min: float = T_MIN,
) -> ImageBuffer:
    """Auto-illumination amplification; output covers the cropped fundus region.

    mode "single" returns the candidate whose median luminance is closest to
    0.5; "composite" averages the two best brightening candidates with the
    most-offset darkening candidate.
    """
    if mode not in ("single", "composite"):
        raise ValueError(f"mode must be 'single' or 'composite', got {mode!r}")
    crop, _box = center_crop_roi(img, roi_threshold)
    results = pcar_candidates(crop, use_sharpen=use_sharpen, t_min=t_min)
    if mode == "single":
        best = min(results, key=lambda r: r.score)  # ties keep A..Z order
        return best.image
    brighten = [r for r in results if r.letter in _BRIGHTEN]
    darken = [r for r in results if r.letter in _DARKEN]
    brighten_sorted = sorted(brighten, key=lambda r: r.score)  # stable: order breaks ties
    img1 = brighten_sorted[0]
    img2 = brighten_sorted[1]
    img3 = max(darken, key=lambda r: r.score)
    mean = (img1.image.data + img2.image.data + img3.image.data) / 3.0
    return clipped(mean)


def pcar_clahe(
    img: ImageBuffer,
    use_sharpen: bool = False,
    roi_threshold: float = 0.02,
) -> ImageBuffer:
    """Composite amplification followed by 3-channel CLAHE at clip 2.0."""
    amplified = pcar(img, mode="composite", use_sharpen=use_sharpen, roi_threshold=roi_threshold)
    return clahe_rgb3(amplified, ClaheParams(clip_limit=2.0))
