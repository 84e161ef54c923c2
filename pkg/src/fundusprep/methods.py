"""Registry mapping method tags to their image transformations."""

from __future__ import annotations

from dataclasses import dataclass, field

from .amplify import pcar, pcar_clahe
from .erosion import ErosionParams, VesselMask, clean_image
from .histops import ClaheParams, cgh, clahe_rgb3
from .image import ImageBuffer, to_grayscale
from .restore import DpfrParams, dpfrr, dpfrr_clahe

METHOD_TAGS = (
    "base",
    "gray",
    "clahe",
    "cgh",
    "pcar",
    "pcar_clahe",
    "dpfrr",
    "dpfrr_clahe",
    "erode",
    "erode_dpfrr_clahe",
)

MASK_METHODS = ("erode", "erode_dpfrr_clahe")


def normalize_tag(tag: str) -> str:
    tag = tag.strip().lower().replace("-", "_")
    if tag not in METHOD_TAGS:
        raise ValueError(f"unknown method {tag!r}; choose from {', '.join(METHOD_TAGS)}")
    return tag


def needs_mask(tag: str) -> bool:
    return normalize_tag(tag) in MASK_METHODS


@dataclass(frozen=True)
class MethodSettings:
    """Per-method tuning shared by the CLI and the batch runner."""

    clahe: ClaheParams = field(default_factory=ClaheParams)
    dpfr: DpfrParams = field(default_factory=DpfrParams)
    erosion: ErosionParams = field(default_factory=ErosionParams)
    pcar_mode: str = "composite"
    sharpen: bool = False
    roi_threshold: float = 0.02


def apply_method(
    tag: str,
    img: ImageBuffer,
    mask: VesselMask | None = None,
    settings: MethodSettings | None = None,
) -> ImageBuffer:
    """Run one pre-processing method; erode variants require a vessel mask."""
    tag = normalize_tag(tag)
    s = settings or MethodSettings()
    if tag in MASK_METHODS:
        if mask is None:
            raise ValueError(f"method {tag!r} needs a vessel mask")
        eroded = clean_image(img, mask, s.erosion)
        if tag == "erode":
            return eroded
        return dpfrr_clahe(eroded, s.dpfr, s.roi_threshold)
    if tag == "base":
        return img
    if tag == "gray":
        return to_grayscale(img)
    if tag == "clahe":
        return clahe_rgb3(img, s.clahe)
    if tag == "cgh":
        return cgh(img, s.clahe)
    if tag == "pcar":
        return pcar(img, mode=s.pcar_mode, use_sharpen=s.sharpen, roi_threshold=s.roi_threshold)
    if tag == "pcar_clahe":
        return pcar_clahe(img, use_sharpen=s.sharpen, roi_threshold=s.roi_threshold)
    if tag == "dpfrr":
        return dpfrr(img, s.dpfr, s.roi_threshold)
    if tag == "dpfrr_clahe":
        return dpfrr_clahe(img, s.dpfr, s.roi_threshold)
    raise AssertionError(f"unhandled tag {tag}")
