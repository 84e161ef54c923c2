"""Image buffers, color conversions, channel ops, resizing and file I/O.

Pixels are stored as float64 in [0, 1]; 8-bit quantization happens only at
the file boundary. Every operation returns a new buffer and is responsible
for clamping its own output, so buffers are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptImage,
    DimensionMismatch,
    EmptyROI,
    FileNotFound,
    IndexOutOfRange,
    UnsupportedConversion,
    UnsupportedFormat,
    WrongChannelCount,
    ZeroDimension,
)

# Grayscale weights used for the "gray" pre-processing method.
GRAY_WEIGHTS = (0.3, 0.59, 0.11)
# BT.601 luma weights, used by the YCrCb conversion and luminance estimates.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_READABLE_FORMATS = {"PNG", "JPEG"}


class ColorSpace(Enum):
    RGB = "rgb"
    GRAY = "gray"
    YCRCB = "ycrcb"
    LAB = "lab"


@dataclass(frozen=True)
class ImageBuffer:
    """H x W x C pixel array, C in {1, 3}, intensities in [0, 1].

    The backing array is made read-only so buffers can be treated as
    immutable values.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise WrongChannelCount(
                f"expected HxWx1 or HxWx3 array, got shape {np.shape(self.data)}"
            )
        if arr.size == 0:
            raise DimensionMismatch("empty image")
        if not np.isfinite(arr).all():
            raise ValueError("image contains NaN or Inf")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("intensities outside [0, 1]; clamp before wrapping")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def plane(self, idx: int = 0) -> np.ndarray:
        """2-D view of one channel."""
        return self.data[:, :, idx]

    def to_uint8(self) -> np.ndarray:
        return np.clip(np.rint(self.data * 255.0), 0, 255).astype(np.uint8)

    @staticmethod
    def from_uint8(arr: np.ndarray) -> "ImageBuffer":
        return ImageBuffer(np.asarray(arr, dtype=np.float64) / 255.0)


@dataclass(frozen=True)
class RoiBox:
    """Crop placement inside the original frame, for reassembly."""

    top: int
    left: int
    height: int
    width: int
    full_height: int
    full_width: int


def clipped(arr: np.ndarray) -> ImageBuffer:
    """Wrap an array as a buffer, clamping to [0, 1] and zeroing non-finite values."""
    arr = np.nan_to_num(arr, nan=0.0, posinf=1.0, neginf=0.0)
    return ImageBuffer(np.clip(arr, 0.0, 1.0))


def load_image(path) -> ImageBuffer:
    """Read a PNG or JPEG file as an RGB buffer with intensities in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFound(str(path))
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in _READABLE_FORMATS:
                raise UnsupportedFormat(f"{path}: format {fmt!r} (need PNG or JPEG)")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64) / 255.0
    except UnidentifiedImageError as exc:
        raise CorruptImage(f"{path}: not a decodable image") from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptImage(f"{path}: {exc}") from exc
    return ImageBuffer(arr)


def save_image(path, img: ImageBuffer) -> None:
    """Write 8-bit PNG/JPEG; single-channel buffers go out as grayscale."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".jpg", ".jpeg"):
        raise UnsupportedFormat(f"{path}: write PNG or JPEG only")
    arr = img.to_uint8()
    if img.channels == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    pil.save(path)


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """Weighted channel sum 0.3 R + 0.59 G + 0.11 B."""
    if img.channels != 3:
        raise WrongChannelCount("to_grayscale needs a 3-channel image")
    r, g, b = GRAY_WEIGHTS
    gray = r * img.data[:, :, 0] + g * img.data[:, :, 1] + b * img.data[:, :, 2]
    return clipped(gray)


def luma(img: ImageBuffer) -> np.ndarray:
    """BT.601 luminance plane as a bare array (not clamped; inputs already are)."""
    if img.channels == 1:
        return img.plane(0).copy()
    r, g, b = LUMA_WEIGHTS
    return r * img.data[:, :, 0] + g * img.data[:, :, 1] + b * img.data[:, :, 2]


def extract_channel(img: ImageBuffer, idx: int) -> ImageBuffer:
    if not 0 <= idx < img.channels:
        raise IndexOutOfRange(f"channel {idx} of {img.channels}")
    return ImageBuffer(img.data[:, :, idx].copy())


def merge_channels(r: ImageBuffer, g: ImageBuffer, b: ImageBuffer) -> ImageBuffer:
    planes = (r, g, b)
    for p in planes:
        if p.channels != 1:
            raise WrongChannelCount("merge_channels takes single-channel planes")
    if not (r.data.shape == g.data.shape == b.data.shape):
        raise DimensionMismatch("merge_channels planes differ in size")
    stacked = np.concatenate([p.data for p in planes], axis=2)
    return ImageBuffer(stacked)


def _rgb_to_ycrcb(arr):
    kr, kg, kb = LUMA_WEIGHTS
    r, g, b = arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]
    y = kr * r + kg * g + kb * b
    cr = (r - y) * (0.5 / (1.0 - kr)) + 0.5
    cb = (b - y) * (0.5 / (1.0 - kb)) + 0.5
    return np.stack([y, cr, cb], axis=2)


def _ycrcb_to_rgb(arr):
    kr, kg, kb = LUMA_WEIGHTS
    y, cr, cb = arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]
    r = y + (cr - 0.5) * (2.0 * (1.0 - kr))
    b = y + (cb - 0.5) * (2.0 * (1.0 - kb))
    g = (y - kr * r - kb * b) / kg
    return np.stack([r, g, b], axis=2)


# sRGB <-> CIE Lab, D65 white point.
_D65 = (0.95047, 1.0, 1.08883)
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)


def _srgb_linearize(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_delinearize(c):
    c = np.clip(c, 0.0, None)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _lab_f(t):
    d = 6.0 / 29.0
    return np.where(t > d**3, np.cbrt(t), t / (3 * d * d) + 4.0 / 29.0)


def _lab_f_inv(u):
    d = 6.0 / 29.0
    return np.where(u > d, u**3, 3 * d * d * (u - 4.0 / 29.0))


def _rgb_to_lab(arr):
    lin = _srgb_linearize(arr)
    xyz = lin @ _RGB_TO_XYZ.T
    fx = _lab_f(xyz[:, :, 0] / _D65[0])
    fy = _lab_f(xyz[:, :, 1] / _D65[1])
    fz = _lab_f(xyz[:, :, 2] / _D65[2])
    l_star = 116.0 * fy - 16.0
    a_star = 500.0 * (fx - fy)
    b_star = 200.0 * (fy - fz)
    # Normalized storage: L/100, (a+128)/255, (b+128)/255.
    return np.stack(
        [l_star / 100.0, (a_star + 128.0) / 255.0, (b_star + 128.0) / 255.0], axis=2
    )


def _lab_to_rgb(arr):
    l_star = arr[:, :, 0] * 100.0
    a_star = arr[:, :, 1] * 255.0 - 128.0
    b_star = arr[:, :, 2] * 255.0 - 128.0
    fy = (l_star + 16.0) / 116.0
    fx = fy + a_star / 500.0
    fz = fy - b_star / 200.0
    xyz = np.stack(
        [_lab_f_inv(fx) * _D65[0], _lab_f_inv(fy) * _D65[1], _lab_f_inv(fz) * _D65[2]],
        axis=2,
    )
    lin = xyz @ _XYZ_TO_RGB.T
    return _srgb_delinearize(lin)


def convert_colorspace(img: ImageBuffer, src: ColorSpace, dst: ColorSpace) -> ImageBuffer:
    """Convert between RGB and {GRAY, YCrCb (BT.601), Lab (D65)}."""
    if src == dst:
        return img
    expected = 1 if src == ColorSpace.GRAY else 3
    if img.channels != expected:
        raise WrongChannelCount(f"{src.value} image should have {expected} channel(s)")
    if src == ColorSpace.RGB:
        if dst == ColorSpace.GRAY:
            return to_grayscale(img)
        if dst == ColorSpace.YCRCB:
            return clipped(_rgb_to_ycrcb(img.data))
        if dst == ColorSpace.LAB:
            return clipped(_rgb_to_lab(img.data))
    elif dst == ColorSpace.RGB:
        if src == ColorSpace.GRAY:
            return ImageBuffer(np.repeat(img.data, 3, axis=2))
        if src == ColorSpace.YCRCB:
            return clipped(_ycrcb_to_rgb(img.data))
        if src == ColorSpace.LAB:
            return clipped(_lab_to_rgb(img.data))
    raise UnsupportedConversion(f"{src.value} -> {dst.value}")


def resize_lanczos(img: ImageBuffer, width: int, height: int) -> ImageBuffer:
    """Lanczos-3 resampling to (width, height), clamped to [0, 1]."""
    if width < 1 or height < 1:
        raise ZeroDimension(f"target {width}x{height}")
    planes = []
    for c in range(img.channels):
        pil = Image.fromarray(img.plane(c).astype(np.float32), mode="F")
        out = pil.resize((width, height), resample=Image.Resampling.LANCZOS)
        planes.append(np.asarray(out, dtype=np.float64))
    return clipped(np.stack(planes, axis=2))


def center_crop_roi(img: ImageBuffer, threshold: float = 0.02):
    """Crop to the bounding box of the non-black fundus region.

    A pixel belongs to the border when every channel sits below `threshold`.
    Returns (crop, RoiBox) so the crop can be placed back into the frame.
    """
    if img.height < 32 or img.width < 32:
        raise DimensionMismatch("center_crop_roi needs at least a 32x32 image")
    content = (img.data >= threshold).any(axis=2)
    if not content.any():
        raise EmptyROI(f"no pixel reaches threshold {threshold}")
    rows = np.flatnonzero(content.any(axis=1))
    cols = np.flatnonzero(content.any(axis=0))
    top, bottom = int(rows[0]), int(rows[-1]) + 1
    left, right = int(cols[0]), int(cols[-1]) + 1
    crop = ImageBuffer(img.data[top:bottom, left:right, :].copy())
    box = RoiBox(top, left, bottom - top, right - left, img.height, img.width)
    return crop, box


def embed_roi(frame: ImageBuffer, crop: ImageBuffer, box: RoiBox) -> ImageBuffer:
    """Place a processed crop back into its original frame; border pixels kept."""
    if (frame.height, frame.width) != (box.full_height, box.full_width):
        raise DimensionMismatch("frame does not match the crop's source dimensions")
    if (crop.height, crop.width) != (box.height, box.width):
        raise DimensionMismatch("crop does not match its RoiBox")
    if crop.channels != frame.channels:
        raise WrongChannelCount("crop and frame channel counts differ")
    out = frame.data.copy()
    out[box.top : box.top + box.height, box.left : box.left + box.width, :] = crop.data
    return ImageBuffer(out)
