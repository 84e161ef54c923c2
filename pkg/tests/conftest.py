"""Shared synthetic phantoms for the test suite."""

import numpy as np
import pytest

from fundusprep import ImageBuffer


def fundus_phantom(
    h=120, w=160, vessel_spacing=24, dot_blue=0.005, bg=(0.82, 0.55, 0.28), disc=False
):
    """Colored background with dark vessel lines; dark channel near dot_blue.

    Row lines every vessel_spacing, column lines every ~1.3x that, so a
    15-pixel min-filter window between lines sees only background when the
    spacing is 24 and always sees a line when the spacing is 12. `disc` adds
    a bright optic-disc blob (the brightest structure in the frame).
    """
    img = np.zeros((h, w, 3))
    img[:, :] = bg
    for r in range(vessel_spacing // 2, h, vessel_spacing):
        img[r, :, :] = (0.30, 0.10, dot_blue)
    for c in range(vessel_spacing // 2, w, int(vessel_spacing * 1.3)):
        img[:, c, :] = (0.32, 0.12, dot_blue)
    if disc:
        yy, xx = np.mgrid[0:h, 0:w]
        blob = (yy - h // 3) ** 2 + (xx - w // 3) ** 2 < (min(h, w) // 10) ** 2
        img[blob] = (0.95, 0.82, 0.55)
    return img


def vignette_field(h, w, amp=0.55):
    yy, xx = np.mgrid[0:h, 0:w]
    r = np.sqrt(((yy - h / 2) / (h / 2)) ** 2 + ((xx - w / 2) / (w / 2)) ** 2)
    return 1.0 - amp * np.clip(r, 0, 1) ** 2


def degrade(clean, vignette_amp=0.55, veil=0.2):
    """Apply radial gain then a uniform white veil: I = clean*v*(1-veil) + veil."""
    h, w = clean.shape[:2]
    v = vignette_field(h, w, vignette_amp)
    return np.clip(clean * v[:, :, None] * (1.0 - veil) + veil, 0.0, 1.0)


def vessel_row_mask(h, w, vessel_spacing=24, halo=0):
    """Boolean mask of the phantom's line pixels, optionally dilated by halo."""
    mask = np.zeros((h, w), bool)
    for r in range(vessel_spacing // 2, h, vessel_spacing):
        mask[max(r - halo, 0) : r + halo + 1, :] = True
    for c in range(vessel_spacing // 2, w, int(vessel_spacing * 1.3)):
        mask[:, max(c - halo, 0) : c + halo + 1] = True
    return mask


def as_image(arr):
    return ImageBuffer(np.clip(arr, 0.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
