"""Acceptance gate: one test per criterion, each at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS line per
criterion.
"""

import time

import numpy as np
import pytest

from conftest import as_image, degrade, fundus_phantom, vessel_row_mask
from fundusprep import (
    ErosionParams,
    ImageBuffer,
    TransmissionMap,
    VesselMask,
    blend_vessel,
    clean_image,
    dpfrr,
    dpfrr_clahe,
    hist_equalize,
    load_manifest,
    metrics,
    pcar,
    pcar_candidates,
    recover_radiance,
    run_batch,
    to_grayscale,
)
from fundusprep.amplify import _BRIGHTEN, _DARKEN
from fundusprep.errors import PairingViolation
from fundusprep.histops import ClaheParams, clahe_channel
from fundusprep.image import luma
from fundusprep.metrics import ConfusionMatrix, positive_class_row
from test_erosion import brute_force_blend
from test_pipeline import tree_hash, write_dataset


def _ok(name):
    print(f"\nACCEPTANCE PASS: {name}")


def test_c1_metric_reproduction():
    start = time.perf_counter()
    rep = metrics(ConfusionMatrix(np.array([[72, 0], [2, 11]])))
    plus = positive_class_row(rep, 1)
    assert rep.overall_accuracy == pytest.approx(0.9765, abs=0.0001)
    assert plus.sensitivity == pytest.approx(1.00, abs=1e-9)
    assert plus.precision == pytest.approx(0.846, abs=0.001)
    assert round(plus.precision, 2) == 0.85
    assert plus.specificity == pytest.approx(0.973, abs=0.001)
    assert time.perf_counter() - start < 1.0
    _ok("metric reproduction (plus-disease table)")


def test_c2_stage_table_cross_check():
    start = time.perf_counter()
    stage_cm = ConfusionMatrix(
        np.array([[10, 2, 2, 1], [2, 6, 1, 0], [3, 1, 15, 1], [1, 1, 0, 12]])
    )
    rep = metrics(stage_cm)
    reference_sensitivity = [0.63, 0.60, 0.83, 0.86]
    for row, want in zip(rep.per_class, reference_sensitivity):
        assert row.sensitivity == pytest.approx(want, abs=0.01)
    assert rep.per_class[3].sensitivity == pytest.approx(12 / 14, abs=1e-9)
    assert time.perf_counter() - start < 1.0
    _ok("stage-table cross-check (4-class sensitivities)")


def test_c3_grayscale_conformance():
    rng = np.random.default_rng(101)
    n = 100_000
    h, w = 250, 400  # 100k pixels
    data = rng.random((h, w, 3))
    out = to_grayscale(ImageBuffer(data)).plane(0)
    # independent scalar oracle, plain Python arithmetic
    flat = data.reshape(-1, 3)
    got = out.ravel()
    worst = 0.0
    for i in range(n):
        r, g, b = flat[i]
        expected = 0.3 * float(r) + 0.59 * float(g) + 0.11 * float(b)
        worst = max(worst, abs(expected - float(got[i])))
    assert worst <= 1.0 / 255.0
    _ok(f"grayscale conformance (1e5 pixels, max err {worst:.2e})")


def test_c4_clahe_oracle_single_tile():
    rng = np.random.default_rng(202)
    params = ClaheParams(clip_limit=float("inf"), tile_grid=(1, 1))
    worst = 0.0
    for _ in range(100):
        img = ImageBuffer(rng.random((64, 64, 1)))
        via_clahe = clahe_channel(img, params)
        via_he = hist_equalize(img)
        worst = max(worst, float(np.abs(via_clahe.data - via_he.data).max()))
    assert worst <= 1.0 / 255.0
    _ok(f"CLAHE single-tile oracle (100 images, max gap {worst:.2e})")


def test_c5_pcar_selection_property():
    rng = np.random.default_rng(303)
    for _ in range(50):
        img = ImageBuffer(rng.random((40, 56, 3)) * 0.8 + 0.1)
        cands = pcar_candidates(img)
        assert len(cands) == 8
        best = min(cands, key=lambda r: r.score)  # exhaustive argmin
        single = pcar(img, mode="single")
        assert np.array_equal(single.data, best.image.data)

        comp = pcar(img, mode="composite")
        brighten = sorted((c for c in cands if c.letter in _BRIGHTEN), key=lambda r: r.score)
        darken = max((c for c in cands if c.letter in _DARKEN), key=lambda r: r.score)
        trio = [brighten[0].image.data, brighten[1].image.data, darken.image.data]
        lo = np.minimum.reduce(trio)
        hi = np.maximum.reduce(trio)
        assert (comp.data >= lo - 1e-12).all() and (comp.data <= hi + 1e-12).all()
    _ok("amplification selection property (50 phantoms, envelope held)")


def test_c6_dehazing_identity():
    rng = np.random.default_rng(404)
    img = ImageBuffer(rng.random((32, 48, 3)))
    unity = TransmissionMap(np.ones((32, 48)))
    for atmosphere in (0.0, 1.0):
        out = recover_radiance(img, atmosphere, unity)
        assert np.array_equal(out.data, img.data)  # bit exact
    half = TransmissionMap(np.full((1, 1), 0.5))
    value = recover_radiance(ImageBuffer(np.full((1, 1, 3), 0.75)), 1.0, half).data[0, 0, 0]
    assert abs(value - 0.5) <= 1e-9
    _ok("dehazing identity (t=1 bit-exact; A=1,t=0.5,I=0.75 -> 0.5)")


def test_c7_dpfrr_phantom_restoration():
    clean = fundus_phantom()
    degraded = degrade(clean, vignette_amp=0.55, veil=0.2)
    deg_img = as_image(degraded)

    start = time.perf_counter()
    restored = dpfrr(deg_img)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0

    def l2(a, b):
        return float(np.sqrt(np.mean((a - b) ** 2)))

    assert l2(restored.data, clean) < l2(degraded, clean)

    h, w = clean.shape[:2]
    lines = vessel_row_mask(h, w, 24, halo=0)
    ring = vessel_row_mask(h, w, 24, halo=4) & ~vessel_row_mask(h, w, 24, halo=2)

    def contrast(img):
        lum = luma(img)
        return abs(lum[ring].mean() - lum[lines].mean())

    start = time.perf_counter()
    hybrid = dpfrr_clahe(deg_img)
    assert time.perf_counter() - start < 10.0
    assert contrast(hybrid) >= contrast(restored)
    _ok(
        f"restoration phantom (L2 {l2(degraded, clean):.4f} -> {l2(restored.data, clean):.4f}, "
        f"{elapsed * 1000:.0f} ms)"
    )


def test_c8_erosion_exactness():
    rng = np.random.default_rng(505)
    # 100 random image/mask pairs: non-vessel pixels bit-identical
    for _ in range(100):
        img = ImageBuffer(rng.random((32, 32, 3)))
        mask_vals = rng.random((32, 32))
        out = clean_image(img, VesselMask(mask_vals))
        keep = mask_vals <= 0.1
        assert np.array_equal(out.data[keep], img.data[keep])

    # 1-px line contrast collapses to <= 20% under default params
    field = np.full((64, 64), 0.8)
    field[32, :] = 0.2
    mask = np.zeros((64, 64))
    mask[32, :] = 1.0
    out = blend_vessel(ImageBuffer(field[:, :, None]), VesselMask(mask)).plane(0)
    residual = abs(out[32, :].mean() - 0.8)
    assert residual <= 0.2 * 0.6

    # brute-force box-average oracle on a <= 64x64 image
    small = rng.random((24, 24))
    small_mask = (rng.random((24, 24)) > 0.6).astype(float)
    got = blend_vessel(
        ImageBuffer(small[:, :, None]), VesselMask(small_mask), ErosionParams(start_patch=8)
    ).plane(0)
    want = brute_force_blend(small, small_mask, start_patch=8)
    assert np.abs(got - want).max() <= 1e-12
    _ok(f"erosion exactness (100 pairs bit-identical; line residual {residual:.4f})")


def test_c9_pipeline_determinism(tmp_path):
    manifest_path = write_dataset(tmp_path)
    man = load_manifest(manifest_path, "plus", "clahe")
    run_batch(man, tmp_path / "a", size=(64, 64), augment_ops=["hflip", "rot15"], seed=11)
    run_batch(man, tmp_path / "b", size=(64, 64), augment_ops=["hflip", "rot15"], seed=11)
    assert tree_hash(tmp_path / "a") == tree_hash(tmp_path / "b")

    # mixed-method pairing rejected before any file lands
    other = load_manifest(manifest_path, "plus", "gray")
    before = tree_hash(tmp_path / "a")
    with pytest.raises(PairingViolation):
        run_batch(other, tmp_path / "a", size=(64, 64))
    assert tree_hash(tmp_path / "a") == before
    _ok("pipeline determinism and pairing enforcement")
