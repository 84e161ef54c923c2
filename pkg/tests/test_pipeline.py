"""Batch runner, augmentation, preview grid, manifest handling, CLI."""

import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fundusprep import ImageBuffer, augment, load_manifest, manifest_from_tree, preview_grid, run_batch, save_image
from fundusprep.errors import LengthMismatch, ManifestInvalid, PairingViolation
from fundusprep.pipeline import check_pairing


def write_dataset(root: Path, n=6, with_masks=False, seed=3):
    """Bordered colored discs, two classes, train/val split; returns manifest path."""
    rng = np.random.default_rng(seed)
    rows = ["path,label,split,mask"]
    for i in range(n):
        h, w = 96, 128
        yy, xx = np.mgrid[0:h, 0:w]
        disc = ((yy - h / 2) ** 2 + (xx - w / 2) ** 2) < (h / 2.4) ** 2
        img = np.full((h, w, 3), 0.005)
        color = rng.random(3) * 0.6 + 0.3
        img[disc] = color
        img[disc] += (rng.random((int(disc.sum()), 3)) - 0.5) * 0.2
        img = np.clip(img, 0, 1)
        path = root / f"img{i}.png"
        save_image(path, ImageBuffer(img))
        mask_cell = ""
        if with_masks:
            mask = np.zeros((h, w), np.float64)
            mask[h // 2, :] = 1.0
            mask_path = root / f"img{i}.mask.png"
            save_image(mask_path, ImageBuffer(mask[:, :, None]))
            mask_cell = mask_path.name
        split = "train" if i < n - 2 else "val"
        rows.append(f"{path.name},{i % 2},{split},{mask_cell}")
    manifest = root / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    return manifest


def tree_hash(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(Path(root).rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


class TestManifest:
    def test_loads_and_counts(self, tmp_path):
        manifest = write_dataset(tmp_path)
        man = load_manifest(manifest, "plus", "base")
        assert len(man.entries) == 6
        assert {e.split for e in man.entries} == {"train", "val"}

    def test_label_out_of_range_for_task(self, tmp_path):
        manifest = tmp_path / "m.csv"
        manifest.write_text("path,label,split\nx.png,5,train\n")
        with pytest.raises(ManifestInvalid):
            load_manifest(manifest, "plus", "base")

    def test_bad_split(self, tmp_path):
        manifest = tmp_path / "m.csv"
        manifest.write_text("path,label,split\nx.png,0,test\n")
        with pytest.raises(ManifestInvalid):
            load_manifest(manifest, "plus", "base")

    def test_bad_header(self, tmp_path):
        manifest = tmp_path / "m.csv"
        manifest.write_text("file,label,split\nx.png,0,train\n")
        with pytest.raises(ManifestInvalid):
            load_manifest(manifest, "plus", "base")

    def test_empty_manifest(self, tmp_path):
        manifest = tmp_path / "m.csv"
        manifest.write_text("path,label,split\n")
        with pytest.raises(ManifestInvalid):
            load_manifest(manifest, "plus", "base")

    def test_unknown_method(self, tmp_path):
        manifest = write_dataset(tmp_path)
        with pytest.raises(ValueError):
            load_manifest(manifest, "plus", "sparkle")

    def test_stage_labels_allow_four_classes(self, tmp_path):
        manifest = tmp_path / "m.csv"
        img = tmp_path / "a.png"
        save_image(img, ImageBuffer(np.full((32, 32, 3), 0.5)))
        manifest.write_text(f"path,label,split\n{img.name},3,train\n{img.name},0,val\n")
        man = load_manifest(manifest, "stages", "base")
        assert man.entries[0].label == 3


class TestRunBatch:
    def test_base_method_processes_all(self, tmp_path):
        man = load_manifest(write_dataset(tmp_path), "plus", "base")
        report = run_batch(man, tmp_path / "out", size=(64, 64))
        assert len(report.processed) == 6 and not report.failures
        pngs = list((tmp_path / "out").rglob("*.png"))
        assert len(pngs) == 6
        assert json.loads((tmp_path / "out" / "method.json").read_text())["method"] == "base"

    def test_deterministic_trees(self, tmp_path):
        man = load_manifest(write_dataset(tmp_path), "plus", "clahe")
        run_batch(man, tmp_path / "a", size=(64, 64), augment_ops=["hflip", "rot15"], seed=9)
        run_batch(man, tmp_path / "b", size=(64, 64), augment_ops=["hflip", "rot15"], seed=9)
        assert tree_hash(tmp_path / "a") == tree_hash(tmp_path / "b")

    def test_resume_skips(self, tmp_path):
        man = load_manifest(write_dataset(tmp_path), "plus", "base")
        run_batch(man, tmp_path / "out", size=(32, 32))
        second = run_batch(man, tmp_path / "out", size=(32, 32))
        assert len(second.skipped) == 6 and not second.processed
        third = run_batch(man, tmp_path / "out", size=(32, 32), force=True)
        assert len(third.processed) == 6

    def test_pairing_violation_before_write(self, tmp_path):
        man = load_manifest(write_dataset(tmp_path), "plus", "gray")
        out = tmp_path / "out"
        run_batch(man, out, size=(32, 32))
        before = tree_hash(out)
        other = load_manifest(tmp_path / "manifest.csv", "plus", "pcar_clahe")
        with pytest.raises(PairingViolation):
            run_batch(other, out, size=(32, 32))
        assert tree_hash(out) == before

    def test_check_pairing_accepts_same_method(self, tmp_path):
        out = tmp_path / "out"
        man = load_manifest(write_dataset(tmp_path), "plus", "gray")
        run_batch(man, out, size=(32, 32))
        check_pairing(out, "gray", "plus")  # should not raise

    def test_missing_file_partial_failure(self, tmp_path):
        manifest = write_dataset(tmp_path)
        extra = manifest.read_text() + "ghost.png,1,val,\n"
        manifest.write_text(extra)
        man = load_manifest(manifest, "plus", "base")
        report = run_batch(man, tmp_path / "out", size=(32, 32))
        assert len(report.failures) == 1
        assert len(report.processed) == 6

    def test_erode_method_uses_masks(self, tmp_path):
        man = load_manifest(write_dataset(tmp_path, with_masks=True), "plus", "erode")
        report = run_batch(man, tmp_path / "out", size=(48, 48))
        assert not report.failures

    def test_erode_finds_sibling_masks_by_convention(self, tmp_path):
        manifest = write_dataset(tmp_path, with_masks=True)
        # strip the mask column values; <stem>.mask.png siblings remain
        lines = manifest.read_text().splitlines()
        manifest.write_text("\n".join(line.rsplit(",", 1)[0] + "," for line in lines) + "\n")
        man = load_manifest(manifest, "plus", "erode")
        assert all(e.mask is None for e in man.entries)
        report = run_batch(man, tmp_path / "out", size=(48, 48))
        assert not report.failures

    def test_erode_missing_mask_is_failure(self, tmp_path):
        man = load_manifest(write_dataset(tmp_path, with_masks=False), "plus", "erode")
        report = run_batch(man, tmp_path / "out", size=(48, 48))
        assert len(report.failures) == len(man.entries)

    def test_tree_round_trip(self, tmp_path):
        man = load_manifest(write_dataset(tmp_path), "plus", "base")
        run_batch(man, tmp_path / "out", size=(32, 32))
        rebuilt = manifest_from_tree(tmp_path / "out")
        assert rebuilt.method == "base" and rebuilt.task == "plus"
        got = sorted((e.split, e.label, e.path.stem) for e in rebuilt.entries)
        want = sorted((e.split, e.label, e.path.stem) for e in man.entries)
        assert got == want


class TestAugment:
    def test_empty_ops_original_only(self, rng):
        img = ImageBuffer(rng.random((16, 16, 3)))
        out = augment(img, [], seed=1)
        assert len(out) == 1 and np.array_equal(out[0].data, img.data)

    def test_hflip_involution(self, rng):
        img = ImageBuffer(rng.random((16, 16, 3)))
        once = augment(img, ["hflip"], seed=0)[1]
        twice = augment(once, ["hflip"], seed=0)[1]
        assert np.array_equal(twice.data, img.data)

    def test_vflip_involution(self, rng):
        img = ImageBuffer(rng.random((16, 16, 3)))
        once = augment(img, ["vflip"], seed=0)[1]
        twice = augment(once, ["vflip"], seed=0)[1]
        assert np.array_equal(twice.data, img.data)

    def test_seeded_determinism(self, rng):
        img = ImageBuffer(rng.random((24, 24, 3)))
        a = augment(img, ["rot15", "brightness"], seed=77)
        b = augment(img, ["rot15", "brightness"], seed=77)
        for x, y in zip(a, b):
            assert np.array_equal(x.data, y.data)
        c = augment(img, ["rot15", "brightness"], seed=78)
        assert not np.array_equal(a[1].data, c[1].data)

    def test_unknown_op(self, rng):
        with pytest.raises(ValueError):
            augment(ImageBuffer(rng.random((8, 8, 3))), ["zoom"], seed=0)


class TestPreviewGrid:
    def test_three_pairs_grid_dims(self, tmp_path, rng):
        before = [ImageBuffer(rng.random((20, 30, 3))) for _ in range(3)]
        after = [ImageBuffer(rng.random((20, 30, 3))) for _ in range(3)]
        path = preview_grid(before, after, tmp_path / "g.png")
        from fundusprep import load_image

        grid = load_image(path)
        assert (grid.height, grid.width) == (40, 90)

    def test_zero_pairs_rejected(self, tmp_path):
        with pytest.raises(LengthMismatch):
            preview_grid([], [], tmp_path / "g.png")

    def test_mixed_sizes_letterboxed(self, tmp_path, rng):
        before = [ImageBuffer(rng.random((20, 30, 3))), ImageBuffer(rng.random((10, 12, 3)))]
        after = [ImageBuffer(rng.random((20, 30, 1))), ImageBuffer(rng.random((20, 30, 3)))]
        path = preview_grid(before, after, tmp_path / "g.png")
        from fundusprep import load_image

        grid = load_image(path)
        assert (grid.height, grid.width) == (40, 60)

    def test_length_mismatch(self, tmp_path, rng):
        with pytest.raises(LengthMismatch):
            preview_grid([ImageBuffer(rng.random((8, 8, 3)))], [], tmp_path / "g.png")


class TestCli:
    def _run(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "fundusprep.cli", *args], capture_output=True, text=True
        )

    def test_run_and_metrics_round_trip(self, tmp_path):
        manifest = write_dataset(tmp_path)
        res = self._run(
            "run", "--manifest", str(manifest), "--task", "plus", "--method", "cgh",
            "--out", str(tmp_path / "out"), "--size", "48",
        )
        assert res.returncode == 0, res.stderr
        assert "6 processed" in res.stdout

        pred = tmp_path / "pred.csv"
        pred.write_text("path,predicted,true\na,0,0\nb,1,1\nc,1,0\n")
        res2 = self._run("metrics", "--pred", str(pred), "--out-csv", str(tmp_path / "m.csv"))
        assert res2.returncode == 0
        assert "Accuracy" in res2.stdout
        assert (tmp_path / "m.csv").read_text().startswith("method,class,")

    def test_run_failure_exit_code(self, tmp_path):
        manifest = write_dataset(tmp_path)
        manifest.write_text(manifest.read_text() + "ghost.png,0,val,\n")
        res = self._run(
            "run", "--manifest", str(manifest), "--task", "plus", "--method", "base",
            "--out", str(tmp_path / "out"), "--size", "32",
        )
        assert res.returncode == 1
        assert "FAILED" in res.stderr

    def test_pairing_violation_exit_code(self, tmp_path):
        manifest = write_dataset(tmp_path)
        out = tmp_path / "out"
        first = self._run(
            "run", "--manifest", str(manifest), "--task", "plus", "--method", "gray",
            "--out", str(out), "--size", "32",
        )
        assert first.returncode == 0
        second = self._run(
            "run", "--manifest", str(manifest), "--task", "plus", "--method", "clahe",
            "--out", str(out), "--size", "32",
        )
        assert second.returncode == 2
        assert "refusing to mix" in second.stderr

    def test_preview_command(self, tmp_path):
        manifest = write_dataset(tmp_path)
        res = self._run(
            "preview", "--manifest", str(manifest), "--task", "plus", "--method", "gray",
            "--out", str(tmp_path / "grid.png"), "-n", "2",
        )
        assert res.returncode == 0
        assert (tmp_path / "grid.png").is_file()
