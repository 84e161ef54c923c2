"""Synthetic dataset builders; datasets are produced through the fundus-prep CLI."""

import os
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "3")


def fundus_prep_cmd():
    exe = shutil.which("fundus-prep")
    if exe:
        return [exe]
    return [sys.executable, "-m", "fundusprep.cli"]


def write_disc_images(root: Path, n_train: int, n_val: int, classes=2, seed=0):
    """Colored-disc PNGs plus a manifest CSV; returns the manifest path."""
    rng = np.random.default_rng(seed)
    palette = [
        np.array([210, 60, 50]),
        np.array([50, 76, 217]),
        np.array([60, 200, 80]),
        np.array([220, 200, 60]),
    ]
    rows = ["path,label,split,mask"]
    total = n_train + n_val
    for i in range(total):
        label = i % classes
        img = np.full((96, 96, 3), 5.0)
        color = palette[label] + rng.normal(0, 10, 3)
        img[20:70, 20:70] = color
        img += rng.normal(0, 4, img.shape)
        img = np.clip(img, 0, 255).astype(np.uint8)
        path = root / f"disc{i:03d}.png"
        Image.fromarray(img).save(path)
        split = "train" if i < n_train else "val"
        rows.append(f"{path.name},{label},{split},")
    manifest = root / "manifest.csv"
    manifest.write_text("\n".join(rows) + "\n")
    return manifest


def run_fundus_prep(manifest: Path, out_dir: Path, method: str = "base", size: int = 96):
    cmd = fundus_prep_cmd() + [
        "run",
        "--manifest",
        str(manifest),
        "--task",
        "plus",
        "--method",
        method,
        "--out",
        str(out_dir),
        "--size",
        str(size),
    ]
    result = subprocess.run(cmd, capture_output=True, text=True)
    assert result.returncode == 0, result.stderr
    return out_dir


@pytest.fixture(scope="session")
def disc_dataset(tmp_path_factory):
    """Separable two-class dataset prepared by the fundus-prep CLI."""
    root = tmp_path_factory.mktemp("discs")
    manifest = write_disc_images(root, n_train=120, n_val=24)
    return run_fundus_prep(manifest, root / "ds", method="base")
