"""Manifest-driven batch runner, augmentation, and preview grids.

A dataset manifest is a CSV with header ``path,label,split[,mask]``. Batch
output lands in ``out_dir/<split>/<label>/<stem>.png`` with a ``method.json``
marker at the root so later runs (and the classifier harness) can verify the
same method produced both halves of a train/validation pair.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import LengthMismatch, ManifestInvalid, PairingViolation
from .erosion import load_mask
from .image import ImageBuffer, clipped, load_image, resize_lanczos, save_image
from .methods import MethodSettings, apply_method, needs_mask, normalize_tag

TASK_CLASSES = {"plus": 2, "stages": 4, "zones": 3}
SPLITS = ("train", "val")
AUGMENT_OPS = ("hflip", "vflip", "rot15", "brightness")
METHOD_MARKER = "method.json"


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: int
    split: str
    mask: Path | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple
    task: str
    method: str


@dataclass
class BatchReport:
    out_dir: Path
    method: str
    processed: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (source path, message)

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        return (
            f"{len(self.processed)} processed, {len(self.skipped)} skipped, "
            f"{len(self.failures)} failed -> {self.out_dir}"
        )


def load_manifest(path, task: str, method: str) -> DatasetManifest:
    """Parse and validate a manifest CSV; raises ManifestInvalid on any defect."""
    path = Path(path)
    if task not in TASK_CLASSES:
        raise ManifestInvalid(f"unknown task {task!r}; choose from {sorted(TASK_CLASSES)}")
    method = normalize_tag(method)
    if not path.is_file():
        raise ManifestInvalid(f"manifest not found: {path}")
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if fields[:3] != ["path", "label", "split"]:
            raise ManifestInvalid(
                f"{path}: header must start with path,label,split (got {fields})"
            )
        n_classes = TASK_CLASSES[task]
        for i, row in enumerate(reader, start=2):
            try:
                label = int(row["label"])
            except (TypeError, ValueError):
                raise ManifestInvalid(f"{path}:{i}: bad label {row.get('label')!r}")
            if not 0 <= label < n_classes:
                raise ManifestInvalid(
                    f"{path}:{i}: label {label} out of range for task {task!r} "
                    f"({n_classes} classes)"
                )
            split = (row["split"] or "").strip()
            if split not in SPLITS:
                raise ManifestInvalid(f"{path}:{i}: split must be train or val, got {split!r}")
            img_path = Path(row["path"])
            if not img_path.is_absolute():
                img_path = path.parent / img_path
            mask_val = (row.get("mask") or "").strip()
            mask_path = None
            if mask_val:
                mask_path = Path(mask_val)
                if not mask_path.is_absolute():
                    mask_path = path.parent / mask_path
            entries.append(ManifestEntry(img_path, label, split, mask_path))
    if not entries:
        raise ManifestInvalid(f"{path}: no entries")
    return DatasetManifest(tuple(entries), task, method)


def manifest_from_tree(out_dir) -> DatasetManifest:
    """Rebuild a manifest from a batch output tree and its method marker."""
    out_dir = Path(out_dir)
    marker = out_dir / METHOD_MARKER
    if not marker.is_file():
        raise ManifestInvalid(f"{out_dir}: no {METHOD_MARKER}")
    meta = json.loads(marker.read_text())
    entries = []
    for split in SPLITS:
        split_dir = out_dir / split
        if not split_dir.is_dir():
            continue
        for label_dir in sorted(split_dir.iterdir()):
            if not label_dir.is_dir():
                continue
            label = int(label_dir.name)
            for img in sorted(label_dir.glob("*.png")):
                entries.append(ManifestEntry(img, label, split))
    if not entries:
        raise ManifestInvalid(f"{out_dir}: tree holds no images")
    return DatasetManifest(tuple(entries), meta["task"], meta["method"])


def augment(img: ImageBuffer, ops, seed: int) -> list[ImageBuffer]:
    """Original plus one variant per op, deterministic for a given seed."""
    ops = list(ops)
    for op in ops:
        if op not in AUGMENT_OPS:
            raise ValueError(f"unknown augmentation {op!r}; choose from {AUGMENT_OPS}")
    rng = np.random.default_rng(seed)
    out = [img]
    for op in ops:
        if op == "hflip":
            out.append(ImageBuffer(img.data[:, ::-1, :].copy()))
        elif op == "vflip":
            out.append(ImageBuffer(img.data[::-1, :, :].copy()))
        elif op == "rot15":
            angle = float(rng.uniform(-15.0, 15.0))
            planes = []
            for c in range(img.channels):
                pil = Image.fromarray(img.plane(c).astype(np.float32), mode="F")
                rot = pil.rotate(angle, resample=Image.Resampling.BILINEAR, fillcolor=0.0)
                planes.append(np.asarray(rot, dtype=np.float64))
            out.append(clipped(np.stack(planes, axis=2)))
        elif op == "brightness":
            factor = 1.0 + float(rng.uniform(-0.1, 0.1))
            out.append(clipped(img.data * factor))
    return out


def _entry_seed(base_seed: int, entry: ManifestEntry) -> int:
    return (base_seed * 1_000_003 + zlib.crc32(str(entry.path.name).encode())) % (2**31)


def _atomic_write_image(path: Path, img: ImageBuffer) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp.png")
    os.close(fd)
    try:
        save_image(tmp, img)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def check_pairing(out_dir, method: str, task: str) -> None:
    """Reject before any write when out_dir was built with another method."""
    marker = Path(out_dir) / METHOD_MARKER
    if marker.is_file():
        meta = json.loads(marker.read_text())
        if meta.get("method") != method:
            raise PairingViolation(
                f"{out_dir} holds {meta.get('method')!r} data; refusing to mix with "
                f"{method!r} (train and validation must share one method)"
            )
        if meta.get("task") != task:
            raise PairingViolation(
                f"{out_dir} holds task {meta.get('task')!r}, requested {task!r}"
            )


def _expected_outputs(out_dir: Path, entry: ManifestEntry, n_augments: int):
    stem = entry.path.stem
    base = out_dir / entry.split / str(entry.label)
    names = [f"{stem}.png"]
    if entry.split == "train":
        names += [f"{stem}.aug{i}.png" for i in range(n_augments)]
    return [base / n for n in names]


def _process_entry(entry, manifest, out_dir, size, settings, ops, seed, force):
    outputs = _expected_outputs(out_dir, entry, len(ops))
    if not force and all(p.exists() for p in outputs):
        return ("skipped", entry.path, outputs)
    img = load_image(entry.path)
    mask = None
    if needs_mask(manifest.method):
        mask_path = entry.mask
        if mask_path is None:
            mask_path = entry.path.parent / f"{entry.path.stem}.mask.png"
        if not Path(mask_path).is_file():
            raise FileNotFoundError(f"no vessel mask for {entry.path}")
        mask = load_mask(mask_path, target=(img.height, img.width))
    processed = apply_method(manifest.method, img, mask=mask, settings=settings)
    variants = [processed]
    if entry.split == "train" and ops:
        variants = augment(processed, ops, _entry_seed(seed, entry))
    outputs[0].parent.mkdir(parents=True, exist_ok=True)
    for path, variant in zip(outputs, variants):
        resized = resize_lanczos(variant, size[0], size[1])
        _atomic_write_image(path, resized)
    return ("processed", entry.path, outputs)


def run_batch(
    manifest: DatasetManifest,
    out_dir,
    size=(224, 224),
    settings: MethodSettings | None = None,
    augment_ops=(),
    seed: int = 0,
    force: bool = False,
    workers: int = 4,
) -> BatchReport:
    """Apply the manifest's method to every entry, resizing and writing PNGs.

    Per-file errors are collected in the report; only manifest/pairing
    problems abort the run. Existing outputs are skipped unless force=True.
    """
    out_dir = Path(out_dir)
    settings = settings or MethodSettings()
    ops = list(augment_ops)
    for op in ops:
        if op not in AUGMENT_OPS:
            raise ManifestInvalid(f"unknown augmentation {op!r}")
    check_pairing(out_dir, manifest.method, manifest.task)
    out_dir.mkdir(parents=True, exist_ok=True)
    marker = {
        "method": manifest.method,
        "task": manifest.task,
        "size": list(size),
        "augment": ops,
        "seed": seed,
    }
    _atomic_write_text(out_dir / METHOD_MARKER, json.dumps(marker, sort_keys=True, indent=1))

    report = BatchReport(out_dir=out_dir, method=manifest.method)

    def work(entry):
        try:
            return _process_entry(entry, manifest, out_dir, size, settings, ops, seed, force)
        except Exception as exc:  # per-file failures are data, not crashes
            return ("failed", entry.path, f"{type(exc).__name__}: {exc}")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(work, manifest.entries))
    for status, path, payload in sorted(results, key=lambda r: str(r[1])):
        if status == "processed":
            report.processed.append(path)
        elif status == "skipped":
            report.skipped.append(path)
        else:
            report.failures.append((path, payload))
    return report


def preview_grid(before, after, path) -> Path:
    """Write a two-row comparison grid (before on top); cells letterboxed."""
    before = list(before)
    after = list(after)
    if len(before) != len(after):
        raise LengthMismatch(f"{len(before)} before vs {len(after)} after")
    if not 1 <= len(before) <= 8:
        raise LengthMismatch("preview grid takes 1..8 pairs")
    cell_h = max(img.height for img in before + after)
    cell_w = max(img.width for img in before + after)
    n = len(before)
    canvas = np.zeros((2 * cell_h, n * cell_w, 3))

    def place(img: ImageBuffer, row: int, col: int):
        data = img.data if img.channels == 3 else np.repeat(img.data, 3, axis=2)
        top = row * cell_h + (cell_h - img.height) // 2
        left = col * cell_w + (cell_w - img.width) // 2
        canvas[top : top + img.height, left : left + img.width, :] = data

    for i, (b, a) in enumerate(zip(before, after)):
        place(b, 0, i)
        place(a, 1, i)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_image(path, ImageBuffer(canvas))
    return path
