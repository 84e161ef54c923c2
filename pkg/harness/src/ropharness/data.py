"""Dataset plumbing over fundus-prep output trees.

A dataset directory looks like out/{train,val}/<label>/<image>.png with a
method.json marker at the root; the marker is the contract that lets the
harness refuse mixed-method train/validation pairs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import EmptyClass, PairingViolation
from .spec import TASK_CLASSES

METHOD_MARKER = "method.json"


def read_marker(dataset_dir) -> dict:
    """Marker of the dataset the directory belongs to.

    fundus-prep writes method.json at the dataset root, so a split directory
    like out/train resolves through its parent.
    """
    dataset_dir = Path(dataset_dir)
    for candidate in (dataset_dir / METHOD_MARKER, dataset_dir.parent / METHOD_MARKER):
        if candidate.is_file():
            return json.loads(candidate.read_text())
    raise PairingViolation(f"{dataset_dir}: no {METHOD_MARKER}; not a fundus-prep output tree")


def check_pairing(train_dir, val_dir) -> str:
    """Both trees must come from the same pre-processing method; returns it."""
    train_meta = read_marker(train_dir)
    val_meta = read_marker(val_dir)
    if train_meta.get("method") != val_meta.get("method"):
        raise PairingViolation(
            f"train={train_meta.get('method')!r} vs val={val_meta.get('method')!r}: "
            "training and validation must share one pre-processing method"
        )
    return train_meta["method"]


def class_counts(split_dir, task: str) -> dict:
    """Images per class id; every class of the task must be represented."""
    split_dir = Path(split_dir)
    n_classes = TASK_CLASSES[task]
    counts = {}
    for label in range(n_classes):
        label_dir = split_dir / str(label)
        count = len(list(label_dir.glob("*.png"))) if label_dir.is_dir() else 0
        if count == 0:
            raise EmptyClass(f"{split_dir}: class {label} has no images")
        counts[label] = count
    return counts


def class_weights(counts: dict) -> dict:
    """Inverse-frequency weights, normalized so a balanced set gets 1.0 each."""
    total = sum(counts.values())
    k = len(counts)
    return {label: total / (k * n) for label, n in counts.items()}


def load_split(split_dir, task: str, image_size: int, batch_size: int, shuffle: bool, seed: int):
    """tf.data pipeline over one split; class ids follow directory names."""
    import tensorflow as tf

    class_names = [str(i) for i in range(TASK_CLASSES[task])]
    return tf.keras.utils.image_dataset_from_directory(
        split_dir,
        labels="inferred",
        label_mode="int",
        class_names=class_names,
        image_size=(image_size, image_size),
        batch_size=batch_size,
        shuffle=shuffle,
        seed=seed,
    )


def val_ground_truth(val_dir, task: str):
    """(paths, labels) in the deterministic order image datasets use."""
    val_dir = Path(val_dir)
    paths = []
    labels = []
    for label in range(TASK_CLASSES[task]):
        for path in sorted((val_dir / str(label)).glob("*.png")):
            paths.append(path)
            labels.append(label)
    return paths, np.array(labels)
