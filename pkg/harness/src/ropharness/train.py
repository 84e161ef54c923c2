"""Training and evaluation against fundus-prep dataset trees."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import check_pairing, class_counts, class_weights, load_split
from .gradcam import render_overlays
from .models import HarnessModel


@dataclass
class TrainResult:
    pred_csv: Path
    history_csv: Path
    gradcam_paths: list
    val_accuracy: float
    history: dict


def train_eval(
    handle: HarnessModel,
    train_dir,
    val_dir,
    out_dir,
    epochs: int = 25,
    batch_size: int = 32,
    learning_rate: float = 1e-4,
    seed: int = 0,
) -> TrainResult:
    """Fit with inverse-frequency class weights; write pred.csv and history.csv.

    pred.csv rows are (path, predicted, true), the schema `fundus-prep
    metrics --pred` consumes. Three validation images get a Grad-CAM render.
    """
    import tensorflow as tf
    from tensorflow import keras

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    task = handle.spec.task

    check_pairing(train_dir, val_dir)
    counts = class_counts(train_dir, task)
    class_counts(val_dir, task)
    weights = class_weights(counts)

    keras.utils.set_random_seed(seed)
    image_size = handle.model.input_shape[1]
    train_ds = load_split(train_dir, task, image_size, batch_size, shuffle=True, seed=seed)
    val_ds = load_split(val_dir, task, image_size, batch_size, shuffle=False, seed=seed)
    val_paths = [Path(p) for p in val_ds.file_paths]

    handle.model.compile(
        optimizer=keras.optimizers.Adam(learning_rate),
        loss="sparse_categorical_crossentropy",
        metrics=["accuracy"],
    )
    fit = handle.model.fit(
        train_ds,
        validation_data=val_ds,
        epochs=epochs,
        class_weight=weights,
        verbose=0,
    )

    probs = handle.model.predict(val_ds, verbose=0)
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-5):
        raise AssertionError("softmax rows do not sum to 1")
    predicted = probs.argmax(axis=1)
    true_labels = np.array([int(p.parent.name) for p in val_paths])

    pred_csv = out_dir / "pred.csv"
    with open(pred_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "predicted", "true"])
        for path, pred, true in zip(val_paths, predicted, true_labels):
            writer.writerow([str(path), int(pred), int(true)])

    history_csv = out_dir / "history.csv"
    with open(history_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        keys = list(fit.history)
        writer.writerow(["epoch"] + keys)
        for epoch in range(len(fit.history[keys[0]])):
            writer.writerow([epoch] + [f"{fit.history[k][epoch]:.6f}" for k in keys])

    smoke = next(iter(val_ds.unbatch().batch(3)))[0]
    gradcam_paths = render_overlays(handle, smoke, out_dir / "gradcam")

    val_accuracy = float((predicted == true_labels).mean())
    return TrainResult(
        pred_csv=pred_csv,
        history_csv=history_csv,
        gradcam_paths=gradcam_paths,
        val_accuracy=val_accuracy,
        history=dict(fit.history),
    )
