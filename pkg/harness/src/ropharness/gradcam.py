"""Minimal Grad-CAM renderer used as a training smoke check."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def _last_conv_layer(backbone):
    for layer in reversed(backbone.layers):
        if len(layer.output.shape) == 4 and "conv" in type(layer).__name__.lower():
            return layer
    for layer in reversed(backbone.layers):
        if len(layer.output.shape) == 4:
            return layer
    raise ValueError("backbone has no 4-D feature layer")


def gradcam_heatmap(handle, batch):
    """Class-activation map for the top class of each image in `batch` (0..255 pixels)."""
    import tensorflow as tf
    from tensorflow import keras

    conv_layer = _last_conv_layer(handle.backbone)
    feature_model = keras.Model(
        handle.backbone.input, [conv_layer.output, handle.backbone.output]
    )
    x = handle.preprocess(tf.cast(batch, tf.float32))
    with tf.GradientTape() as tape:
        conv_out, features = feature_model(x, training=False)
        tape.watch(conv_out)
        preds = handle.head(features, training=False)
        top = tf.reduce_max(preds, axis=-1)
    grads = tape.gradient(top, conv_out)
    weights = tf.reduce_mean(grads, axis=(1, 2), keepdims=True)
    cam = tf.nn.relu(tf.reduce_sum(weights * conv_out, axis=-1))
    cam = cam / (tf.reduce_max(cam, axis=(1, 2), keepdims=True) + 1e-8)
    return cam.numpy()


def render_overlays(handle, batch, out_dir, stem="gradcam"):
    """Write red-tinted overlays for each image; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cams = gradcam_heatmap(handle, batch)
    written = []
    for i, (img, cam) in enumerate(zip(np.asarray(batch), cams)):
        heat = np.array(
            Image.fromarray((cam * 255).astype(np.uint8)).resize(
                (img.shape[1], img.shape[0]), Image.Resampling.BILINEAR
            ),
            dtype=np.float64,
        ) / 255.0
        base = np.clip(img, 0, 255).astype(np.float64)
        overlay = base.copy()
        overlay[:, :, 0] = np.clip(base[:, :, 0] * (1 - 0.5 * heat) + 255 * 0.5 * heat, 0, 255)
        path = out_dir / f"{stem}_{i}.png"
        Image.fromarray(overlay.astype(np.uint8)).save(path)
        written.append(path)
    return written
