"""Model construction: frozen backbones with the listed classifier heads."""

from __future__ import annotations

import os
from dataclasses import dataclass

os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")

import numpy as np  # noqa: E402
import tensorflow as tf  # noqa: E402
from tensorflow import keras  # noqa: E402

from .errors import UnknownBackbone  # noqa: E402
from .spec import LAYER_NAME_FALLBACKS, HeadSpec  # noqa: E402

_BACKBONE_FACTORY = {
    "resnet50": (keras.applications.ResNet50, keras.applications.resnet50.preprocess_input),
    "inception_resnet_v2": (
        keras.applications.InceptionResNetV2,
        keras.applications.inception_resnet_v2.preprocess_input,
    ),
    "densenet169": (
        keras.applications.DenseNet169,
        keras.applications.densenet.preprocess_input,
    ),
}


@dataclass
class ModelAudit:
    backbone: str
    task: str
    total_params: int
    trainable_params: int
    trainable_backbone_layers: list
    resolved_exceptions: dict
    head_layers: list  # (layer class name, relevant config)

    def describe(self) -> str:
        lines = [
            f"{self.backbone}/{self.task}: {self.total_params:,} params, "
            f"{self.trainable_params:,} trainable",
            f"  trainable backbone layers: {self.trainable_backbone_layers or '(none with weights)'}",
            f"  legacy-name resolution: {self.resolved_exceptions}",
            "  head:",
        ]
        lines += [f"    {cls} {cfg}" for cls, cfg in self.head_layers]
        return "\n".join(lines)


@dataclass
class HarnessModel:
    """Full trainable model plus the pieces GradCAM needs."""

    model: keras.Model
    backbone: keras.Model
    head: keras.Model
    spec: HeadSpec
    audit: ModelAudit
    preprocess: object


# The listings name L1 regularization without a coefficient; keep it light so
# it biases rather than dominates, and adapt head BatchNorm stats quickly
# enough for short runs to evaluate sanely.
L1_FACTOR = 1e-6
BN_MOMENTUM = 0.9


def _regularizer(spec: HeadSpec):
    if spec.regularizer == "l1":
        return keras.regularizers.l1(L1_FACTOR)
    return None


def _head_layers(spec: HeadSpec):
    """The per-architecture fully connected stack."""
    L = keras.layers
    width = spec.dense_width
    drop = spec.dropout
    reg = _regularizer
    if spec.backbone == "resnet50":
        return [
            L.GlobalMaxPooling2D(),
            L.Dense(width, activation="relu", kernel_regularizer=reg(spec)),
            L.Dropout(drop),
            L.Flatten(),
            L.Dense(width, activation="relu", kernel_regularizer=reg(spec)),
            L.Dropout(drop),
            L.BatchNormalization(momentum=BN_MOMENTUM),
            L.Dense(spec.n_classes, activation="softmax"),
        ]
    if spec.backbone == "inception_resnet_v2":
        if spec.task == "plus":
            return [
                L.Flatten(),
                L.Dense(width, activation="relu"),
                L.Dropout(drop),
                L.Dense(width, activation="relu"),
                L.Dropout(drop),
                L.BatchNormalization(momentum=BN_MOMENTUM),
                L.Dense(spec.n_classes, activation="softmax"),
            ]
        return [
            L.Flatten(),
            L.BatchNormalization(momentum=BN_MOMENTUM),
            L.Dropout(drop),
            L.Dense(width, activation="relu", kernel_regularizer=reg(spec)),
            L.Dropout(drop),  # middle dropout shares the task rate
            L.Dense(width, activation="relu", kernel_regularizer=reg(spec)),
            L.Dropout(drop),
            L.BatchNormalization(momentum=BN_MOMENTUM),
            L.Dense(spec.n_classes, activation="softmax"),
        ]
    if spec.backbone == "densenet169":
        return [
            L.GlobalMaxPooling2D(),
            L.Dense(width, activation="relu", kernel_regularizer=reg(spec)),
            L.Dropout(drop),
            L.Dense(width, activation="relu", kernel_regularizer=reg(spec)),
            L.Dropout(drop),
            L.BatchNormalization(momentum=BN_MOMENTUM),
            L.Dense(spec.n_classes, activation="softmax"),
        ]
    raise UnknownBackbone(spec.backbone)


def _resolve_exceptions(backbone: keras.Model, spec: HeadSpec) -> dict:
    """Map each trainable-exception name to an existing backbone layer."""
    available = {layer.name for layer in backbone.layers}
    fallbacks = LAYER_NAME_FALLBACKS[spec.backbone]
    resolved = {}
    for name in spec.trainable_exceptions:
        if name in available:
            resolved[name] = name
        elif fallbacks.get(name) in available:
            resolved[name] = fallbacks[name]
        else:
            raise UnknownBackbone(
                f"cannot resolve trainable-exception layer {name!r} in {spec.backbone}"
            )
    return resolved


def build_model(
    spec: HeadSpec, input_size: int = 224, pretrained: bool = False
) -> HarnessModel:
    """Backbone frozen except its trainable-exception layers, plus the task head.

    pretrained=True loads ImageNet weights (needs network access); the
    structural audit and the synthetic tasks work from random init.
    """
    factory, preprocess = _BACKBONE_FACTORY[spec.backbone]
    weights = "imagenet" if pretrained else None
    backbone = factory(include_top=False, weights=weights, input_shape=(input_size, input_size, 3))

    resolved = _resolve_exceptions(backbone, spec)
    keep_trainable = set(resolved.values())
    backbone.trainable = True
    for layer in backbone.layers:
        layer.trainable = layer.name in keep_trainable

    head = keras.Sequential(_head_layers(spec), name=f"{spec.backbone}_{spec.task}_head")
    inputs = keras.Input(shape=(input_size, input_size, 3), name="pixels")
    x = keras.layers.Lambda(preprocess, name="preprocess")(inputs)
    features = backbone(x)
    outputs = head(features)
    model = keras.Model(inputs, outputs, name=f"{spec.backbone}_{spec.task}")

    trainable_backbone = [
        layer.name for layer in backbone.layers if layer.trainable and layer.weights
    ]
    audit = ModelAudit(
        backbone=spec.backbone,
        task=spec.task,
        total_params=int(model.count_params()),
        trainable_params=int(
            np.sum([int(np.prod(w.shape)) for w in model.trainable_weights])
        ),
        trainable_backbone_layers=trainable_backbone,
        resolved_exceptions=resolved,
        head_layers=[_layer_summary(layer) for layer in head.layers],
    )
    return HarnessModel(
        model=model, backbone=backbone, head=head, spec=spec, audit=audit, preprocess=preprocess
    )


def _layer_summary(layer):
    cls = type(layer).__name__
    cfg = {}
    if isinstance(layer, keras.layers.Dense):
        cfg["units"] = layer.units
        cfg["activation"] = layer.activation.__name__
        cfg["l1"] = layer.kernel_regularizer is not None
    elif isinstance(layer, keras.layers.Dropout):
        cfg["rate"] = float(layer.rate)
    return cls, cfg


def frozen_weight_snapshot(handle: HarnessModel):
    """Values of all non-trainable backbone weights, for bit-identity audits."""
    return [
        (w.path if hasattr(w, "path") else w.name, np.array(w))
        for layer in handle.backbone.layers
        if not layer.trainable
        for w in layer.weights
    ]
