"""Head specifications: backbone/task combinations and their hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UnknownBackbone

BACKBONES = ("resnet50", "inception_resnet_v2", "densenet169")
TASK_CLASSES = {"plus": 2, "stages": 4, "zones": 3}

# Dropout by (backbone, task); the ResNet50 and DenseNet169 heads use 0.2
# everywhere, the InceptionResV2 head varies per task.
_DROPOUT = {
    "resnet50": {"plus": 0.2, "stages": 0.2, "zones": 0.2},
    "inception_resnet_v2": {"plus": 0.6, "stages": 0.7, "zones": 0.2},
    "densenet169": {"plus": 0.2, "stages": 0.2, "zones": 0.2},
}

# Backbone layers left trainable per architecture. Names
# that no longer exist in tf.keras are resolved through LAYER_NAME_FALLBACKS.
TRAINABLE_EXCEPTIONS = {
    "resnet50": ("res5c_branch2b", "res5c_branch2c", "activation_97"),
    "inception_resnet_v2": ("block8_10_mixed",),
    "densenet169": ("block8_10_mixed",),
}

# Mapping from the legacy layer names to the nearest canonical tf.keras
# layers: res5c branch convs sit in conv5_block3, activation_97 is that
# block's output activation, and DenseNet's nearest analogue of the last
# mixed/concat layer is conv5_block32_concat.
LAYER_NAME_FALLBACKS = {
    "resnet50": {
        "res5c_branch2b": "conv5_block3_2_conv",
        "res5c_branch2c": "conv5_block3_3_conv",
        "activation_97": "conv5_block3_out",
    },
    "inception_resnet_v2": {},
    "densenet169": {"block8_10_mixed": "conv5_block32_concat"},
}


@dataclass(frozen=True)
class HeadSpec:
    """One classifier head: backbone, task, and their fixed hyperparameters."""

    backbone: str
    task: str
    dropout: float = field(init=False)
    dense_width: int = 1024
    # The InceptionResV2 Plus head uses unregularized Dense layers;
    # every other head applies L1.
    regularizer: str | None = field(init=False)

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise UnknownBackbone(f"{self.backbone!r}; supported: {BACKBONES}")
        if self.task not in TASK_CLASSES:
            raise ValueError(f"unknown task {self.task!r}; choose from {sorted(TASK_CLASSES)}")
        object.__setattr__(self, "dropout", _DROPOUT[self.backbone][self.task])
        reg = None if (self.backbone == "inception_resnet_v2" and self.task == "plus") else "l1"
        object.__setattr__(self, "regularizer", reg)

    @property
    def n_classes(self) -> int:
        return TASK_CLASSES[self.task]

    @property
    def trainable_exceptions(self) -> tuple:
        return TRAINABLE_EXCEPTIONS[self.backbone]
