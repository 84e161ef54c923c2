"""Transfer-learning classifier harness over fundus-prep datasets."""

from .data import check_pairing, class_counts, class_weights
from .errors import EmptyClass, HarnessError, PairingViolation, UnknownBackbone
from .models import HarnessModel, ModelAudit, build_model, frozen_weight_snapshot
from .spec import BACKBONES, TASK_CLASSES, HeadSpec
from .train import TrainResult, train_eval

__version__ = "0.1.0"
