"""Small dense-network engine with hand-derived gradients."""
from .augment import mixup, spec_augment
from .checkpoint import Checkpoint, checkpoint_bytes, load_checkpoint, save_checkpoint
from .dense import Dense, DenseNet
from .losses import (
    AngularHead,
    adacos_initial_scale,
    angular_loss,
    l2_normalize,
    l2_normalize_backward,
    mse_loss,
    subspace_loss,
)
from .optim import Adam

__all__ = [
    "Adam",
    "Checkpoint",
    "checkpoint_bytes",
    "AngularHead",
    "Dense",
    "DenseNet",
    "adacos_initial_scale",
    "angular_loss",
    "l2_normalize",
    "l2_normalize_backward",
    "load_checkpoint",
    "mixup",
    "mse_loss",
    "save_checkpoint",
    "spec_augment",
    "subspace_loss",
]
