"""
Dysasr Net Module

Hybrid DNN acoustic model, speaker transform hooks, training and checkpoints.
"""

from dysasr.net.checkpoint import load_checkpoint, save_checkpoint
from dysasr.net.hooks import Hook, hook_backward, hook_forward
from dysasr.net.model import (
    ForwardResult,
    Gradients,
    HybridDnn,
    cross_entropy,
    init_params,
    multitask_loss,
)
from dysasr.net.train import (
    BatchAdapter,
    FrameDataset,
    Optimizer,
    UtteranceFrames,
    evaluate_loss,
    frame_accuracy,
    recalibrate_bn,
    train_epoch,
    train_model,
)

__all__ = [
    "BatchAdapter",
    "ForwardResult",
    "FrameDataset",
    "Gradients",
    "Hook",
    "HybridDnn",
    "Optimizer",
    "UtteranceFrames",
    "cross_entropy",
    "evaluate_loss",
    "frame_accuracy",
    "hook_backward",
    "hook_forward",
    "init_params",
    "load_checkpoint",
    "multitask_loss",
    "recalibrate_bn",
    "save_checkpoint",
    "train_epoch",
    "train_model",
]
