"""
Reverse-mode autodiff

Tensor/Tape, primitive 연산, Adam, gradient clipping, 체크포인트 컨테이너
"""

from . import functional
from .checkpoint import CheckpointError, CheckpointMeta, load_checkpoint, save_checkpoint
from .functional import gru_cell
from .optim import (
    AdamState,
    AdamStepResult,
    Optimizer,
    ParamGroup,
    adam_step,
    clip_grad_norm,
    global_norm,
)
from .tensor import AutodiffError, ShapeError, Tape, Tensor, backward, current_tape

__all__ = [
    "functional",
    "Tensor",
    "Tape",
    "backward",
    "current_tape",
    "gru_cell",
    "AutodiffError",
    "ShapeError",
    "ParamGroup",
    "AdamState",
    "AdamStepResult",
    "Optimizer",
    "adam_step",
    "clip_grad_norm",
    "global_norm",
    "CheckpointError",
    "CheckpointMeta",
    "save_checkpoint",
    "load_checkpoint",
]
