from .tensor import Tensor, as_tensor
from .ops import (
    PROB_EPS,
    add,
    bce_loss,
    const_matmul,
    dilated_conv1d,
    dropout,
    embed,
    identity,
    masked_fill,
    matmul,
    mul,
    relu,
    sigmoid,
    softmax,
    swap_last,
    total,
)
from .optim import AdamState, adam_step
from .gradcheck import grad_check, numeric_gradient, relative_error
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint

__all__ = [
    "Tensor",
    "as_tensor",
    "PROB_EPS",
    "add",
    "bce_loss",
    "const_matmul",
    "dilated_conv1d",
    "dropout",
    "embed",
    "identity",
    "masked_fill",
    "matmul",
    "mul",
    "relu",
    "sigmoid",
    "softmax",
    "swap_last",
    "total",
    "AdamState",
    "adam_step",
    "grad_check",
    "numeric_gradient",
    "relative_error",
    "CheckpointError",
    "load_checkpoint",
    "save_checkpoint",
]
