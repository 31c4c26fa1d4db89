from .tensor import (
    Tensor,
    constant,
    cosine_per_column,
    grad_check,
    logsumexp,
    set_finite_guard,
    softmax,
)
from .layers import Conv1d, InstanceNorm, LayerNorm, TransformerEncoderLayer
from .optim import Adam, adam_state, adam_step

__all__ = [
    "Tensor", "constant", "cosine_per_column", "grad_check", "logsumexp",
    "set_finite_guard", "softmax",
    "Conv1d", "InstanceNorm", "LayerNorm", "TransformerEncoderLayer",
    "Adam", "adam_state", "adam_step",
]
