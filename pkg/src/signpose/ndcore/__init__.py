"""Minimal tensor/NN core: autodiff tensor, layers, Adam, gradient checker."""

from .gradcheck import GradCheckReport, finite_difference_check
from .layers import (
    EncoderLayerParams,
    LSTMWeights,
    bilstm,
    dropout,
    encoder_layer,
    layer_norm,
    linear,
    lstm_sequence,
    lstm_step,
    masked_mean_pool,
    positional_encoding,
    softmax,
    softmax_cross_entropy,
)
from .optim import AdamState, adam_step
from .tensor import (
    Parameter,
    Tensor,
    as_tensor,
    concat,
    exp,
    log,
    relu,
    sigmoid,
    sqrt,
    stack,
    tanh,
    zero_grads,
)

__all__ = [
    "AdamState",
    "EncoderLayerParams",
    "GradCheckReport",
    "LSTMWeights",
    "Parameter",
    "Tensor",
    "adam_step",
    "as_tensor",
    "bilstm",
    "concat",
    "dropout",
    "encoder_layer",
    "exp",
    "finite_difference_check",
    "layer_norm",
    "linear",
    "log",
    "lstm_sequence",
    "lstm_step",
    "masked_mean_pool",
    "positional_encoding",
    "relu",
    "sigmoid",
    "softmax",
    "softmax_cross_entropy",
    "sqrt",
    "stack",
    "tanh",
    "zero_grads",
]
