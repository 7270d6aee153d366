"""Minimal reverse-mode autodiff for the forecaster."""

from .checkpoint import load as load_checkpoint
from .checkpoint import save as save_checkpoint
from .gradcheck import grad_check, grad_check_params
from .optim import Adam, AdamState, adam_step
from .tensor import (
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    cross_entropy,
    exp,
    log,
    lstm,
    matmul,
    mean,
    mean_rows,
    mul,
    relu,
    reshape,
    sigmoid,
    slice_,
    softmax,
    sparse_matmul,
    sub,
    sum_,
    take,
    tanh,
)

__all__ = [
    "Tensor", "add", "as_tensor", "backward", "concat", "cross_entropy", "exp", "log", "lstm",
    "matmul", "mean", "mean_rows", "mul", "relu", "reshape", "sigmoid", "slice_", "softmax",
    "sparse_matmul", "sub", "sum_", "take", "tanh", "grad_check", "grad_check_params", "Adam",
    "AdamState", "adam_step", "save_checkpoint", "load_checkpoint",
]
