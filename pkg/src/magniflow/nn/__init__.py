"""Deterministic tensor engine: autodiff, layer primitives, AdamW, archives."""

from .checkpoint import FORMAT_VERSION, Checkpoint, load_checkpoint, save_checkpoint
from .ops import (
    absolute,
    add,
    concat,
    conv2d,
    group_norm,
    matmul,
    mul,
    narrow,
    neighborhood3x3,
    reduce_mean,
    reduce_sum,
    resample2x,
    reshape,
    sigmoid,
    silu,
    softmax_axis,
    transpose,
    warp_fixed,
)
from .params import ParameterSet, adamw_step, kaiming_uniform, step_seed
from .tensor import (
    Tensor,
    as_tensor,
    backward,
    current_dtype,
    grad_enabled,
    no_grad,
    precision,
)

__all__ = [
    "FORMAT_VERSION",
    "Checkpoint",
    "ParameterSet",
    "Tensor",
    "absolute",
    "adamw_step",
    "add",
    "as_tensor",
    "backward",
    "concat",
    "conv2d",
    "current_dtype",
    "grad_enabled",
    "group_norm",
    "kaiming_uniform",
    "step_seed",
    "load_checkpoint",
    "matmul",
    "mul",
    "narrow",
    "neighborhood3x3",
    "no_grad",
    "precision",
    "reduce_mean",
    "reduce_sum",
    "resample2x",
    "reshape",
    "save_checkpoint",
    "sigmoid",
    "silu",
    "softmax_axis",
    "transpose",
    "warp_fixed",
]
