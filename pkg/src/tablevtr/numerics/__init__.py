"""Minimal tensor library: autodiff, gradient checking, parameter files."""

from .container import ContainerError, load_params, save_params
from .gradcheck import GradcheckReport, gradcheck
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    add,
    broadcast_to,
    concat,
    cross_entropy,
    default_dtype,
    div,
    exp,
    expand_dims,
    gelu,
    getitem,
    is_grad_enabled,
    l2_normalize,
    layer_norm,
    linear,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    no_grad,
    parameter,
    precision,
    reshape,
    scale,
    softmax,
    sqrt,
    stack,
    sub,
    swapaxes,
    take_rows,
    tensor,
    transpose,
    tsum,
    where_mask,
)
