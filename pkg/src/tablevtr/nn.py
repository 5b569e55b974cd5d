"""Parameter containers and the pre-LN transformer block."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import numerics as F
from .numerics import Tensor

MASK_FILL = -1e9
# small init for projections that write into the residual stream
RESIDUAL_INIT_STD = 0.02


class Module:
    """Walks attributes to find parameters, in attribute definition order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def init_normal(rng: np.random.Generator, shape, std: float) -> Tensor:
    return F.parameter(rng.normal(0.0, std, shape))


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, bias: bool = True, std: float | None = None):
        self.weight = init_normal(rng, (d_in, d_out), std if std is not None else 1.0 / math.sqrt(d_in))
        self.bias = F.parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        self.gain = F.parameter(np.ones(d))
        self.bias = F.parameter(np.zeros(d))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gain, self.bias, self.eps)


def key_padding_bias(key_mask: np.ndarray | None, dtype) -> Tensor | None:
    """[B, T] bool (True = attend) -> additive bias of shape [B, 1, 1, T]."""
    if key_mask is None:
        return None
    bias = np.where(key_mask, 0.0, MASK_FILL).astype(dtype)
    return F.tensor(bias[:, None, None, :])


class MultiHeadAttention(Module):
    def __init__(self, rng: np.random.Generator, d: int, heads: int):
        if d % heads:
            raise ValueError(f"width {d} not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(rng, d, d)
        self.k = Linear(rng, d, d)
        self.v = Linear(rng, d, d)
        self.out = Linear(rng, d, d)

    def _split(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        return F.transpose(x.reshape(b, t, self.heads, d // self.heads), (0, 2, 1, 3))

    def __call__(self, x: Tensor, bias: Tensor | None = None) -> tuple[Tensor, np.ndarray]:
        b, t, d = x.shape
        q, k, v = self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x))
        scores = F.scale(q @ F.swapaxes(k, -1, -2), 1.0 / math.sqrt(d // self.heads))
        if bias is not None:
            scores = scores + bias
        attn = F.softmax(scores, axis=-1)
        ctx = F.transpose(attn @ v, (0, 2, 1, 3)).reshape(b, t, d)
        return self.out(ctx), attn.data


class Block(Module):
    """Pre-LN transformer block: x + attn(ln(x)), then x + mlp(ln(x))."""

    def __init__(self, rng: np.random.Generator, d: int, heads: int, mlp_ratio: int = 4):
        self.ln1 = LayerNorm(d)
        self.attn = MultiHeadAttention(rng, d, heads)
        self.ln2 = LayerNorm(d)
        self.fc1 = Linear(rng, d, mlp_ratio * d)
        self.fc2 = Linear(rng, mlp_ratio * d, d, std=RESIDUAL_INIT_STD)

    def __call__(self, x: Tensor, bias: Tensor | None = None) -> tuple[Tensor, np.ndarray]:
        a, probs = self.attn(self.ln1(x), bias)
        x = x + a
        x = x + self.fc2(F.gelu(self.fc1(self.ln2(x))))
        return x, probs


def run_blocks(
    blocks: list[Block], x: Tensor, key_mask: np.ndarray | None = None, trace: list | None = None
) -> Tensor:
    """Apply ``blocks`` in order; per-layer attention maps go to ``trace`` if given."""
    bias = key_padding_bias(key_mask, x.dtype)
    for block in blocks:
        x, probs = block(x, bias)
        if trace is not None:
            trace.append(probs)
    return x
