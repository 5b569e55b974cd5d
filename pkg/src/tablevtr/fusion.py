"""Tag-guided cross-modal fusion, pooled video representation and similarity.

The same transformer blocks run in two roles: the tag-guiding (TG) encoder
over ``[frames; tag]`` and the joint encoder over ``[frames; tag; caption]``
used by the matching and masked-word heads during training.
"""

from __future__ import annotations

import numpy as np

from . import numerics as F
from .nn import Block, Linear, Module, init_normal, run_blocks
from .numerics import Tensor

SEG_FRAME, SEG_TAG, SEG_TEXT = 0, 1, 2


class CrossEncoder(Module):
    def __init__(
        self,
        rng: np.random.Generator,
        dim: int,
        heads: int,
        layers: int,
        num_slots: int,
        vocab_size: int,
        lam_init: float = 0.0,
    ):
        self.blocks = [Block(rng, dim, heads) for _ in range(layers)]
        self.pos_emb = init_normal(rng, (num_slots, dim), 0.01)
        self.seg_emb = init_normal(rng, (3, dim), 0.01)
        self.lam = F.parameter(np.array(lam_init))
        self.vtm_head = Linear(rng, dim, 2)
        self.mlm_head = Linear(rng, dim, vocab_size)

    def embed(self, x: Tensor, segments: np.ndarray) -> Tensor:
        t = x.shape[1]
        if t > self.pos_emb.shape[0]:
            raise ValueError(f"sequence of {t} slots exceeds {self.pos_emb.shape[0]} positions")
        return x + self.pos_emb[:t] + F.take_rows(self.seg_emb, segments)


class Projection(Module):
    """Video-side (``phi``) and text-side (``psi``) maps into the shared space."""

    def __init__(self, rng: np.random.Generator, dim: int, out_dim: int | None = None):
        out_dim = out_dim or dim
        self.phi = Linear(rng, dim, out_dim, bias=False)
        self.psi = Linear(rng, dim, out_dim, bias=False)


def _as_batch(x: Tensor, ndim: int) -> Tensor:
    return x.reshape(1, *x.shape) if x.ndim == ndim - 1 else x


def tg_encode(
    v: Tensor,
    tag: Tensor,
    enc: CrossEncoder,
    tag_mask: np.ndarray | None = None,
    trace: list | None = None,
) -> tuple[Tensor, np.ndarray | None]:
    """Fuse frames [B, N, d] with the tag anchor.

    ``tag`` is either the overall tag embedding [B, d] (one slot) or all tag
    token states [B, K, d] with ``tag_mask`` [B, K]. Returns the fused
    sequence and its key mask (``None`` when every slot is valid).
    """
    v = _as_batch(v, 3)
    b, n, _ = v.shape
    if tag.ndim == 3:
        if tag_mask is None:
            raise ValueError("all-token tag input needs tag_mask")
        k = tag.shape[1]
        x = F.concat([v, tag], axis=1)
        mask = np.concatenate([np.ones((b, n), bool), tag_mask], axis=1)
    else:
        tag = _as_batch(tag, 2)
        k = 1
        x = F.concat([v, tag.reshape(b, 1, -1)], axis=1)
        mask = None
    segments = np.array([SEG_FRAME] * n + [SEG_TAG] * k)
    fused = run_blocks(enc.blocks, enc.embed(x, segments), mask, trace)
    return fused, mask


def pool_and_residual(
    fused: Tensor, v: Tensor, lam: Tensor, row_mask: np.ndarray | None = None
) -> tuple[Tensor, Tensor]:
    """``g_o`` = mean of fused rows; ``g_hat = lam * g_o + mean(v rows)``."""
    fused, v = _as_batch(fused, 3), _as_batch(v, 3)
    if row_mask is None:
        g_o = F.mean(fused, axis=1)
    else:
        w = row_mask.astype(fused.dtype) / row_mask.sum(axis=1, keepdims=True)
        g_o = F.tsum(fused * F.tensor(w[..., None]), axis=1)
    g_hat = lam * g_o + F.mean(v, axis=1)
    return g_o, g_hat


def project_video(g_hat: Tensor, proj: Projection) -> Tensor:
    return F.l2_normalize(proj.phi(g_hat))


def project_text(c_e: Tensor, proj: Projection) -> Tensor:
    return F.l2_normalize(proj.psi(c_e))


def similarity(g_hat: Tensor, c_e: Tensor, proj: Projection) -> Tensor:
    """Cosine-style score of one video and one caption, in [-1, 1]."""
    a = project_video(_as_batch(g_hat, 2), proj)
    b = project_text(_as_batch(c_e, 2), proj)
    return F.tsum(a * b)


def similarity_matrix(g_hat: Tensor, c_e: Tensor, proj: Projection) -> Tensor:
    """Rows are videos, columns are texts."""
    return project_video(g_hat, proj) @ F.transpose(project_text(c_e, proj))


def joint_encode(
    v: Tensor,
    tag: Tensor,
    text: Tensor,
    text_mask: np.ndarray,
    enc: CrossEncoder,
    tag_mask: np.ndarray | None = None,
    trace: list | None = None,
) -> tuple[Tensor, Tensor]:
    """Run ``[frames; tag; caption]`` through the shared blocks.

    Returns the first output slot [B, d] (joint representation) and the
    caption slot outputs [B, M, d]. Caption PAD slots are masked as keys.
    """
    v, text = _as_batch(v, 3), _as_batch(text, 3)
    text_mask = np.atleast_2d(text_mask)
    b, n, _ = v.shape
    m = text.shape[1]
    if tag.ndim == 3:
        if tag_mask is None:
            raise ValueError("all-token tag input needs tag_mask")
        k = tag.shape[1]
        parts = [v, tag, text]
        tmask = tag_mask
    else:
        tag = _as_batch(tag, 2)
        k = 1
        parts = [v, tag.reshape(b, 1, -1), text]
        tmask = np.ones((b, 1), bool)
    x = F.concat(parts, axis=1)
    mask = np.concatenate([np.ones((b, n), bool), tmask, text_mask], axis=1)
    segments = np.array([SEG_FRAME] * n + [SEG_TAG] * k + [SEG_TEXT] * m)
    out = run_blocks(enc.blocks, enc.embed(x, segments), mask, trace)
    return out[:, 0], out[:, n + k :]


def vtm_logits(joint_repr: Tensor, enc: CrossEncoder) -> Tensor:
    return enc.vtm_head(joint_repr)


def mlm_logits(text_positions: Tensor, enc: CrossEncoder) -> Tensor:
    return enc.mlm_head(text_positions)
