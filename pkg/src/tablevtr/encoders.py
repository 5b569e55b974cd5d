"""Unimodal encoders: frame-feature visual encoder and the shared tag/caption text encoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import numerics as F
from .datagen import EOS, PAD
from .nn import Block, LayerNorm, Linear, Module, init_normal, run_blocks
from .numerics import Tensor


@dataclass
class EncoderConfig:
    vocab_size: int
    dim: int = 64
    text_layers: int = 2
    vis_layers: int = 2
    heads: int = 4
    num_frames: int = 4
    max_tag_len: int = 32
    max_cap_len: int = 32
    raw_frame_dim: int = 32

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError(f"dim {self.dim} must be divisible by heads {self.heads}")
        for name in ("vocab_size", "text_layers", "vis_layers", "num_frames", "max_tag_len", "max_cap_len", "raw_frame_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


class TextEncoder(Module):
    """Bidirectional transformer with [EOS] pooling.

    One set of blocks serves both tags and captions; only the output
    projections ``tag_proj`` and ``cap_proj`` are path specific.
    """

    def __init__(self, rng: np.random.Generator, cfg: EncoderConfig):
        d = cfg.dim
        self.tok_emb = init_normal(rng, (cfg.vocab_size, d), 0.1)
        self.pos_emb = init_normal(rng, (max(cfg.max_tag_len, cfg.max_cap_len), d), 0.01)
        self.blocks = [Block(rng, d, cfg.heads) for _ in range(cfg.text_layers)]
        self.ln_final = LayerNorm(d)
        self.tag_proj = Linear(rng, d, d, bias=False)
        self.cap_proj = Linear(rng, d, d, bias=False)

    def hidden(self, tokens: np.ndarray, trace: list | None = None) -> tuple[Tensor, np.ndarray]:
        """Last-layer states [B, L, d] with PAD rows zeroed, plus the key mask."""
        tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
        b, length = tokens.shape
        if length > self.pos_emb.shape[0]:
            raise ValueError(f"sequence length {length} exceeds {self.pos_emb.shape[0]}")
        keep = tokens != PAD
        x = F.take_rows(self.tok_emb, tokens) + self.pos_emb[:length]
        x = run_blocks(self.blocks, x, keep, trace)
        h = self.ln_final(x)
        h = h * F.tensor(keep[..., None].astype(h.dtype))
        return h, keep

    def eos_state(self, tokens: np.ndarray) -> tuple[Tensor, Tensor, np.ndarray]:
        tokens = np.atleast_2d(np.asarray(tokens, dtype=np.int64))
        is_eos = tokens == EOS
        if not is_eos.any(axis=1).all():
            raise ValueError("every token sequence must contain [EOS]")
        eos_pos = is_eos.argmax(axis=1)
        h, keep = self.hidden(tokens)
        return h, h[np.arange(len(tokens)), eos_pos], keep

    def __call__(self, tokens: np.ndarray, path: str) -> tuple[Tensor, Tensor, np.ndarray]:
        """Returns (sequence [B, L, d], overall [B, d], key mask [B, L])."""
        if path == "tag":
            proj = self.tag_proj
        elif path == "caption":
            proj = self.cap_proj
        else:
            raise ValueError(f"path must be 'tag' or 'caption', got {path!r}")
        seq, eos, keep = self.eos_state(tokens)
        return seq, F.l2_normalize(proj(eos)), keep


class VisualEncoder(Module):
    def __init__(self, rng: np.random.Generator, cfg: EncoderConfig):
        d = cfg.dim
        self.num_frames = cfg.num_frames
        self.frame_in = Linear(rng, cfg.raw_frame_dim, d)
        self.pos_emb = init_normal(rng, (cfg.num_frames, d), 0.01)
        self.blocks = [Block(rng, d, cfg.heads) for _ in range(cfg.vis_layers)]
        self.ln_out = LayerNorm(d)
        self.frame_out = Linear(rng, d, d, bias=False)

    def __call__(self, frames) -> Tensor:
        """[B, N, D_raw] (or [N, D_raw]) frames -> unit-norm [B, N, d] embeddings."""
        x = frames if isinstance(frames, Tensor) else F.tensor(np.asarray(frames))
        if x.ndim == 2:
            x = x.reshape(1, *x.shape)
        if x.shape[1] != self.num_frames:
            raise ValueError(f"expected {self.num_frames} frames, got {x.shape[1]}")
        h = self.frame_in(x) + self.pos_emb
        h = run_blocks(self.blocks, h)
        return F.l2_normalize(self.frame_out(self.ln_out(h)))


def encode_frames(frames, encoder: VisualEncoder) -> Tensor:
    return encoder(frames)


def encode_text(tokens, encoder: TextEncoder, path: str) -> tuple[Tensor, Tensor]:
    seq, overall, _ = encoder(tokens, path)
    return seq, overall
