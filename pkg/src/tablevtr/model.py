"""The assembled retrieval model: encoders, shared cross-modal encoder, projections, temperature."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np

from . import numerics as F
from .datagen import PAD, VideoRecord, Vocabulary, tokenize
from .encoders import EncoderConfig, TextEncoder, VisualEncoder
from .fusion import CrossEncoder, Projection, pool_and_residual, similarity_matrix, tg_encode
from .nn import Module
from .numerics import Tensor
from .objectives import Temperature
from .tagging import concat_tags

ENCODER_PREFIXES = ("text.", "visual.")


@dataclass
class ModelConfig:
    vocab_size: int
    dim: int = 64
    text_layers: int = 2
    vis_layers: int = 2
    cross_layers: int = 2
    heads: int = 4
    num_frames: int = 4
    max_tag_len: int = 32
    max_cap_len: int = 32
    raw_frame_dim: int = 32
    tag_tokens_mode: str = "overall"  # or "all_tokens"
    lam_init: float = 0.5
    init_scale: float = 1 / 0.07
    seed: int = 0

    def __post_init__(self):
        if self.tag_tokens_mode not in ("overall", "all_tokens"):
            raise ValueError(f"unknown tag_tokens_mode {self.tag_tokens_mode!r}")

    def encoder_config(self) -> EncoderConfig:
        names = {f.name for f in fields(EncoderConfig)}
        return EncoderConfig(**{k: v for k, v in asdict(self).items() if k in names})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class VideoEncoding:
    v: Tensor            # [B, N, d] frame embeddings
    tag: Tensor          # [B, d] overall tag embedding, or [B, K, d] tag states
    tag_mask: np.ndarray | None
    fused: Tensor        # [B, N + k, d]
    g_o: Tensor
    g_hat: Tensor


@dataclass
class TextEncoding:
    seq: Tensor          # [B, M, d] last-layer states, PAD rows zeroed
    overall: Tensor      # [B, d]
    mask: np.ndarray     # [B, M] True at non-PAD


def trim_pads(tokens: np.ndarray) -> np.ndarray:
    """Drop trailing all-PAD columns of a token batch."""
    used = (tokens != PAD).any(axis=0)
    last = int(np.flatnonzero(used)[-1]) + 1 if used.any() else 1
    return tokens[:, :last]


class TableModel(Module):
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng([cfg.seed, 0x7AB1E])
        ecfg = cfg.encoder_config()
        self.text = TextEncoder(rng, ecfg)
        self.visual = VisualEncoder(rng, ecfg)
        self.cross = CrossEncoder(
            rng,
            cfg.dim,
            cfg.heads,
            cfg.cross_layers,
            cfg.num_frames + cfg.max_tag_len + cfg.max_cap_len,
            cfg.vocab_size,
            cfg.lam_init,
        )
        self.proj = Projection(rng, cfg.dim)
        self.temp = Temperature(cfg.init_scale)

    # -- parameter bookkeeping ------------------------------------------------
    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, p in params.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"{name}: shape {arr.shape} != {p.shape}")
            p.data = arr.astype(p.dtype)

    def param_groups(self) -> dict[str, list[tuple[str, Tensor]]]:
        """``encoders`` (visual + text) and ``cross`` (everything else)."""
        groups: dict[str, list[tuple[str, Tensor]]] = {"encoders": [], "cross": []}
        for name, p in self.named_parameters():
            groups["encoders" if name.startswith(ENCODER_PREFIXES) else "cross"].append((name, p))
        return groups

    # -- forward pieces ------------------------------------------------------------
    def encode_videos(self, frames, tag_tokens: np.ndarray, trace: list | None = None) -> VideoEncoding:
        v = self.visual(frames)
        tag_seq, tag_overall, tag_keep = self.text(tag_tokens, "tag")
        if self.cfg.tag_tokens_mode == "all_tokens":
            tag, tag_mask = tag_seq, tag_keep
        else:
            tag, tag_mask = tag_overall, None
        fused, mask = tg_encode(v, tag, self.cross, tag_mask, trace)
        g_o, g_hat = pool_and_residual(fused, v, self.cross.lam, mask)
        return VideoEncoding(v, tag, tag_mask, fused, g_o, g_hat)

    def encode_captions(self, cap_tokens: np.ndarray) -> TextEncoding:
        seq, overall, keep = self.text(cap_tokens, "caption")
        return TextEncoding(seq, overall, keep)

    def similarity(self, video: VideoEncoding, text: TextEncoding) -> Tensor:
        return similarity_matrix(video.g_hat, text.overall, self.proj)


@dataclass
class Batch:
    frames: np.ndarray       # [B, N, D_raw]
    tag_tokens: np.ndarray   # [B, <=K]
    cap_tokens: np.ndarray   # [B, <=M]


def make_batch(records: Sequence[VideoRecord], vocab: Vocabulary, cfg: ModelConfig, trim: bool = True) -> Batch:
    frames = np.stack([r.frames for r in records]).astype(F.default_dtype())
    tags = np.stack([tokenize(concat_tags(r.tags), vocab, cfg.max_tag_len) for r in records])
    caps = np.stack([tokenize(r.caption, vocab, cfg.max_cap_len) for r in records])
    if trim:
        tags, caps = trim_pads(tags), trim_pads(caps)
    return Batch(frames, tags, caps)
