"""Attention rollout over the fusion encoder and a small SVG rendering of it.

Frames are feature vectors here, so there is no spatial map to draw. The
picture is a color bar of per-frame weights with the tag (and caption)
slots listed underneath.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from . import numerics as F
from .datagen import VideoRecord, Vocabulary
from .model import TableModel, make_batch
from .tagging import concat_tags

ROW_TOL = 1e-5


class RolloutContractError(ValueError):
    """An attention matrix whose rows do not sum to one."""


@dataclass
class AttentionTrace:
    """Per-layer attention of one sample and what each slot holds.

    ``layers[l]`` is [H, T, T] or [T, T]; ``slots[t]`` is a label such as
    ``"frame 0"``, ``"tag"`` or ``"text 3"``.
    """

    layers: list[np.ndarray]
    slots: list[str]
    words: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        for i, a in enumerate(self.layers):
            if a.shape[-1] != len(self.slots) or a.shape[-2] != len(self.slots):
                raise ValueError(f"layer {i} has shape {a.shape}, expected {len(self.slots)} slots")

    def frame_slots(self) -> list[int]:
        return [i for i, s in enumerate(self.slots) if s.startswith("frame")]


def _check_rows(a: np.ndarray, layer: int) -> None:
    sums = a.sum(axis=-1)
    if not np.allclose(sums, 1.0, atol=ROW_TOL, rtol=0.0):
        worst = float(np.abs(sums - 1.0).max())
        raise RolloutContractError(f"layer {layer}: attention rows deviate from 1 by {worst:.3g}")


def attention_rollout(trace: AttentionTrace | Sequence[np.ndarray]) -> np.ndarray:
    """Product of per-layer ``0.5 A + 0.5 I`` (row-renormalized), last layer on the left.

    Heads are averaged before mixing in the identity.
    """
    layers = trace.layers if isinstance(trace, AttentionTrace) else list(trace)
    if not layers:
        raise ValueError("empty attention trace")
    out = None
    for i, a in enumerate(layers):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim == 3:
            a = a.mean(axis=0)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"layer {i}: expected a square matrix, got {a.shape}")
        _check_rows(a, i)
        mixed = 0.5 * a + 0.5 * np.eye(len(a))
        mixed /= mixed.sum(axis=1, keepdims=True)
        out = mixed if out is None else mixed @ out
    return out


def trace_record(model: TableModel, record: VideoRecord, vocab: Vocabulary) -> AttentionTrace:
    """Attention of the tag-guided encoder for one record (sample 0 of a batch of 1)."""
    batch = make_batch([record], vocab, model.cfg)
    raw: list[np.ndarray] = []
    with F.no_grad():
        model.encode_videos(batch.frames, batch.tag_tokens, trace=raw)
    n = batch.frames.shape[1]
    if model.cfg.tag_tokens_mode == "all_tokens":
        ids = batch.tag_tokens[0]
        slots = [f"frame {i}" for i in range(n)] + [f"tag {j}" for j in range(len(ids))]
        words = {n + j: vocab.itos[t] for j, t in enumerate(ids)}
    else:
        slots = [f"frame {i}" for i in range(n)] + ["tag"]
        words = {n: concat_tags(record.tags)}
    return AttentionTrace([a[0] for a in raw], slots, words)


def pooled_weights(rollout: np.ndarray) -> np.ndarray:
    """Attribution of the mean-pooled output: the average rollout row."""
    return np.asarray(rollout, dtype=np.float64).mean(axis=0)


def _shade(x: float) -> str:
    # white (x=0) to dark blue (x=1)
    lo, hi = np.array([255, 255, 255]), np.array([8, 48, 107])
    rgb = np.rint(lo + (hi - lo) * min(max(x, 0.0), 1.0)).astype(int)
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def frame_colors(weights: Sequence[float]) -> list[str]:
    """Color per frame cell, darker for larger weight (scaled by the max)."""
    w = np.asarray(weights, dtype=np.float64)
    top = w.max() if len(w) and w.max() > 0 else 1.0
    return [_shade(float(x / top)) for x in w]


def render_attention(rollout: np.ndarray, trace: AttentionTrace, out_path, title: str = "") -> str:
    """Write the color-bar SVG to ``out_path`` and return its text.

    The output depends only on the inputs; numbers are printed at fixed
    precision so identical inputs give identical bytes.
    """
    weights = pooled_weights(rollout)
    frames = trace.frame_slots()
    fw = weights[frames]
    share = fw / fw.sum() if fw.sum() > 0 else np.full(len(fw), 1.0 / max(len(fw), 1))
    colors = frame_colors(share)
    others = [i for i in range(len(trace.slots)) if i not in frames]

    cell, pad = 60, 10
    width = max(2 * pad + cell * len(frames), 320)
    height = 2 * pad + 40 + cell + 20 * (len(others) + 1)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="11">',
        f'<text x="{pad}" y="{pad + 12}">{escape(title or "temporal attention")}</text>',
    ]
    top = pad + 24
    for k, (slot, color, s) in enumerate(zip(frames, colors, share)):
        x = pad + k * cell
        lines.append(
            f'<rect x="{x}" y="{top}" width="{cell}" height="{cell}" fill="{color}" stroke="#000000" '
            f'data-slot="{escape(trace.slots[slot])}" data-weight="{s:.4f}"/>'
        )
        ink = "#ffffff" if s / share.max() > 0.5 else "#000000"
        lines.append(f'<text x="{x + 4}" y="{top + cell - 6}" fill="{ink}">{s:.3f}</text>')
    y = top + cell + 18
    lines.append(f'<text x="{pad}" y="{y}">slot weights (pooled row):</text>')
    for i in others:
        y += 20
        label = trace.slots[i]
        word = trace.words.get(i)
        text = f"{label}: {weights[i]:.4f}" + (f" [{word}]" if word else "")
        lines.append(f'<text x="{pad}" y="{y}">{escape(text)}</text>')
    lines.append("</svg>")
    svg = "\n".join(lines) + "\n"
    Path(out_path).write_text(svg, encoding="utf-8")
    return svg
