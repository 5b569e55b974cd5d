"""Training objectives: symmetric contrastive loss, matching loss with in-batch
hard negatives, masked-word loss with 80/10/10 corruption, and their sum.

All losses use the natural logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as F
from .datagen import SPECIAL_TOKENS, Vocabulary
from .nn import Module
from .numerics import Tensor

MIN_SCALE, MAX_SCALE = 1.0, 100.0


class Temperature(Module):
    """Learnable logit scale ``exp(w)``, kept inside [1, 100] by :meth:`clamp`."""

    def __init__(self, init_scale: float = 1 / 0.07):
        self.w = F.parameter(np.array(math.log(init_scale)))

    def scale(self) -> Tensor:
        return F.exp(self.w)

    def clamp(self) -> None:
        np.clip(self.w.data, math.log(MIN_SCALE), math.log(MAX_SCALE), out=self.w.data)

    @property
    def value(self) -> float:
        return float(np.exp(self.w.data))


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else F.tensor(x)


def contrastive_loss(sim: Tensor, scale) -> tuple[Tensor, Tensor, Tensor]:
    """Symmetric InfoNCE over a square similarity matrix (rows = videos).

    Returns ``(L_t2v, L_v2t, L_con)``. ``L_t2v`` normalizes each text's
    column over videos, ``L_v2t`` each video's row over texts.
    """
    sim = _as_tensor(sim)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1]:
        raise ValueError(f"contrastive loss needs a square matrix, got {sim.shape}")
    logits = sim * scale
    target = np.arange(sim.shape[0])
    l_t2v = F.cross_entropy(logits, target, axis=0)
    l_v2t = F.cross_entropy(logits, target, axis=1)
    return l_t2v, l_v2t, F.scale(l_t2v + l_v2t, 0.5)


def _sample_rows(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    cdf = np.cumsum(p, axis=1)
    u = rng.random((len(p), 1)) * cdf[:, -1:]
    idx = (cdf <= u).sum(axis=1)
    return np.minimum(idx, logits.shape[1] - 1)


def negative_probabilities(sim: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Row-wise sampling distribution for hard negatives (diagonal has mass 0)."""
    s = np.asarray(sim, dtype=np.float64) * scale
    np.fill_diagonal(s, -np.inf)
    s -= s.max(axis=1, keepdims=True)
    p = np.exp(s)
    return p / p.sum(axis=1, keepdims=True)


def mine_hard_negatives(sim, seed, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Sample one in-batch negative per video and per text.

    Video ``i`` gets text ``j != i`` with probability proportional to
    ``exp(scale * S[i, j])``; text ``j`` gets video ``k != j`` from column
    ``j`` the same way. ``seed`` may be an int or a numpy Generator.
    """
    s = np.asarray(sim.data if isinstance(sim, Tensor) else sim, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"mining needs a square matrix, got {s.shape}")
    if s.shape[0] < 2:
        raise ValueError("mining needs a batch of at least 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    big_neg = -1e300
    rows = s * scale
    np.fill_diagonal(rows, big_neg)
    cols = s.T * scale
    np.fill_diagonal(cols, big_neg)
    neg_text = _sample_rows(rows, rng)
    neg_video = _sample_rows(cols, rng)
    return neg_text, neg_video


def vtm_pairs(batch: int, neg_text: np.ndarray, neg_video: np.ndarray):
    """Index triplets for matching: B positives, B text negatives, B video negatives.

    Returns ``(video_idx, text_idx, labels)`` each of length 3B.
    """
    ar = np.arange(batch)
    video_idx = np.concatenate([ar, ar, neg_video])
    text_idx = np.concatenate([ar, neg_text, ar])
    labels = np.concatenate([np.ones(batch, np.int64), np.zeros(2 * batch, np.int64)])
    if np.any((video_idx == text_idx) != (labels == 1)):
        raise AssertionError("negative pair coincides with its positive")
    return video_idx, text_idx, labels


def vtm_loss(logits, labels) -> Tensor:
    """Mean two-class cross-entropy over matched / mismatched pairs."""
    logits = _as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.shape != (len(labels), 2) or len(labels) < 1:
        raise ValueError(f"expected logits [O, 2] for O={len(labels)}, got {logits.shape}")
    return F.cross_entropy(logits, labels, axis=1)


@dataclass
class MaskedText:
    tokens: np.ndarray     # corrupted ids, same shape as the input
    positions: np.ndarray  # flat indices (1-D) or (row, col) pairs (2-D input)
    labels: np.ndarray     # original ids at ``positions``


def _maskable(tokens: np.ndarray) -> np.ndarray:
    return tokens >= len(SPECIAL_TOKENS)


def apply_mlm_mask(
    tokens,
    vocab: Vocabulary | int,
    seed,
    mask_prob: float = 0.15,
    mask_id: int | None = None,
) -> MaskedText:
    """Select ~15% of non-special tokens; 80% -> [MASK], 10% -> random word, 10% kept.

    A sequence that ends up with no selection gets one uniformly chosen
    maskable position forced. Works on one sequence [M] or a batch [Q, M].
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    vocab_size = vocab if isinstance(vocab, int) else len(vocab)
    mask_id = Vocabulary.mask_id if mask_id is None else mask_id
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    batch = np.atleast_2d(tokens)
    maskable = _maskable(batch)
    if not maskable.any(axis=1).all():
        raise ValueError("every sequence needs at least one maskable token")

    selected = maskable & (rng.random(batch.shape) < mask_prob)
    for q in np.flatnonzero(~selected.any(axis=1)):
        cand = np.flatnonzero(maskable[q])
        selected[q, cand[rng.integers(len(cand))]] = True

    action = rng.random(batch.shape)
    random_ids = rng.integers(len(SPECIAL_TOKENS), vocab_size, size=batch.shape)
    out = batch.copy()
    to_mask = selected & (action < 0.8)
    to_rand = selected & (action >= 0.8) & (action < 0.9)
    out[to_mask] = mask_id
    out[to_rand] = random_ids[to_rand]

    rows, cols = np.nonzero(selected)
    labels = batch[rows, cols]
    if tokens.ndim == 1:
        return MaskedText(out[0], cols, labels)
    return MaskedText(out, np.stack([rows, cols], axis=1), labels)


def mlm_loss(logits, labels, positions) -> Tensor:
    """Mean cross-entropy over masked positions.

    ``logits`` is [Q, M, V]; ``positions`` is a [P, 2] array of (q, m).
    """
    logits = _as_tensor(logits)
    positions = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
    labels = np.asarray(labels, dtype=np.int64)
    if len(positions) == 0:
        raise ValueError("mlm loss needs at least one masked position")
    if len(labels) != len(positions):
        raise ValueError("labels and positions differ in length")
    picked = logits[positions[:, 0], positions[:, 1]]
    return F.cross_entropy(picked, labels, axis=1)


def total_loss(l_con: Tensor, l_vtm: Tensor, l_mlm: Tensor, weights=(1.0, 1.0, 1.0)) -> Tensor:
    w_con, w_vtm, w_mlm = weights
    total = F.scale(l_con, w_con)
    # zero-weight terms are left off the tape entirely
    if w_vtm:
        total = total + F.scale(l_vtm, w_vtm)
    if w_mlm:
        total = total + F.scale(l_mlm, w_mlm)
    return total
