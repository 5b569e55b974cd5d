"""Training loop: all three objectives, two-group Adam with warmup-then-cosine lr."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numerics as F
from .datagen import VideoRecord, Vocabulary, build_vocabulary, split_corpus
from .fusion import joint_encode, mlm_logits, vtm_logits
from .model import Batch, ModelConfig, TableModel, make_batch
from .numerics import Tensor
from .objectives import apply_mlm_mask, contrastive_loss, mine_hard_negatives, mlm_loss, total_loss, vtm_loss, vtm_pairs

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 32
    lr_encoders: float = 1.5e-3
    lr_cross: float = 2e-3
    warmup_frac: float = 0.1
    seed: int = 7
    loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    # logit scale for hard-negative sampling; None follows the learned temperature
    mining_scale: float | None = None
    grad_clip: float = 1.0
    train_frac: float = 0.8
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        self.loss_weights = tuple(float(w) for w in self.loss_weights)
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (mining needs an in-batch negative)")
        if self.lr_encoders < 0 or self.lr_cross < 0:
            raise ValueError("learning rates must be non-negative")
        if len(self.loss_weights) != 3:
            raise ValueError("loss_weights must have three entries (con, vtm, mlm)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss_weights"] = list(self.loss_weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class TrainingError(RuntimeError):
    pass


def lr_schedule(step: int, total_steps: int, base_lr: float, warmup_frac: float = 0.1) -> float:
    """Linear warmup from 0 to ``base_lr``, then cosine decay to 0 at ``total_steps``."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup = int(round(warmup_frac * total_steps))
    if warmup > 0 and step < warmup:
        return base_lr * step / warmup
    if total_steps == warmup:
        return base_lr
    progress = (step - warmup) / (total_steps - warmup)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


class Adam:
    """Bias-corrected Adam over named parameter groups."""

    def __init__(self, groups: dict[str, list[tuple[str, Tensor]]], beta1=0.9, beta2=0.999, eps=1e-8):
        self.groups = groups
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        seen: set[int] = set()
        for items in groups.values():
            for name, p in items:
                if id(p) in seen:
                    raise ValueError(f"parameter {name} appears in more than one group")
                seen.add(id(p))
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)

    def step(self, lrs: dict[str, float]) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for group, items in self.groups.items():
            lr = lrs[group]
            for name, p in items:
                g = p.grad
                if g is None:
                    continue
                m, v = self.m[name], self.v[name]
                if g.shape != p.shape:
                    raise ValueError(f"{name}: grad shape {g.shape} != param shape {p.shape}")
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                if lr:
                    update = lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
                    p.data -= update.astype(p.dtype)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: Adam, lr_t: float | dict) -> None:
    """Functional wrapper: assign ``grads`` then step every group at ``lr_t``."""
    for p, g in zip(params, grads):
        p.grad = np.asarray(g, dtype=p.dtype)
    lrs = lr_t if isinstance(lr_t, dict) else {k: lr_t for k in state.groups}
    state.step(lrs)


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    grads = [p.grad for p in params if p.grad is not None]
    total = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads))
    if max_norm and total > max_norm:
        factor = max_norm / (total + 1e-6)
        for g in grads:
            g *= factor
    return total


@dataclass
class StepLosses:
    con: float
    vtm: float
    mlm: float
    total: float


def compute_losses(
    model: TableModel,
    batch: Batch,
    cfg: TrainConfig,
    rng: np.random.Generator,
    vocab_size: int,
) -> tuple[Tensor, StepLosses]:
    """Forward pass of all enabled objectives on one batch."""
    w_con, w_vtm, w_mlm = cfg.loss_weights
    video = model.encode_videos(batch.frames, batch.tag_tokens)
    text = model.encode_captions(batch.cap_tokens)
    sim = model.similarity(video, text)
    _, _, l_con = contrastive_loss(sim, model.temp.scale())
    l_vtm = l_mlm = None
    b = len(batch.frames)
    tag_mask = video.tag_mask

    if w_vtm:
        scale = cfg.mining_scale if cfg.mining_scale is not None else model.temp.value
        neg_text, neg_video = mine_hard_negatives(sim.data, rng, scale)
        vid_idx, txt_idx, labels = vtm_pairs(b, neg_text, neg_video)
        joint, _ = joint_encode(
            F.take_rows(video.v, vid_idx),
            F.take_rows(video.tag, vid_idx),
            F.take_rows(text.seq, txt_idx),
            text.mask[txt_idx],
            model.cross,
            None if tag_mask is None else tag_mask[vid_idx],
        )
        l_vtm = vtm_loss(vtm_logits(joint, model.cross), labels)

    if w_mlm:
        masked = apply_mlm_mask(batch.cap_tokens, vocab_size, rng)
        seq, keep = model.text.hidden(masked.tokens)
        _, text_pos = joint_encode(video.v, video.tag, seq, keep, model.cross, tag_mask)
        l_mlm = mlm_loss(mlm_logits(text_pos, model.cross), masked.labels, masked.positions)

    zero = F.tensor(0.0)
    loss = total_loss(l_con, l_vtm if l_vtm is not None else zero, l_mlm if l_mlm is not None else zero, cfg.loss_weights)
    parts = StepLosses(
        con=l_con.item(),
        vtm=l_vtm.item() if l_vtm is not None else 0.0,
        mlm=l_mlm.item() if l_mlm is not None else 0.0,
        total=loss.item(),
    )
    return loss, parts


def iterate_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        if len(idx) >= 2:
            yield idx


def steps_per_epoch(n: int, batch_size: int) -> int:
    full, rest = divmod(n, batch_size)
    return full + (1 if rest >= 2 else 0)


@dataclass
class EpochLog:
    epoch: int
    l_con: float
    l_vtm: float
    l_mlm: float
    val_r1: float


@dataclass
class TrainResult:
    model: TableModel
    vocab: Vocabulary
    history: list[EpochLog]
    train_records: list[VideoRecord]
    test_records: list[VideoRecord]


def train(
    corpus: Sequence[VideoRecord],
    cfg: TrainConfig,
    out_dir=None,
    vocab: Vocabulary | None = None,
    model: TableModel | None = None,
) -> TrainResult:
    """Train on the seeded 80% split and validate on the rest after every epoch.

    With ``out_dir`` set, writes ``checkpoint.bin`` (each epoch),
    ``metrics.csv`` and ``config.json`` there.
    """
    from .retrieval import evaluate_model, save_checkpoint

    vocab = vocab or build_vocabulary()
    train_recs, test_recs = split_corpus(corpus, cfg.seed, cfg.train_frac)
    if len(train_recs) < 2:
        raise TrainingError("training split needs at least two records")
    if model is None:
        mcfg = ModelConfig(vocab_size=len(vocab), **{"seed": cfg.seed, **cfg.model})
        model = TableModel(mcfg)
    mcfg = model.cfg
    groups = model.param_groups()
    opt = Adam(groups, cfg.beta1, cfg.beta2, cfg.adam_eps)
    params = model.parameters()
    rng = np.random.default_rng([cfg.seed, 0x7A1])
    total_steps = cfg.epochs * steps_per_epoch(len(train_recs), cfg.batch_size)
    base = {"encoders": cfg.lr_encoders, "cross": cfg.lr_cross}

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))

    history: list[EpochLog] = []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        sums = np.zeros(3)
        count = 0
        for idx in iterate_batches(len(train_recs), cfg.batch_size, rng):
            batch = make_batch([train_recs[i] for i in idx], vocab, mcfg)
            model.zero_grad()
            loss, parts = compute_losses(model, batch, cfg, rng, len(vocab))
            if not math.isfinite(parts.total):
                raise TrainingError(f"non-finite loss at epoch {epoch} step {step}: {parts}")
            loss.backward()
            clip_grad_norm(params, cfg.grad_clip)
            step += 1
            opt.step({g: lr_schedule(step, total_steps, base[g], cfg.warmup_frac) for g in base})
            model.temp.clamp()
            sums += (parts.con, parts.vtm, parts.mlm)
            count += 1
        means = sums / max(count, 1)
        val_r1 = evaluate_model(model, test_recs, vocab)[0].r1 if len(test_recs) >= 2 else float("nan")
        entry = EpochLog(epoch, *means.tolist(), val_r1)
        history.append(entry)
        log.info(
            "epoch %d: con %.4f vtm %.4f mlm %.4f val T2V R@1 %.2f (lam %.3f, scale %.2f)",
            epoch, *means, val_r1, float(model.cross.lam.data), model.temp.value,
        )
        if out is not None:
            save_checkpoint(out / "checkpoint.bin", model, vocab)
            write_metrics(out / "metrics.csv", history)
    return TrainResult(model, vocab, history, list(train_recs), list(test_recs))


def write_metrics(path, history: Sequence[EpochLog]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "L_con", "L_vtm", "L_mlm", "val_R@1"])
        for e in history:
            w.writerow([e.epoch, f"{e.l_con:.6f}", f"{e.l_vtm:.6f}", f"{e.l_mlm:.6f}", f"{e.val_r1:.4f}"])
