"""Retrieval evaluation: rank metrics, dual-softmax revision, checkpoints."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import numerics as F
from .datagen import VideoRecord, Vocabulary
from .fusion import project_text, project_video
from .model import ModelConfig, TableModel, make_batch
from .numerics import load_params, save_params


@dataclass
class RetrievalReport:
    direction: str  # "T2V" or "V2T"
    r1: float
    r5: float
    r10: float
    mdr: float
    mnr: float

    def to_dict(self) -> dict:
        return asdict(self)

    def row(self) -> str:
        return f"{self.direction:<4} {self.r1:7.2f} {self.r5:7.2f} {self.r10:7.2f} {self.mdr:7.1f} {self.mnr:8.2f}"


REPORT_HEADER = "dir     R@1     R@5    R@10     MdR      MnR"


def ranks_of_truth(sim: np.ndarray, truth: Sequence[int]) -> np.ndarray:
    """1-based rank of each query's true candidate; ties go to the lower index."""
    sim = np.asarray(sim, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    nq, nc = sim.shape
    if truth.shape != (nq,):
        raise ValueError(f"truth must have one entry per query ({nq}), got {truth.shape}")
    if (truth < 0).any() or (truth >= nc).any():
        raise IndexError(f"truth index out of range [0, {nc})")
    true_scores = sim[np.arange(nq), truth][:, None]
    cols = np.arange(nc)[None, :]
    ahead = (sim > true_scores) | ((sim == true_scores) & (cols < truth[:, None]))
    return ahead.sum(axis=1) + 1


def compute_metrics(sim, truth, direction: str = "T2V") -> RetrievalReport:
    """R@1/5/10 (percent), median and mean rank for queries along rows."""
    ranks = ranks_of_truth(sim, truth)
    return RetrievalReport(
        direction=direction,
        r1=100.0 * float(np.mean(ranks <= 1)),
        r5=100.0 * float(np.mean(ranks <= 5)),
        r10=100.0 * float(np.mean(ranks <= 10)),
        mdr=float(np.median(ranks)),
        mnr=float(np.mean(ranks)),
    )


def dsl_revise(sim, dsl_temp: float = 100.0) -> np.ndarray:
    """Reweight each candidate column by a softmax over queries.

    ``sim`` has queries along rows. The prior ``softmax(dsl_temp * sim,
    axis=0)`` says how strongly a candidate prefers each query; multiplying
    it in demotes candidates that match many queries equally well.
    """
    if dsl_temp <= 0:
        raise ValueError("dsl_temp must be positive")
    s = np.asarray(sim, dtype=np.float64)
    z = s * dsl_temp
    z = z - z.max(axis=0, keepdims=True)
    prior = np.exp(z)
    prior /= prior.sum(axis=0, keepdims=True)
    return s * prior


def similarity_for(model: TableModel, records: Sequence[VideoRecord], vocab: Vocabulary, chunk: int = 128) -> np.ndarray:
    """Video x text similarity over ``records`` using only the TG and text paths."""
    g_rows, c_rows = [], []
    with F.no_grad():
        for start in range(0, len(records), chunk):
            batch = make_batch(records[start : start + chunk], vocab, model.cfg)
            video = model.encode_videos(batch.frames, batch.tag_tokens)
            text = model.encode_captions(batch.cap_tokens)
            g_rows.append(video.g_hat.data)
            c_rows.append(text.overall.data)
        g = project_video(F.tensor(np.concatenate(g_rows)), model.proj).data
        c = project_text(F.tensor(np.concatenate(c_rows)), model.proj).data
    return g.astype(np.float64) @ c.astype(np.float64).T


def evaluate_model(
    model: TableModel,
    records: Sequence[VideoRecord],
    vocab: Vocabulary,
    dsl: bool = False,
    dsl_temp: float = 100.0,
) -> tuple[RetrievalReport, RetrievalReport]:
    """Return (T2V, V2T) reports; caption ``i`` belongs to video ``i``."""
    if len(records) < 1:
        raise ValueError("evaluation needs at least one record")
    sim = similarity_for(model, records, vocab)
    t2v, v2t = sim.T, sim
    if dsl:
        t2v, v2t = dsl_revise(t2v, dsl_temp), dsl_revise(v2t, dsl_temp)
    truth = np.arange(len(records))
    return compute_metrics(t2v, truth, "T2V"), compute_metrics(v2t, truth, "V2T")


# -- checkpoints -------------------------------------------------------------------
class VocabularyMismatch(ValueError):
    pass


def save_checkpoint(path, model: TableModel, vocab: Vocabulary) -> None:
    meta = {"model_config": model.cfg.to_dict(), "vocab": vocab.to_list()}
    save_params(path, model.state_dict(), meta)


def load_checkpoint(path) -> tuple[TableModel, Vocabulary]:
    state, meta = load_params(path)
    model = TableModel(ModelConfig.from_dict(meta["model_config"]))
    model.load_state_dict(state)
    return model, Vocabulary.from_list(meta["vocab"])


def check_vocabulary(ckpt_vocab: Vocabulary, records: Sequence[VideoRecord]) -> None:
    """Every caption and tag word of ``records`` must be known to the checkpoint."""
    from .tagging import concat_tags

    unknown = set()
    for r in records:
        for w in (r.caption + " " + concat_tags(r.tags)).lower().split():
            if w not in ckpt_vocab.stoi:
                unknown.add(w)
    if unknown:
        raise VocabularyMismatch(f"corpus words missing from checkpoint vocabulary: {sorted(unknown)[:10]}")


def evaluate(checkpoint, records: Sequence[VideoRecord], dsl: bool = False, dsl_temp: float = 100.0):
    """Load ``checkpoint`` and evaluate on ``records``; the joint encoder is never used."""
    model, vocab = load_checkpoint(checkpoint)
    check_vocabulary(vocab, records)
    return evaluate_model(model, records, vocab, dsl, dsl_temp)


def reports_json(reports: Sequence[RetrievalReport]) -> str:
    return json.dumps({r.direction: r.to_dict() for r in reports}, indent=2, sort_keys=True)
