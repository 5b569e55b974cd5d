"""Synthetic video-text corpus, vocabulary, tokenizer and JSONL I/O.

Each record draws latent factors (object, person, scene, motion, audio).
Frames are sums of frozen per-factor embeddings plus a motion-dependent
temporal drift and Gaussian noise; audio never reaches the frames, so it is
only observable through tags. Captions are rendered from templates over the
factor words and tags come from :class:`~tablevtr.tagging.SyntheticExpert`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .catalog import CATALOGS, DISTRACTORS, TEMPLATES
from .tagging import MODALITY_ORDER, TagBundle, default_experts, run_experts

NUM_FRAMES = 4
RAW_DIM = 32

SPECIAL_TOKENS = ("[PAD]", "[BOS]", "[EOS]", "[MASK]", "[SEP]", "[UNK]")
PAD, BOS, EOS, MASK, SEP, UNK = range(len(SPECIAL_TOKENS))


@dataclass(frozen=True)
class LatentFactors:
    object_id: int
    person_id: int
    scene_id: int
    motion_id: int
    audio_id: int
    template: int = 0

    def __post_init__(self):
        for mod, catalog in CATALOGS.items():
            idx = getattr(self, f"{mod}_id")
            if not 0 <= idx < len(catalog):
                raise ValueError(f"{mod}_id={idx} outside catalog of size {len(catalog)}")
        if not 0 <= self.template < len(TEMPLATES):
            raise ValueError(f"template={self.template} outside [0, {len(TEMPLATES)})")

    def words(self) -> dict[str, str]:
        return {mod: CATALOGS[mod][getattr(self, f"{mod}_id")] for mod in CATALOGS}

    def to_dict(self) -> dict[str, int]:
        return {
            "object_id": self.object_id,
            "person_id": self.person_id,
            "scene_id": self.scene_id,
            "motion_id": self.motion_id,
            "audio_id": self.audio_id,
            "template": self.template,
        }


@dataclass
class VideoRecord:
    id: str
    frames: np.ndarray  # [N, D_raw] float32
    tags: TagBundle
    caption: str
    factors: LatentFactors | None = None

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2:
            raise ValueError(f"record {self.id}: frames must be [N, D_raw], got {self.frames.shape}")
        if not np.isfinite(self.frames).all():
            raise ValueError(f"record {self.id}: non-finite frame values")
        if not self.caption.strip():
            raise ValueError(f"record {self.id}: empty caption")

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "frames": self.frames.tolist(),
            "tags": self.tags.to_dict(),
            "caption": self.caption,
        }
        if self.factors is not None:
            out["factors"] = self.factors.to_dict()
        return out

    @classmethod
    def from_json(cls, d: dict) -> "VideoRecord":
        factors = d.get("factors")
        return cls(
            id=d["id"],
            frames=np.asarray(d["frames"], dtype=np.float32),
            tags=TagBundle.from_dict(d["tags"]),
            caption=d["caption"],
            factors=LatentFactors(**factors) if factors is not None else None,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, VideoRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.frames.shape == other.frames.shape
            and bool(np.array_equal(self.frames, other.frames))
            and self.tags == other.tags
            and self.caption == other.caption
            and self.factors == other.factors
        )


# -- vocabulary ---------------------------------------------------------------
class Vocabulary:
    def __init__(self, words: Iterable[str]):
        self.itos: list[str] = list(SPECIAL_TOKENS)
        for w in sorted(set(words) - set(SPECIAL_TOKENS)):
            self.itos.append(w)
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    pad_id, bos_id, eos_id, mask_id, sep_id, unk_id = PAD, BOS, EOS, MASK, SEP, UNK
    special_ids = frozenset(range(len(SPECIAL_TOKENS)))

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def id(self, word: str) -> int:
        return self.stoi.get(word, UNK)

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, itos: Sequence[str]) -> "Vocabulary":
        if tuple(itos[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise ValueError("vocabulary does not start with the special tokens")
        vocab = cls(())
        vocab.itos = list(itos)
        vocab.stoi = {w: i for i, w in enumerate(vocab.itos)}
        return vocab


def build_vocabulary() -> Vocabulary:
    """Factor words, template words and filler words."""
    words: set[str] = set(DISTRACTORS)
    for catalog in CATALOGS.values():
        for entry in catalog:
            words.update(entry.split())
    for tpl in TEMPLATES:
        words.update(w for w in tpl.split() if not w.startswith("{"))
    return Vocabulary(words)


def tokenize(text: str, vocab: Vocabulary, max_len: int) -> np.ndarray:
    """``[BOS] words [EOS] [PAD]...`` of exactly ``max_len`` ids."""
    if max_len < 3:
        raise ValueError(f"max_len must be >= 3, got {max_len}")
    ids = [vocab.id(w) for w in text.lower().split()][: max_len - 2]
    out = np.full(max_len, PAD, dtype=np.int64)
    out[0] = BOS
    out[1 : 1 + len(ids)] = ids
    out[1 + len(ids)] = EOS
    return out


def detokenize(ids: Sequence[int], vocab: Vocabulary) -> str:
    words = []
    for i in ids:
        i = int(i)
        if i == EOS:
            break
        if i in Vocabulary.special_ids and i != UNK:
            continue
        words.append(vocab.itos[i])
    return " ".join(words)


# -- corpus generation ----------------------------------------------------------
def factor_embeddings(seed: int, raw_dim: int = RAW_DIM, object_alias: int = 2) -> dict[str, np.ndarray]:
    """Frozen per-seed embedding tables, one row per catalog entry.

    Audio is absent on purpose: the visual stream never sees it. Objects
    share visual prototypes in consecutive groups of ``object_alias``
    (bowl/cup look alike), so only the object tag separates them. The extra
    ``drift`` table holds one temporal direction per motion.
    """
    if object_alias < 1:
        raise ValueError("object_alias must be >= 1")
    rng = np.random.default_rng([seed, 0xFAC7])
    tables = {}
    for mod in ("object", "person", "scene", "motion"):
        tables[mod] = rng.normal(0.0, 1.0, (len(CATALOGS[mod]), raw_dim)) / np.sqrt(raw_dim) * 2.0
    proto = np.arange(len(CATALOGS["object"])) // object_alias * object_alias
    tables["object"] = tables["object"][proto]
    tables["drift"] = rng.normal(0.0, 1.0, (len(CATALOGS["motion"]), raw_dim)) / np.sqrt(raw_dim) * 2.0
    return tables


def render_frames(
    factors: LatentFactors,
    tables: dict[str, np.ndarray],
    rng: np.random.Generator,
    noise_sigma: float,
    num_frames: int = NUM_FRAMES,
) -> np.ndarray:
    base = sum(tables[mod][getattr(factors, f"{mod}_id")] for mod in ("object", "person", "scene", "motion"))
    t = np.linspace(-1.0, 1.0, num_frames)[:, None]
    frames = base[None, :] + t * tables["drift"][factors.motion_id][None, :]
    if noise_sigma > 0:
        frames = frames + rng.normal(0.0, noise_sigma, frames.shape)
    return frames.astype(np.float32)


def render_caption(factors: LatentFactors) -> str:
    return TEMPLATES[factors.template].format(**factors.words())


def generate_corpus(
    num: int,
    seed: int = 7,
    noise_sigma: float = 0.5,
    drop_prob: float = 0.1,
    distractor_prob: float = 0.1,
    num_frames: int = NUM_FRAMES,
    raw_dim: int = RAW_DIM,
    object_alias: int = 2,
) -> list[VideoRecord]:
    if num < 1:
        raise ValueError(f"num must be >= 1, got {num}")
    tables = factor_embeddings(seed, raw_dim, object_alias)
    experts = default_experts(drop_prob, distractor_prob, seed)
    records = []
    for i in range(num):
        # per-record stream so records can be generated independently
        rng = np.random.default_rng([seed, i])
        ids = [int(rng.integers(len(CATALOGS[m.value]))) for m in MODALITY_ORDER]
        factors = LatentFactors(*ids, template=int(rng.integers(len(TEMPLATES))))
        rec = VideoRecord(
            id=f"video{i:05d}",
            frames=render_frames(factors, tables, rng, noise_sigma, num_frames),
            tags=TagBundle(),
            caption=render_caption(factors),
            factors=factors,
        )
        rec.tags = run_experts(rec, experts)
        records.append(rec)
    return records


def shuffle_tags(records: Sequence[VideoRecord], seed: int) -> list[VideoRecord]:
    """Copy of ``records`` with tag bundles permuted across records (no fixed points)."""
    n = len(records)
    rng = np.random.default_rng([seed, 0x5AFF])
    perm = rng.permutation(n)
    # one cycle through a random order: record perm[k] takes the tags of perm[k+1]
    src = np.empty(n, dtype=np.int64)
    src[perm] = np.roll(perm, -1)
    return [
        VideoRecord(r.id, r.frames, TagBundle.from_dict(records[int(j)].tags.to_dict()), r.caption, r.factors)
        for r, j in zip(records, src)
    ]


def split_corpus(records: Sequence[VideoRecord], seed: int, train_frac: float = 0.8):
    rng = np.random.default_rng([seed, 0x5B11])
    order = rng.permutation(len(records))
    cut = int(round(train_frac * len(records)))
    return [records[i] for i in order[:cut]], [records[i] for i in order[cut:]]


# -- JSONL --------------------------------------------------------------------------
class CorpusParseError(ValueError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.line = line


def write_jsonl(path, records: Iterable[VideoRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), separators=(",", ":")))
            fh.write("\n")


def read_jsonl(path) -> list[VideoRecord]:
    records = []
    with open(Path(path), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(VideoRecord.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusParseError(path, lineno, f"{type(exc).__name__}: {exc}") from exc
    return records
