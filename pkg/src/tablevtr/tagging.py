"""Multi-modal tag mining: expert interface, filtering and tag concatenation.

Real taggers (detectors, classifiers, ASR keyword extraction) are replaced by
:class:`SyntheticExpert`, which reads a record's latent factors and corrupts
them with controlled drops and distractors.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Protocol, Sequence

import numpy as np

from .catalog import CATALOGS, DISTRACTORS

if TYPE_CHECKING:
    from .datagen import VideoRecord

DEFAULT_QUOTA = 4
DEFAULT_THRESHOLD = 0.5


class Modality(str, Enum):
    OBJECT = "object"
    PERSON = "person"
    SCENE = "scene"
    MOTION = "motion"
    AUDIO = "audio"


# concatenation order of tags
MODALITY_ORDER = (Modality.OBJECT, Modality.PERSON, Modality.SCENE, Modality.MOTION, Modality.AUDIO)


class ExpertConfigError(ValueError):
    pass


@dataclass
class TagBundle:
    object: list[str] = field(default_factory=list)
    person: list[str] = field(default_factory=list)
    scene: list[str] = field(default_factory=list)
    motion: list[str] = field(default_factory=list)
    audio: list[str] = field(default_factory=list)

    def get(self, modality: Modality | str) -> list[str]:
        return getattr(self, Modality(modality).value)

    def to_dict(self) -> dict[str, list[str]]:
        return {m.value: list(self.get(m)) for m in MODALITY_ORDER}

    @classmethod
    def from_dict(cls, d: dict) -> "TagBundle":
        unknown = set(d) - {m.value for m in MODALITY_ORDER}
        if unknown:
            raise ValueError(f"unknown tag modalities: {sorted(unknown)}")
        return cls(**{k: list(v) for k, v in d.items()})

    def is_empty(self) -> bool:
        return not any(self.get(m) for m in MODALITY_ORDER)


@dataclass
class ExpertOutput:
    modality: Modality
    candidates: list[tuple[str, float]]

    def __post_init__(self):
        self.modality = Modality(self.modality)
        for tag, conf in self.candidates:
            if not 0.0 <= conf <= 1.0:
                raise ValueError(f"confidence {conf} for {tag!r} outside [0, 1]")


class Expert(Protocol):
    modality: Modality

    def __call__(self, record: "VideoRecord") -> ExpertOutput: ...


def _canonical(tags: Iterable[str], quota: int) -> list[str]:
    # dedupe, then a canonical order so insertion order never matters
    return sorted(set(tags))[:quota]


def run_experts(
    record: "VideoRecord",
    experts: Sequence[Expert],
    conf_threshold: float = DEFAULT_THRESHOLD,
    quota: int = DEFAULT_QUOTA,
) -> TagBundle:
    """Run every expert on ``record`` and assemble the surviving tags.

    Candidates under ``conf_threshold`` are dropped; each modality is then
    deduplicated, sorted and cut to ``quota``. Modalities without an
    expert stay empty.
    """
    if not 0.0 <= conf_threshold <= 1.0:
        raise ValueError(f"conf_threshold must lie in [0, 1], got {conf_threshold}")
    seen: set[Modality] = set()
    bundle = TagBundle()
    for expert in experts:
        mod = Modality(expert.modality)
        if mod in seen:
            raise ExpertConfigError(f"more than one expert for modality {mod.value!r}")
        seen.add(mod)
        out = expert(record)
        kept = [tag for tag, conf in out.candidates if conf >= conf_threshold]
        setattr(bundle, mod.value, _canonical(kept, quota))
    return bundle


def concat_tags(bundle: TagBundle, sep: str = " ") -> str:
    """Join all tags in object, person, scene, motion, audio order."""
    return sep.join(tag for m in MODALITY_ORDER for tag in _canonical(bundle.get(m), len(bundle.get(m))))


class SyntheticExpert:
    """Stand-in tagger that reads a record's latent factors.

    The true factor word is emitted with confidence drawn from U(0.6, 1.0)
    unless dropped (probability ``drop_prob``); a filler word is injected with
    probability ``distractor_prob`` at confidence U(0.3, 0.7). Output depends
    only on (seed, modality, record id), so the expert is a pure function.
    """

    def __init__(self, modality: Modality | str, drop_prob: float = 0.0, distractor_prob: float = 0.0, seed: int = 0):
        for name, p in (("drop_prob", drop_prob), ("distractor_prob", distractor_prob)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        self.modality = Modality(modality)
        self.drop_prob = drop_prob
        self.distractor_prob = distractor_prob
        self.seed = seed

    def __call__(self, record: "VideoRecord") -> ExpertOutput:
        if record.factors is None:
            raise ValueError(f"record {record.id!r} has no latent factors")
        mod_idx = MODALITY_ORDER.index(self.modality)
        rng = np.random.default_rng([self.seed, mod_idx, zlib.crc32(record.id.encode("utf-8"))])
        u_drop, u_conf, u_dis, u_dconf = rng.random(4)
        word_idx = int(rng.integers(len(DISTRACTORS)))
        candidates = []
        if u_drop >= self.drop_prob:
            factor_id = getattr(record.factors, f"{self.modality.value}_id")
            candidates.append((CATALOGS[self.modality.value][factor_id], 0.6 + 0.4 * float(u_conf)))
        if u_dis < self.distractor_prob:
            candidates.append((DISTRACTORS[word_idx], 0.3 + 0.4 * float(u_dconf)))
        return ExpertOutput(self.modality, candidates)


def synthetic_expert(modality, drop_prob: float, distractor_prob: float, seed: int) -> SyntheticExpert:
    return SyntheticExpert(modality, drop_prob, distractor_prob, seed)


def default_experts(drop_prob: float = 0.0, distractor_prob: float = 0.0, seed: int = 0) -> list[SyntheticExpert]:
    return [SyntheticExpert(m, drop_prob, distractor_prob, seed) for m in MODALITY_ORDER]
