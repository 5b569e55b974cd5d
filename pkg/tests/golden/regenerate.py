"""Rebuild the frozen rollout checkpoint and its golden SVG.

Run only when a deliberate change to the model or the rendering makes the
old golden file obsolete:  python3 tests/golden/regenerate.py
"""

from pathlib import Path

from tablevtr.datagen import generate_corpus
from tablevtr.retrieval import load_checkpoint, save_checkpoint
from tablevtr.rollout import attention_rollout, render_attention, trace_record
from tablevtr.trainer import TrainConfig, train

HERE = Path(__file__).parent
CHECKPOINT = HERE / "rollout_checkpoint.bin"
SVG = HERE / "rollout_video00003.svg"
RECORD_ID = "video00003"
MODEL = dict(dim=16, text_layers=1, vis_layers=1, cross_layers=2, heads=2, max_tag_len=16, max_cap_len=16)


def corpus():
    return generate_corpus(64, seed=7)


def render(checkpoint, out_path) -> str:
    model, vocab = load_checkpoint(checkpoint)
    record = next(r for r in corpus() if r.id == RECORD_ID)
    trace = trace_record(model, record, vocab)
    return render_attention(attention_rollout(trace), trace, out_path, title=RECORD_ID)


if __name__ == "__main__":
    result = train(corpus(), TrainConfig(epochs=1, batch_size=16, seed=7, model=MODEL))
    save_checkpoint(CHECKPOINT, result.model, result.vocab)
    render(CHECKPOINT, SVG)
    print(f"wrote {CHECKPOINT.name} and {SVG.name}")
