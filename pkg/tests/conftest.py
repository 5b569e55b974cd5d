import numpy as np
import pytest

from tablevtr import numerics as F
from tablevtr.datagen import build_vocabulary, generate_corpus
from tablevtr.model import ModelConfig, TableModel


@pytest.fixture(scope="session")
def vocab():
    return build_vocabulary()


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(16, seed=3)


def tiny_config(vocab_size: int, **kw) -> ModelConfig:
    base = dict(dim=16, text_layers=1, vis_layers=1, cross_layers=1, heads=2, max_tag_len=16, max_cap_len=16)
    base.update(kw)
    return ModelConfig(vocab_size=vocab_size, **base)


@pytest.fixture
def f64():
    with F.precision(np.float64):
        yield


@pytest.fixture
def tiny_model(vocab, f64):
    return TableModel(tiny_config(len(vocab)))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def report_criterion(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
