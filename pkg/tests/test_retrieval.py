import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tablevtr.datagen import generate_corpus
from tablevtr.model import ModelConfig, TableModel
from tablevtr.retrieval import (
    VocabularyMismatch,
    check_vocabulary,
    compute_metrics,
    dsl_revise,
    evaluate,
    evaluate_model,
    load_checkpoint,
    ranks_of_truth,
    reports_json,
    save_checkpoint,
)
from tablevtr.tagging import TagBundle

from . import oracles

# truth is the diagonal; row i puts it at rank i + 1
HAND_4 = np.array(
    [
        [0.9, 0.1, 0.2, 0.3],
        [0.8, 0.7, 0.1, 0.0],
        [0.9, 0.8, 0.5, 0.1],
        [0.9, 0.8, 0.7, 0.6],
    ]
)


def test_identity_matrix_is_perfect():
    r = compute_metrics(np.eye(4), np.arange(4))
    assert (r.r1, r.r5, r.r10, r.mdr, r.mnr) == (100.0, 100.0, 100.0, 1.0, 1.0)


def test_hand_ranked_4x4():
    assert ranks_of_truth(HAND_4, np.arange(4)).tolist() == [1, 2, 3, 4]
    r = compute_metrics(HAND_4, np.arange(4))
    assert (r.r1, r.r5, r.r10, r.mdr, r.mnr) == (25.0, 100.0, 100.0, 2.5, 2.5)


def test_hand_ranked_5x5_with_ties():
    s = np.array(
        [
            [0.5, 0.5, 0.5, 0.5, 0.5],  # all tied, truth at index 2 -> rank 3
            [0.0, 0.9, 0.1, 0.1, 0.1],  # rank 1
            [0.3, 0.3, 0.3, 0.3, 0.3],  # truth index 0 -> rank 1
            [0.9, 0.8, 0.7, 0.6, 0.5],  # truth index 4 -> rank 5
            [0.2, 0.4, 0.4, 0.1, 0.0],  # truth index 2 ties index 1 -> rank 2
        ]
    )
    truth = np.array([2, 1, 0, 4, 2])
    assert ranks_of_truth(s, truth).tolist() == [3, 1, 1, 5, 2]
    r = compute_metrics(s, truth)
    assert r.r1 == 40.0 and r.r5 == 100.0 and r.mdr == 2.0 and r.mnr == pytest.approx(12 / 5)


def test_truth_validation():
    with pytest.raises(IndexError):
        compute_metrics(np.eye(3), [0, 1, 3])
    with pytest.raises(ValueError):
        compute_metrics(np.eye(3), [0, 1])


@settings(max_examples=60)
@given(
    hnp.arrays(np.float64, (6, 6), elements=st.integers(-3, 3).map(float)),
    st.permutations(range(6)),
)
def test_report_invariant_to_candidate_permutation(s, perm):
    truth = np.arange(6)
    perm = np.asarray(perm)
    inv = np.argsort(perm)
    # ties are broken by index, which a permutation changes; jitter removes them first
    s = s + 1e-3 * np.random.default_rng(0).random((6, 6))
    a = compute_metrics(s, truth)
    b = compute_metrics(s[:, perm], inv[truth])
    assert a == b


@settings(max_examples=60)
@given(hnp.arrays(np.float64, (5, 7), elements=st.floats(-1, 1)), st.lists(st.integers(0, 6), min_size=5, max_size=5))
def test_recall_is_monotone(s, truth):
    r = compute_metrics(s, truth)
    assert 0 <= r.r1 <= r.r5 <= r.r10 <= 100
    assert r.mdr >= 1 and r.mnr >= 1


def test_ranks_match_loop():
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = rng.integers(-2, 3, size=(7, 7)).astype(float)
        truth = rng.integers(7, size=7)
        assert ranks_of_truth(s, truth).tolist() == oracles.ranks(s.tolist(), truth.tolist())


# -- dual softmax ----------------------------------------------------------------------
def test_dsl_single_query_is_noop():
    s = np.array([[0.3, -0.2, 0.9]])
    np.testing.assert_array_equal(dsl_revise(s), s)


def test_dsl_constant_matrix():
    s = np.full((4, 3), 0.25)
    np.testing.assert_allclose(dsl_revise(s, 7.0), s / 4)


def test_dsl_hand_matrix_matches_loop():
    s = [[0.9, 0.1, -0.3], [0.2, 0.8, 0.4], [0.5, 0.5, 0.1]]
    np.testing.assert_allclose(dsl_revise(np.array(s), 100.0), oracles.dsl(s, 100.0), atol=1e-10, rtol=0)
    # spell out one entry by hand
    z = sum(math.exp(100 * s[k][0]) for k in range(3))
    assert dsl_revise(np.array(s), 100.0)[1, 0] == pytest.approx(0.2 * math.exp(20) / z, abs=1e-12)


@settings(max_examples=60)
@given(hnp.arrays(np.float64, (4, 5), elements=st.floats(-1, 1)), st.floats(-5, 5))
def test_dsl_is_finite_and_shift_invariant_prior(s, c):
    out = dsl_revise(s, 30.0)
    assert np.isfinite(out).all()
    # the prior ignores a constant added along the softmax (query) axis
    mask = (np.abs(s) > 1e-3) & (np.abs(s + c) > 1e-3)
    prior = out / np.where(mask, s, 1.0)
    shifted = dsl_revise(s + c, 30.0) / np.where(mask, s + c, 1.0)
    np.testing.assert_allclose(prior[mask], shifted[mask], rtol=1e-9, atol=1e-12)


def test_dsl_rejects_bad_temperature():
    with pytest.raises(ValueError):
        dsl_revise(np.eye(2), 0.0)


def test_dsl_demotes_hub_candidate():
    # candidate 0 is close to every query; the revision should hand query 1 its own match
    s = np.array([[0.90, 0.10], [0.85, 0.80]])
    assert compute_metrics(s, [0, 1]).r1 == 50.0
    assert compute_metrics(dsl_revise(s, 20.0), [0, 1]).r1 == 100.0


# -- evaluation -------------------------------------------------------------------------
def test_untrained_model_is_near_chance(vocab):
    r1 = []
    for seed in range(20):
        model = TableModel(ModelConfig(vocab_size=len(vocab), dim=32, seed=seed))
        r1.append(evaluate_model(model, generate_corpus(64, seed=100 + seed), vocab)[0].r1)
    p = 1 / 64
    sigma = 100 * math.sqrt(p * (1 - p) / 64 / 20)
    assert abs(np.mean(r1) - 100 * p) < 3 * sigma


def test_checkpoint_round_trip(tmp_path, vocab):
    model = TableModel(ModelConfig(vocab_size=len(vocab), dim=32, seed=1))
    recs = generate_corpus(20, seed=2)
    save_checkpoint(tmp_path / "m.bin", model, vocab)
    loaded, v2 = load_checkpoint(tmp_path / "m.bin")
    assert v2 == vocab and loaded.cfg == model.cfg
    assert evaluate_model(model, recs, vocab) == evaluate(tmp_path / "m.bin", recs)


def test_dsl_flag_noop_for_one_record(tmp_path, vocab):
    model = TableModel(ModelConfig(vocab_size=len(vocab), dim=32))
    save_checkpoint(tmp_path / "m.bin", model, vocab)
    recs = generate_corpus(1, seed=5)
    assert evaluate(tmp_path / "m.bin", recs, dsl=False) == evaluate(tmp_path / "m.bin", recs, dsl=True)


def test_vocabulary_mismatch(vocab):
    rec = generate_corpus(1, seed=5)[0]
    rec.tags = TagBundle(object=["zeppelin"])
    with pytest.raises(VocabularyMismatch):
        check_vocabulary(vocab, [rec])


def test_reports_json_shape(vocab):
    model = TableModel(ModelConfig(vocab_size=len(vocab), dim=32))
    text = reports_json(evaluate_model(model, generate_corpus(5, seed=1), vocab))
    assert '"T2V"' in text and '"V2T"' in text and '"mdr"' in text
