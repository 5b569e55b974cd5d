import json
import math

import numpy as np
import pytest

from tablevtr import numerics as F
from tablevtr.datagen import generate_corpus
from tablevtr.model import ModelConfig, TableModel
from tablevtr.numerics import load_params
from tablevtr.trainer import (
    Adam,
    TrainConfig,
    TrainingError,
    adam_step,
    clip_grad_norm,
    iterate_batches,
    lr_schedule,
    steps_per_epoch,
    train,
)

from .conftest import tiny_config


def test_schedule_endpoints():
    assert lr_schedule(0, 100, 1e-3, 0.1) == 0.0
    assert lr_schedule(10, 100, 1e-3, 0.1) == pytest.approx(1e-3)
    assert lr_schedule(5, 100, 1e-3, 0.1) == pytest.approx(5e-4)
    assert abs(lr_schedule(100, 100, 1e-3, 0.1)) < 1e-12
    assert lr_schedule(55, 100, 1e-3, 0.1) == pytest.approx(5e-4)
    with pytest.raises(ValueError):
        lr_schedule(101, 100, 1e-3)


def test_schedule_without_warmup():
    assert lr_schedule(0, 10, 2.0, 0.0) == pytest.approx(2.0)


def _scalar_adam(lr, grad, steps=1, b1=0.9, b2=0.999, eps=1e-8):
    with F.precision(np.float64):
        p = F.parameter(np.array(1.0))
    opt = Adam({"g": [("p", p)]}, b1, b2, eps)
    for _ in range(steps):
        adam_step([p], [np.array(grad)], opt, lr)
    return float(p.data)


def test_adam_first_step_hand_formula():
    g, lr = 0.3, 0.01
    m, v = 0.1 * g, 0.001 * g * g
    m_hat, v_hat = m / 0.1, v / 0.001
    expected = 1.0 - lr * m_hat / (math.sqrt(v_hat) + 1e-8)
    assert _scalar_adam(lr, g) == pytest.approx(expected, abs=1e-15)
    # a bias-corrected first step moves by almost exactly lr against the gradient sign
    assert _scalar_adam(lr, -5.0) == pytest.approx(1.0 + lr, abs=1e-9)


def test_adam_two_steps_hand_formula():
    g, lr, b1, b2 = 0.5, 0.1, 0.9, 0.999
    p, m, v = 1.0, 0.0, 0.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + 1e-8)
    assert _scalar_adam(lr, g, steps=2) == pytest.approx(p, abs=1e-14)


def test_zero_gradient_zero_update():
    assert _scalar_adam(0.1, 0.0) == 1.0


def test_group_learning_rates():
    a = F.parameter(np.ones(3))
    b = F.parameter(np.ones(3))
    opt = Adam({"enc": [("a", a)], "cross": [("b", b)]})
    a.grad, b.grad = np.ones(3), np.ones(3)
    opt.step({"enc": 0.1, "cross": 0.0})
    assert (a.data < 1).all() and (b.data == 1).all()


def test_adam_rejects_shared_parameter_and_bad_grad():
    a = F.parameter(np.ones(2))
    with pytest.raises(ValueError):
        Adam({"x": [("a", a)], "y": [("a2", a)]})
    opt = Adam({"x": [("a", a)]})
    a.grad = np.ones(3)
    with pytest.raises(ValueError):
        opt.step({"x": 0.1})


def test_clip_grad_norm():
    a, b = F.parameter(np.zeros(2)), F.parameter(np.zeros(1))
    a.grad, b.grad = np.array([3.0, 0.0]), np.array([4.0])
    assert clip_grad_norm([a, b], 1.0) == pytest.approx(5.0)
    total = math.sqrt(float((a.grad**2).sum() + (b.grad**2).sum()))
    assert total == pytest.approx(1.0, abs=1e-5)


def test_batching():
    rng = np.random.default_rng(0)
    batches = list(iterate_batches(65, 32, rng))
    assert [len(b) for b in batches] == [32, 32]  # a trailing single item cannot be mined
    assert steps_per_epoch(65, 32) == 2 and steps_per_epoch(66, 32) == 3


def test_param_groups_partition(vocab):
    model = TableModel(tiny_config(len(vocab)))
    groups = model.param_groups()
    names = [n for items in groups.values() for n, _ in items]
    assert sorted(names) == sorted(n for n, _ in model.named_parameters())
    assert len(names) == len(set(names))
    assert all(n.startswith(("text.", "visual.")) for n, _ in groups["encoders"])
    assert {"cross.lam", "temp.w", "proj.phi.weight"} <= {n for n, _ in groups["cross"]}


def test_config_round_trip_and_validation(tmp_path):
    cfg = TrainConfig(epochs=2, loss_weights=[1, 0, 0], model={"dim": 32})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert TrainConfig.from_json(path) == cfg
    with pytest.raises(ValueError):
        TrainConfig.from_dict({"epochs": 1, "learning_rate": 3})
    with pytest.raises(ValueError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValueError):
        TrainConfig(lr_cross=-1.0)


TINY_MODEL = dict(dim=16, text_layers=1, vis_layers=1, cross_layers=1, heads=2, max_tag_len=16, max_cap_len=16)


def _tiny_train_cfg(**kw):
    kw.setdefault("model", TINY_MODEL)
    return TrainConfig(epochs=1, batch_size=16, **kw)


def test_zero_learning_rates_leave_parameters(vocab):
    corpus = generate_corpus(40, seed=2)
    cfg = _tiny_train_cfg(lr_encoders=0.0, lr_cross=0.0)
    model = TableModel(ModelConfig(vocab_size=len(vocab), seed=cfg.seed, **cfg.model))
    before = model.state_dict()
    train(corpus, cfg, model=model)
    after = model.state_dict()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_outputs_and_determinism(tmp_path):
    corpus = generate_corpus(64, seed=3)
    cfg = _tiny_train_cfg()
    r1 = train(corpus, cfg, out_dir=tmp_path / "a")
    train(corpus, cfg, out_dir=tmp_path / "b")
    for name in ("checkpoint.bin", "metrics.csv", "config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "metrics.csv").read_text().splitlines()[0]
    assert header == "epoch,L_con,L_vtm,L_mlm,val_R@1"
    state, meta = load_params(tmp_path / "a" / "checkpoint.bin")
    assert set(state) == set(r1.model.state_dict())
    assert meta["vocab"] == r1.vocab.to_list()


def test_temperature_stays_clamped(vocab):
    cfg = _tiny_train_cfg(model={**TINY_MODEL, "init_scale": 100.0}, lr_cross=0.5)
    res = train(generate_corpus(40, seed=4), cfg)
    assert 1.0 <= res.model.temp.value <= 100.0 + 1e-3


def test_nan_loss_aborts(vocab):
    cfg = _tiny_train_cfg()
    model = TableModel(ModelConfig(vocab_size=len(vocab), seed=cfg.seed, **cfg.model))
    model.temp.w.data[...] = np.nan
    with pytest.raises((TrainingError, FloatingPointError)):
        train(generate_corpus(40, seed=4), cfg, model=model)
