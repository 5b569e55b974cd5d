import json

import pytest

from tablevtr.cli import main
from tablevtr.datagen import read_jsonl

TINY = {"epochs": 1, "batch_size": 16, "model": {"dim": 16, "text_layers": 1, "vis_layers": 1, "cross_layers": 1, "heads": 2}}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen-data", "--num", "40", "--seed", "3", "--out", str(d / "data.jsonl")]) == 0
    (d / "cfg.json").write_text(json.dumps(TINY))
    args = ["train", "--config", str(d / "cfg.json"), "--data", str(d / "data.jsonl"), "--out", str(d / "run")]
    assert main(args + ["--seed", "3"]) == 0
    return d


def test_gen_data(workdir):
    recs = read_jsonl(workdir / "data.jsonl")
    assert len(recs) == 40 and recs[0].frames.shape[0] == 4


def test_train_outputs(workdir):
    run = workdir / "run"
    assert {p.name for p in run.iterdir()} == {"checkpoint.bin", "metrics.csv", "config.json"}
    assert json.loads((run / "config.json").read_text())["seed"] == 3
    assert (run / "metrics.csv").read_text().splitlines()[0].startswith("epoch")


@pytest.mark.parametrize("dsl", [False, True])
def test_eval(workdir, capsys, dsl):
    out = workdir / f"report_{dsl}.json"
    args = ["eval", "--checkpoint", str(workdir / "run/checkpoint.bin"), "--data", str(workdir / "data.jsonl"), "--seed", "3"]
    assert main(args + (["--dsl"] if dsl else []) + ["--json", str(out)]) == 0
    text = capsys.readouterr().out
    assert f"dsl={'on' if dsl else 'off'}" in text and "T2V" in text
    report = json.loads(out.read_text())
    assert set(report) == {"T2V", "V2T"} and 0 <= report["T2V"]["r1"] <= 100


def test_rollout(workdir, capsys):
    rid = read_jsonl(workdir / "data.jsonl")[0].id
    out = workdir / "r.svg"
    base = ["rollout", "--checkpoint", str(workdir / "run/checkpoint.bin"), "--data", str(workdir / "data.jsonl")]
    assert main(base + ["--record-id", rid, "--out", str(out)]) == 0
    assert out.read_text().startswith("<svg")
    assert main(base + ["--record-id", "nope", "--out", str(workdir / "x.svg")]) == 2
    assert "no record" in capsys.readouterr().err


def test_bad_arguments():
    with pytest.raises(SystemExit):
        main(["train"])
