import struct

import numpy as np
import pytest

from tablevtr.numerics import ContainerError, load_params, save_params
from tablevtr.numerics.container import MAGIC


def test_round_trip_keeps_shapes_and_values(tmp_path):
    rng = np.random.default_rng(0)
    params = {"b.w": rng.normal(size=(3, 4)), "a.scalar": np.array(0.5), "c.v": rng.normal(size=7)}
    path = tmp_path / "p.bin"
    save_params(path, params, {"note": "x", "n": [1, 2]})
    back, meta = load_params(path)
    assert meta == {"note": "x", "n": [1, 2]}
    assert set(back) == set(params)
    for k, v in params.items():
        assert back[k].shape == np.shape(v)
        np.testing.assert_array_equal(back[k], np.asarray(v, dtype=np.float32))


def test_layout(tmp_path):
    path = tmp_path / "p.bin"
    save_params(path, {"x": np.array([1.0, 2.0])})
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    (hlen,) = struct.unpack("<Q", raw[8:16])
    assert len(raw) == 16 + hlen + 8
    assert np.frombuffer(raw[16 + hlen :], dtype="<f4").tolist() == [1.0, 2.0]


def test_same_input_same_bytes(tmp_path):
    params = {"z": np.arange(6.0).reshape(2, 3), "a": np.ones(2)}
    save_params(tmp_path / "1.bin", params, {"k": 1})
    save_params(tmp_path / "2.bin", dict(reversed(list(params.items()))), {"k": 1})
    assert (tmp_path / "1.bin").read_bytes() == (tmp_path / "2.bin").read_bytes()


def test_rejects_bad_magic_and_truncation(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"NOTMAGIC" + b"\0" * 8)
    with pytest.raises(ContainerError):
        load_params(bad)
    good = tmp_path / "good.bin"
    save_params(good, {"x": np.ones(10)})
    short = tmp_path / "short.bin"
    short.write_bytes(good.read_bytes()[:-4])
    with pytest.raises(ContainerError):
        load_params(short)
