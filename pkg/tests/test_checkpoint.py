import warnings

import numpy as np
import pytest

from trajcnn import checkpoint
from trajcnn.baselines import LstmConfig, build_lstm
from trajcnn.checkpoint import CheckpointError, from_bytes, to_bytes
from trajcnn.model import ModelConfig, build


def _configs():
    for seed in range(10):
        yield ModelConfig(num_layers=1 + seed % 5, embed_dim=4 + seed, seed=seed,
                          decode_mode="sequential" if seed % 3 == 0 else "multi",
                          input_mode="absolute" if seed % 4 == 1 else "offsets")


@pytest.mark.parametrize("cfg", list(_configs()))
def test_round_trip_bit_identical(tmp_path, rng, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = build(cfg)
    path = tmp_path / "m.ckpt"
    checkpoint.save(m, path)
    back = checkpoint.load(path)
    assert back.kind == "cnn" and back.config == cfg
    assert list(back.params) == list(m.params)
    obs = rng.normal(size=(4, cfg.obs_len, 2))
    np.testing.assert_array_equal(back.predict(obs), m.predict(obs))
    assert to_bytes(back) == path.read_bytes()


def test_lstm_round_trip(rng):
    m = build_lstm(LstmConfig(hidden_dim=8, embed_dim=6, seed=2))
    back = from_bytes(to_bytes(m))
    assert back.kind == "lstm" and back.config == m.config
    obs = rng.normal(size=(3, 8, 2))
    np.testing.assert_array_equal(back.predict(obs), m.predict(obs))


def test_header_layout():
    buf = to_bytes(build(ModelConfig(embed_dim=2)))
    assert buf[:4] == b"TCNN" and buf[4] == 1
    n = int.from_bytes(buf[5:9], "little")
    assert buf[9:9 + n].startswith(b'{"config"')


def test_bad_magic():
    buf = to_bytes(build(ModelConfig()))
    with pytest.raises(CheckpointError, match="bad magic"):
        from_bytes(b"XXXX" + buf[4:])
    with pytest.raises(CheckpointError, match="bad magic"):
        from_bytes(b"TC")


def test_bad_version():
    buf = bytearray(to_bytes(build(ModelConfig())))
    buf[4] = 2
    with pytest.raises(CheckpointError, match="version 2"):
        from_bytes(bytes(buf))


def test_truncated_and_trailing():
    buf = to_bytes(build(ModelConfig()))
    with pytest.raises(CheckpointError, match="missing bytes"):
        from_bytes(buf[:-4])
    with pytest.raises(CheckpointError, match="trailing"):
        from_bytes(buf + b"\0")
    with pytest.raises(CheckpointError, match="manifest"):
        from_bytes(buf[:20])


def test_corrupt_manifest():
    buf = bytearray(to_bytes(build(ModelConfig())))
    buf[9] = ord("[")
    with pytest.raises(CheckpointError, match="corrupt"):
        from_bytes(bytes(buf))


def test_same_seed_same_bytes():
    assert to_bytes(build(ModelConfig(seed=7))) == to_bytes(build(ModelConfig(seed=7)))
