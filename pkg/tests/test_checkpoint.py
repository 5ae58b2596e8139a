import struct

import numpy as np
import pytest

from biflow import nn
from biflow.checkpoint import CHECKPOINT_MAGIC, load_checkpoint, save_checkpoint
from biflow.errors import FormatError
from biflow.fields import init_model


def make_model(seed=0):
    return init_model("biflow", 4, hidden_dims=(6, 5), n_frequencies=2, seed=seed)


def test_round_trip_bit_identical_forward(tmp_path):
    model = make_model()
    state = nn.adam_init(model.params.size)
    state.m += 0.25
    state.step = 7
    meta = {"dataset_id": "orbit", "loss_kind": "biflow", "config_hash": "abc123"}
    path = tmp_path / "ck.bfck"
    save_checkpoint(path, model, state, meta)
    loaded, lstate, lmeta = load_checkpoint(path)

    x = np.random.default_rng(1).standard_normal(model.net.input_dim)
    before = nn.forward(model.net, model.params, x)
    after = nn.forward(loaded.net, loaded.params, x)
    assert before.tobytes() == after.tobytes()
    assert loaded.kind == "biflow" and loaded.frame_dim == 4
    assert lstate.step == 7
    np.testing.assert_array_equal(lstate.m, state.m)
    np.testing.assert_array_equal(lstate.v, state.v)
    assert lmeta == meta


def test_round_trip_without_optimizer_state(tmp_path):
    model = make_model(3)
    path = tmp_path / "ck.bfck"
    save_checkpoint(path, model)
    loaded, state, meta = load_checkpoint(path)
    assert state is None
    assert meta == {}
    np.testing.assert_array_equal(loaded.params, model.params)


def test_param_count_preserved(tmp_path):
    model = make_model(5)
    path = tmp_path / "ck.bfck"
    save_checkpoint(path, model)
    loaded, _, _ = load_checkpoint(path)
    assert loaded.params.size == nn.param_count(loaded.net) == model.params.size


def test_single_byte_corruption_detected(tmp_path):
    model = make_model()
    path = tmp_path / "ck.bfck"
    save_checkpoint(path, model, nn.adam_init(model.params.size))
    blob = bytearray(path.read_bytes())
    # flip one payload byte somewhere in the middle
    blob[len(blob) // 2] ^= 0x40
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError) as err:
        load_checkpoint(path)
    assert "checksum" in str(err.value)


def test_future_version_rejected(tmp_path):
    model = make_model()
    path = tmp_path / "ck.bfck"
    save_checkpoint(path, model)
    blob = bytearray(path.read_bytes())
    blob[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError) as err:
        load_checkpoint(path)
    assert "version" in str(err.value)


def test_bad_magic_and_truncation(tmp_path):
    path = tmp_path / "ck.bfck"
    path.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNKJUNK")
    with pytest.raises(FormatError):
        load_checkpoint(path)

    model = make_model()
    save_checkpoint(path, model)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(FormatError):
        load_checkpoint(path)
    assert blob[:4] == CHECKPOINT_MAGIC
