import numpy as np
import pytest

from nightforge.errors import CheckpointError, DimensionError
from nightforge.restorer import (
    LinearPatchRestorer,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from nightforge.rng import RngStream

from conftest import make_clear_image


def conv_oracle(img, weights, radius):
    """Scalar neighborhood loop with edge-replicated borders."""
    h, w, c = img.shape
    k = 2 * radius + 1
    out = np.empty((h, w, c))
    per = k * k + 1
    for ch in range(c):
        kern = weights[ch * per : ch * per + k * k].reshape(k, k)
        bias = weights[ch * per + k * k]
        for y in range(h):
            for x in range(w):
                acc = bias
                for dy in range(-radius, radius + 1):
                    for dx in range(-radius, radius + 1):
                        yy = min(max(y + dy, 0), h - 1)
                        xx = min(max(x + dx, 0), w - 1)
                        acc += kern[dy + radius, dx + radius] * img[yy, xx, ch]
                out[y, x, ch] = acc
    return out


def test_identity_weights_identity_output():
    model = LinearPatchRestorer(radius=2, channels=3)
    img = make_clear_image((1, 1), h=10, w=12)
    assert np.array_equal(model.predict(img), img)


def test_zero_weights_zero_output():
    model = LinearPatchRestorer(radius=1, channels=3, weights=np.zeros(3 * 10))
    img = make_clear_image((1, 2), h=6, w=6)
    assert np.all(model.predict(img) == 0.0)


def test_forward_matches_scalar_oracle():
    rng = RngStream(88)
    model = LinearPatchRestorer(radius=2, channels=3)
    weights = rng.uniform(-0.3, 0.3, size=model.num_weights)
    model.set_weights(weights)
    img = rng.random(size=(8, 8, 3))
    lin = model.linear_forward(img)
    oracle = conv_oracle(img, weights, 2)
    assert np.max(np.abs(lin - oracle)) < 1e-12
    assert np.max(np.abs(model.predict(img) - np.clip(oracle, 0.0, 1.0))) < 1e-12


def test_channel_mismatch_raises():
    model = LinearPatchRestorer(radius=1, channels=3)
    with pytest.raises(DimensionError):
        model.predict(np.zeros((4, 4, 1)))


def test_weights_roundtrip_bitexact():
    model = LinearPatchRestorer(radius=2, channels=3)
    w = RngStream(5).normal(size=model.num_weights)
    model.set_weights(w)
    assert np.array_equal(model.get_weights(), w)


def test_wrong_weight_count_raises():
    model = LinearPatchRestorer(radius=1, channels=1)
    with pytest.raises(DimensionError):
        model.set_weights(np.zeros(7))


def test_clone_is_independent():
    model = LinearPatchRestorer(radius=1, channels=1)
    twin = model.clone()
    twin.set_weights(np.arange(10, dtype=np.float64))
    assert not np.array_equal(model.get_weights(), twin.get_weights())


# -------------------------------------------------------------- checkpoints


def test_checkpoint_roundtrip(tmp_path):
    model = LinearPatchRestorer(radius=2, channels=3)
    model.set_weights(RngStream(6).normal(size=model.num_weights))
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    desc, weights = load_checkpoint(path)
    assert desc == "linear-patch;radius=2;channels=3"
    assert np.array_equal(weights, model.get_weights())
    again = model_from_checkpoint(path)
    assert np.array_equal(again.get_weights(), model.get_weights())
    assert again.radius == 2 and again.channels == 3


def test_checkpoint_bad_magic(tmp_path):
    p = tmp_path / "bad.ckpt"
    p.write_bytes(b"NOTMAGIC" + bytes(64))
    with pytest.raises(CheckpointError):
        load_checkpoint(p)


def test_checkpoint_truncated(tmp_path):
    model = LinearPatchRestorer(radius=1, channels=1)
    p = tmp_path / "t.ckpt"
    save_checkpoint(model, p)
    p.write_bytes(p.read_bytes()[:-9])
    with pytest.raises(CheckpointError):
        load_checkpoint(p)


def test_checkpoint_unknown_architecture(tmp_path):
    import struct

    p = tmp_path / "u.ckpt"
    desc = b"transformer;layers=96"
    p.write_bytes(b"NFCKPT10" + struct.pack("<I", len(desc)) + desc + struct.pack("<Q", 0))
    with pytest.raises(CheckpointError):
        model_from_checkpoint(p)
