import numpy as np
import pytest

from nightforge.degrade import AugmentConfig
from nightforge.errors import DataError, TrainingError
from nightforge.restorer import LinearPatchRestorer
from nightforge.rng import RngStream
from nightforge.selfprior import (
    REFERENCE_PRIOR,
    TrainConfig,
    load_clear_set,
    random_crop,
    reconstruction_loss,
    train_prior,
    write_loss_trace,
)

from conftest import make_clear_image


# ------------------------------------------------------------------- losses


def test_loss_zero_at_identity():
    img = RngStream(1).random(size=(5, 5, 3))
    assert reconstruction_loss(img, img, "mse") == 0.0
    assert reconstruction_loss(img, img, "l1") == 0.0


def test_loss_unit_difference():
    one = np.ones((1, 1, 1))
    zero = np.zeros((1, 1, 1))
    assert reconstruction_loss(one, zero, "mse") == 1.0
    assert reconstruction_loss(one, zero, "l1") == 1.0


def test_loss_hand_arithmetic():
    pred = np.array([[[0.0], [0.5]]])
    target = np.array([[[0.5], [0.5]]])
    assert reconstruction_loss(pred, target, "mse") == pytest.approx(0.125)
    assert reconstruction_loss(pred, target, "l1") == pytest.approx(0.25)


def test_loss_shape_mismatch():
    with pytest.raises(ValueError):
        reconstruction_loss(np.zeros((2, 2, 1)), np.zeros((2, 3, 1)))


def test_loss_non_negative_random():
    rng = RngStream(2)
    for _ in range(20):
        a = rng.random(size=(4, 4, 3))
        b = rng.random(size=(4, 4, 3))
        assert reconstruction_loss(a, b, "mse") >= 0.0
        assert reconstruction_loss(a, b, "l1") >= 0.0


# ---------------------------------------------------------------- gradients


def fd_gradient(model, img, target, kind, h=1e-5):
    """Central finite differences through the public loss path."""
    base = model.get_weights()
    grad = np.empty_like(base)
    for i in range(base.size):
        wp = base.copy()
        wp[i] += h
        model.set_weights(wp)
        lp, _ = model.loss_gradient(img, target, kind)
        wm = base.copy()
        wm[i] -= h
        model.set_weights(wm)
        lm, _ = model.loss_gradient(img, target, kind)
        grad[i] = (lp - lm) / (2 * h)
    model.set_weights(base)
    return grad


def test_gradient_zero_at_exact_fit():
    model = LinearPatchRestorer(radius=1, channels=1)
    img = RngStream(3).random(size=(5, 5, 1))
    loss, grad = model.loss_gradient(img, img, "mse")
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_bias_gradient_single_pixel():
    # one pixel, zero kernel: d(MSE)/d(bias) = 2 (pred - target) / N
    model = LinearPatchRestorer(radius=0, channels=1, weights=np.array([0.0, 0.3]))
    img = np.full((1, 1, 1), 0.9)
    target = np.full((1, 1, 1), 0.1)
    loss, grad = model.loss_gradient(img, target, "mse")
    assert loss == pytest.approx((0.3 - 0.1) ** 2)
    assert grad[1] == pytest.approx(2 * (0.3 - 0.1))


def test_gradient_matches_finite_differences():
    rng = RngStream(4)
    worst = 0.0
    for trial in range(12):
        radius = 1 if trial % 2 == 0 else 2
        model = LinearPatchRestorer(radius=radius, channels=3)
        model.set_weights(rng.uniform(-0.4, 0.4, size=model.num_weights))
        img = rng.random(size=(6, 6, 3))
        target = rng.random(size=(6, 6, 3))
        kind = "mse" if trial % 3 else "l1"
        _, analytic = model.loss_gradient(img, target, kind)
        numeric = fd_gradient(model, img, target, kind)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    assert worst < 1e-4


def test_masked_gradient_ignores_masked_pixels():
    model = LinearPatchRestorer(radius=1, channels=1)
    rng = RngStream(5)
    model.set_weights(rng.uniform(-0.2, 0.2, size=model.num_weights))
    img = rng.random(size=(4, 4, 1))
    target = rng.random(size=(4, 4, 1))
    zero_mask = np.zeros((4, 4, 1))
    loss, grad = model.loss_gradient(img, target, "l1", mask=zero_mask)
    assert loss == 0.0
    assert np.all(grad == 0.0)


# ------------------------------------------------------------------- loop


def test_zero_steps_leaves_model_unchanged():
    model = LinearPatchRestorer(radius=1, channels=3)
    before = model.get_weights()
    cfg = TrainConfig(steps=0, batch_size=2, crop_size=8, seed=1)
    model, trace = train_prior(
        [make_clear_image((10, 0), h=16, w=16)], AugmentConfig(), cfg, model
    )
    assert trace == []
    assert np.array_equal(model.get_weights(), before)


def test_empty_clear_set_rejected():
    with pytest.raises(DataError):
        load_clear_set([])


def test_training_is_deterministic():
    imgs = [make_clear_image((11, i), h=24, w=24) for i in range(3)]
    cfg = TrainConfig(steps=8, batch_size=2, learning_rate=1e-3, crop_size=16, seed=9)
    traces = []
    finals = []
    for _ in range(2):
        model = LinearPatchRestorer(radius=1, channels=3)
        model, trace = train_prior(imgs, AugmentConfig(), cfg, model)
        traces.append(trace)
        finals.append(model.get_weights())
    assert traces[0] == traces[1]
    assert np.array_equal(finals[0], finals[1])


def test_toy_run_loss_decreases():
    # 500-step toy: mean loss over the last 50 steps beats the first 50
    imgs = [make_clear_image((12, i)) for i in range(8)]
    cfg = TrainConfig(steps=500, batch_size=8, learning_rate=1e-3, crop_size=64, seed=3)
    model = LinearPatchRestorer(radius=2, channels=3)
    model, trace = train_prior(imgs, AugmentConfig(), cfg, model)
    assert np.mean(trace[-50:]) < np.mean(trace[:50])


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_non_finite_loss_aborts_with_trace():
    imgs = [make_clear_image((13, 0), h=16, w=16)]
    cfg = TrainConfig(steps=50, batch_size=1, learning_rate=1e300, crop_size=16, seed=2)
    model = LinearPatchRestorer(radius=1, channels=3)
    with pytest.raises(TrainingError) as err:
        train_prior(imgs, AugmentConfig(), cfg, model)
    assert len(err.value.trace) >= 1


def test_reference_preset_records_published_recipe():
    assert REFERENCE_PRIOR.steps == 20_000
    assert REFERENCE_PRIOR.batch_size == 128
    assert REFERENCE_PRIOR.learning_rate == pytest.approx(1.5e-4)
    assert REFERENCE_PRIOR.crop_size == 224
    assert REFERENCE_PRIOR.loss == "mse"


def test_random_crop_bounds():
    img = make_clear_image((14, 0), h=20, w=30)
    rng = RngStream(6)
    for _ in range(50):
        crop = random_crop(img, 8, rng)
        assert crop.shape == (8, 8, 3)
    whole = random_crop(img, 64, rng)
    assert whole.shape == (20, 30, 3)


def test_loss_trace_csv(tmp_path):
    path = tmp_path / "trace.csv"
    write_loss_trace(path, [0.5, 0.25])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "step,loss"
    assert lines[1] == "0,0.5"
    assert lines[2] == "1,0.25"
