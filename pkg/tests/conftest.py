"""Shared fixtures: procedural test images and reference oracles."""

from __future__ import annotations

import numpy as np
import pytest

from nightforge.rng import RngStream


def make_clear_image(key, h=64, w=64, c=3, waves=4, cycles=(1.5, 6.0), curve=None):
    """Procedural mid-frequency clear image in [0, 1].

    A per-channel sum of cosine waves, jointly min-max normalized. `curve`
    optionally stretches contrast around 0.5 (clipping at the ends), which
    yields photo-like high-contrast fixtures.
    """
    rng = RngStream(*key)
    yy = np.arange(h)[:, None] / h
    xx = np.arange(w)[None, :] / w
    chans = []
    for _ in range(c):
        fld = np.zeros((h, w))
        for _ in range(waves):
            fy = rng.uniform(*cycles)
            fx = rng.uniform(*cycles)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.uniform(0.4, 1.0)
            fld += amp * np.cos(2.0 * np.pi * (fy * yy + fx * xx) + phase)
        chans.append(fld)
    stack = np.stack(chans, axis=-1)
    stack = (stack - stack.min()) / (stack.max() - stack.min())
    if curve is not None:
        stack = np.clip(0.5 + curve * (stack - 0.5), 0.0, 1.0)
    return stack


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB for unit-interval images."""
    mse = float(np.mean((np.asarray(a) - np.asarray(b)) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


@pytest.fixture(scope="session")
def clear_corpus():
    """High-contrast clear fixtures used by the contrast-direction checks."""
    return [make_clear_image((555, i), curve=1.4, waves=2) for i in range(12)]


@pytest.fixture()
def small_image():
    return make_clear_image((42, 0), h=16, w=16)
