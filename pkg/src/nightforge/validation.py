"""Input validation helpers, in the spirit of sklearn's check_array."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError


def check_image(img, name: str = "image") -> np.ndarray:
    """Validate and canonicalize an image to float64 (H, W, C), C in {1, 3}.

    2-D input is treated as single-channel. Values must be finite and lie
    in [0, 1].
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    h, w, c = arr.shape
    if h < 1 or w < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if c not in (1, 3):
        raise ValueError(f"{name} must have 1 or 3 channels, got {c}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(
            f"{name} intensities must lie in [0, 1], got "
            f"[{arr.min():.6g}, {arr.max():.6g}]"
        )
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "operands") -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{what} must share a shape: {a.shape} vs {b.shape}")


def check_image_list(images, name: str = "images") -> list[np.ndarray]:
    """Validate a batch given as a list/tuple of images."""
    if isinstance(images, np.ndarray) and images.ndim in (2, 3):
        return [check_image(images, name)]
    out = []
    for i, img in enumerate(images):
        out.append(check_image(img, f"{name}[{i}]"))
    if not out:
        raise ValueError(f"{name} is empty")
    return out
