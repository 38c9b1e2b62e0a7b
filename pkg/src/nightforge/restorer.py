"""Pluggable restorer models and their checkpoint format.

A restorer maps a degraded image to a restored one and exposes its
parameters as one flat float64 vector, which is what the trainer, the EMA
teacher update, and the checkpoint format operate on. Heavyweight learned
backbones live behind this interface as external plugins; the built-in
LinearPatchRestorer is a small analytically differentiable model that
exercises every training and refinement path exactly.
"""

from __future__ import annotations

import abc
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError, DimensionError
from .validation import check_image, check_same_shape

_MAGIC = b"NFCKPT10"  # 8 bytes, trailing digit is the format version


class RestorerModel(abc.ABC):
    """Interface every restorer must satisfy."""

    architecture: str

    @abc.abstractmethod
    def get_weights(self) -> np.ndarray:
        """Flat float64 parameter vector (a copy)."""

    @abc.abstractmethod
    def set_weights(self, weights: np.ndarray) -> None:
        """Install a flat parameter vector; round-trips bit-exactly."""

    @abc.abstractmethod
    def predict(self, image: np.ndarray) -> np.ndarray:
        """Restored image, same shape as the input, clamped to [0, 1]."""

    def clone(self) -> "RestorerModel":
        out = self.blank_like()
        out.set_weights(self.get_weights())
        return out

    @abc.abstractmethod
    def blank_like(self) -> "RestorerModel":
        """New instance with the same architecture, default weights."""


class LinearPatchRestorer(RestorerModel):
    """Per-channel affine model over the (2r+1)^2 neighborhood of a pixel.

    Each output pixel is a learned affine combination of its own channel's
    square neighborhood (edge-replicated at borders), so loss gradients are
    exact. Default weights are the identity kernel.
    """

    def __init__(self, radius: int = 2, channels: int = 3, weights=None):
        if radius < 0:
            raise ValueError("radius must be >= 0")
        if channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        self.radius = radius
        self.channels = channels
        k = 2 * radius + 1
        self._k = k
        self._per_channel = k * k + 1
        if weights is None:
            w = np.zeros((channels, self._per_channel))
            w[:, (k * k) // 2] = 1.0  # center tap
            self._w = w
        else:
            self._w = np.zeros((channels, self._per_channel))
            self.set_weights(weights)

    @property
    def architecture(self) -> str:
        return f"linear-patch;radius={self.radius};channels={self.channels}"

    @property
    def num_weights(self) -> int:
        return self.channels * self._per_channel

    def blank_like(self) -> "LinearPatchRestorer":
        return LinearPatchRestorer(self.radius, self.channels)

    def get_weights(self) -> np.ndarray:
        return self._w.reshape(-1).copy()

    def set_weights(self, weights) -> None:
        vec = np.asarray(weights, dtype=np.float64).reshape(-1)
        if vec.size != self.num_weights:
            raise DimensionError(
                f"expected {self.num_weights} weights, got {vec.size}"
            )
        self._w = vec.reshape(self.channels, self._per_channel).copy()

    def _windows(self, arr: np.ndarray) -> np.ndarray:
        r = self.radius
        padded = np.pad(arr, ((r, r), (r, r), (0, 0)), mode="edge")
        win = np.lib.stride_tricks.sliding_window_view(padded, (self._k, self._k), axis=(0, 1))
        return win  # (H, W, C, k, k)

    def linear_forward(self, image: np.ndarray) -> np.ndarray:
        """Affine response before any clamping (the training-space output)."""
        arr = check_image(image)
        if arr.shape[2] != self.channels:
            raise DimensionError(
                f"model expects {self.channels} channels, got {arr.shape[2]}"
            )
        kern = self._w[:, : self._k * self._k].reshape(self.channels, self._k, self._k)
        bias = self._w[:, -1]
        win = self._windows(arr)
        return np.einsum("hwcij,cij->hwc", win, kern) + bias

    def predict(self, image: np.ndarray) -> np.ndarray:
        return np.clip(self.linear_forward(image), 0.0, 1.0)

    def loss_gradient(
        self,
        image: np.ndarray,
        target: np.ndarray,
        kind: str = "mse",
        mask: np.ndarray | None = None,
    ) -> tuple[float, np.ndarray]:
        """Loss and its exact gradient w.r.t. the flat weight vector.

        The loss is evaluated on the affine (unclamped) output, which keeps
        the model linear in its weights and the gradient exact. An optional
        {0,1} mask zeroes masked-out pixels' residuals; masked pixels still
        count in the denominator.
        """
        arr = check_image(image)
        tgt = check_image(target)
        check_same_shape(arr, tgt, "input and target")
        pred = self.linear_forward(arr)
        resid = pred - tgt
        n = resid.size
        if mask is not None:
            m = np.asarray(mask, dtype=np.float64)
            check_same_shape(m, resid, "mask and residual")
        else:
            m = None
        if kind == "mse":
            if m is None:
                loss = float(np.mean(resid * resid))
                dpred = 2.0 * resid / n
            else:
                loss = float(np.mean(resid * resid * m))
                dpred = 2.0 * resid * m / n
        elif kind == "l1":
            if m is None:
                loss = float(np.mean(np.abs(resid)))
                dpred = np.sign(resid) / n
            else:
                loss = float(np.mean(np.abs(resid) * m))
                dpred = np.sign(resid) * m / n
        else:
            raise ValueError(f"unknown loss kind {kind!r}")
        win = self._windows(arr)
        grad_k = np.einsum("hwcij,hwc->cij", win, dpred)
        grad_b = dpred.sum(axis=(0, 1))
        grad = np.concatenate(
            [
                np.concatenate(
                    [grad_k[c].reshape(-1), [grad_b[c]]]
                )
                for c in range(self.channels)
            ]
        )
        return loss, grad


def save_checkpoint(model: RestorerModel, path) -> None:
    """Binary checkpoint: magic, architecture descriptor, weight vector.

    Layout: 8-byte magic, u32 LE descriptor length, descriptor (utf-8),
    u64 LE parameter count, parameters as little-endian float64.
    """
    desc = model.architecture.encode("utf-8")
    weights = model.get_weights()
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(desc)))
        fh.write(desc)
        fh.write(struct.pack("<Q", weights.size))
        fh.write(weights.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[str, np.ndarray]:
    """Read (architecture descriptor, weight vector) from a checkpoint."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12 or data[:8] != _MAGIC:
        raise CheckpointError(f"{path}: not a restorer checkpoint")
    (dlen,) = struct.unpack_from("<I", data, 8)
    if len(data) < 12 + dlen + 8:
        raise CheckpointError(f"{path}: truncated checkpoint header")
    desc = data[12 : 12 + dlen].decode("utf-8")
    (count,) = struct.unpack_from("<Q", data, 12 + dlen)
    body = data[12 + dlen + 8 :]
    if len(body) != count * 8:
        raise CheckpointError(
            f"{path}: expected {count} parameters, found {len(body) // 8}"
        )
    weights = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return desc, weights


def model_from_checkpoint(path) -> RestorerModel:
    """Instantiate the model a checkpoint describes and load its weights."""
    desc, weights = load_checkpoint(path)
    parts = desc.split(";")
    if parts[0] != "linear-patch":
        raise CheckpointError(f"unknown architecture {desc!r}")
    try:
        kv = dict(p.split("=", 1) for p in parts[1:])
        model = LinearPatchRestorer(radius=int(kv["radius"]), channels=int(kv["channels"]))
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"malformed architecture descriptor {desc!r}") from exc
    if weights.size != model.num_weights:
        raise CheckpointError(
            f"checkpoint has {weights.size} weights, architecture needs {model.num_weights}"
        )
    model.set_weights(weights)
    return model
