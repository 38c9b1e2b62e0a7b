"""Self-prior learning: train a restorer to invert synthetic degradations.

Each step draws random crops from a set of clear images, degrades them on
the fly, and updates the restorer to reconstruct the clear crop. No labels
are needed; the degradation pipeline is the supervision.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .degrade import AugmentConfig, augment
from .errors import DataError, TrainingError
from .image import list_images, load_image, minmax_normalize
from .optim import AdamState, adam_step
from .restorer import RestorerModel
from .rng import RngStream
from .validation import check_image


@dataclass
class TrainConfig:
    steps: int = 1000
    batch_size: int = 8
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    opt_eps: float = 1e-8
    loss: str = "mse"
    crop_size: int = 64
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.loss not in ("mse", "l1"):
            raise ValueError(f"loss must be 'mse' or 'l1', got {self.loss!r}")
        if self.crop_size < 1:
            raise ValueError("crop_size must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**d).validate()


# Published full-scale recipe, recorded as a preset; tests never run it.
REFERENCE_PRIOR = TrainConfig(
    steps=20_000,
    batch_size=128,
    learning_rate=1.5e-4,
    loss="mse",
    crop_size=224,
)


def reconstruction_loss(pred, target, kind: str = "mse") -> float:
    """Mean squared (or absolute) difference over all elements."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    diff = p - t
    if kind == "mse":
        return float(np.mean(diff * diff))
    if kind == "l1":
        return float(np.mean(np.abs(diff)))
    raise ValueError(f"unknown loss kind {kind!r}")


def load_clear_set(source) -> list[np.ndarray]:
    """Clear images from a directory path, or a validated list of arrays."""
    if isinstance(source, (str, Path)):
        files = list_images(source)
        if not files:
            raise DataError(f"no images found in {source}")
        return [load_image(p) for p in files]
    images = [check_image(img) for img in source]
    if not images:
        raise DataError("empty clear set")
    return images


def random_crop(img: np.ndarray, size: int, rng: RngStream) -> np.ndarray:
    """Uniform random square crop; the whole image when it is too small."""
    h, w, _ = img.shape
    ch, cw = min(size, h), min(size, w)
    y = int(rng.integers(0, h - ch))
    x = int(rng.integers(0, w - cw))
    return img[y : y + ch, x : x + cw]


def train_prior(
    clear_set,
    aug_cfg: AugmentConfig,
    cfg: TrainConfig,
    model: RestorerModel,
) -> tuple[RestorerModel, list[float]]:
    """Run the self-prior loop; returns the model and the per-step loss trace.

    Fully deterministic given cfg.seed. Aborts with the trace attached if
    the loss ever goes non-finite.
    """
    cfg.validate()
    aug_cfg.validate()
    images = load_clear_set(clear_set)
    rng = RngStream(cfg.seed)
    opt = AdamState.for_size(model.get_weights().size)
    trace: list[float] = []
    for _ in range(cfg.steps):
        loss_sum = 0.0
        grad_sum = np.zeros(model.get_weights().size)
        for _ in range(cfg.batch_size):
            img = images[rng.integers(0, len(images) - 1)]
            clear = minmax_normalize(random_crop(img, cfg.crop_size, rng))
            degraded, _ = augment(clear, aug_cfg, rng)
            loss, grad = model.loss_gradient(degraded, clear, cfg.loss)
            loss_sum += loss
            grad_sum += grad
        step_loss = loss_sum / cfg.batch_size
        if not np.isfinite(step_loss):
            raise TrainingError("non-finite training loss", trace=trace)
        weights, opt = adam_step(
            model.get_weights(),
            grad_sum / cfg.batch_size,
            opt,
            cfg.learning_rate,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            eps=cfg.opt_eps,
        )
        model.set_weights(weights)
        trace.append(step_loss)
    return model, trace


def write_loss_trace(path, trace) -> None:
    """Persist a loss trace as a (step, loss) CSV."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for i, loss in enumerate(trace):
            writer.writerow([i, repr(float(loss))])
