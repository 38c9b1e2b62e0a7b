"""Severe nighttime degradation synthesis.

A clear image J degrades into I by blending it with an atmospheric light
field L under a per-pixel weight map W and adding truncated Gaussian noise:

    I = W * J + (1 - W) * L + eps

Light fields come from a bank of real captures or from a procedural
fallback, and get glow highlights from additive Gaussian bumps. The weight
map is a uniform base value with a few locally adjusted rectangles. Noise
is standard-normal resampled into [0, 3] and scaled so its ceiling tracks
the blended clear-signal ceiling; at the default weights the noise reaches
the same order of magnitude as the surviving clear signal, which is what
makes the augmentation severe.

Every random decision is recorded in an AugRecord so any augmentation can
be replayed bit-exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionError
from .image import list_images, load_image, minmax_normalize
from .rng import RngStream
from .validation import check_image, check_same_shape

PROCEDURAL_SOURCE = "procedural"


@dataclass
class AugmentConfig:
    """Parameters of the degradation model.

    blend_min/blend_max bound the base blending weight; noise_weight scales
    the noise ceiling relative to blend_max. The mild_* values are used for
    non-severe samples: a tenth of the noise weight and half the glow
    amplitude. severity_ratio is the probability that a sample is degraded
    severely.
    """

    blend_min: float = 0.001
    blend_max: float = 0.1
    noise_weight: float = 0.1
    mild_noise_weight: float = 0.01
    glow_count: tuple[int, int] = (2, 10)
    glow_size: tuple[int, int] = (15, 80)
    glow_gain: float = 1.0
    mild_glow_gain: float = 0.5
    blend_regions: int = 8
    blend_region_size: int = 64
    blend_jitter: float = 0.04
    severity_ratio: float = 1.0
    light_bank: str | None = None
    procedural_fallback: bool = True

    def validate(self) -> "AugmentConfig":
        if not (0.0 < self.blend_min < self.blend_max < 1.0):
            raise ValueError(
                f"need 0 < blend_min < blend_max < 1, got "
                f"({self.blend_min}, {self.blend_max})"
            )
        if self.noise_weight < 0 or self.mild_noise_weight < 0:
            raise ValueError("noise weights must be non-negative")
        lo, hi = self.glow_count
        if not (0 <= lo <= hi):
            raise ValueError(f"bad glow_count range {self.glow_count}")
        slo, shi = self.glow_size
        if not (1 <= slo <= shi):
            raise ValueError(f"bad glow_size range {self.glow_size}")
        if self.glow_gain < 0 or self.mild_glow_gain < 0:
            raise ValueError("glow gains must be non-negative")
        if self.blend_regions < 0 or self.blend_region_size < 1:
            raise ValueError("bad blend region settings")
        if self.blend_jitter < 0:
            raise ValueError("blend_jitter must be non-negative")
        if not (0.0 <= self.severity_ratio <= 1.0):
            raise ValueError(f"severity_ratio must be in [0, 1], got {self.severity_ratio}")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["glow_count"] = list(self.glow_count)
        d["glow_size"] = list(self.glow_size)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown augment config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("glow_count", "glow_size"):
            if key in d:
                d[key] = tuple(int(v) for v in d[key])
        return cls(**d).validate()


@dataclass
class LightMap:
    """Atmospheric light field, same shape as the image it will degrade."""

    image: np.ndarray
    source_id: str
    key: tuple[int, int] | None = None  # procedural generator key
    glow: list[tuple[int, int, int, float]] = field(default_factory=list)


@dataclass
class BlendMap:
    """Per-pixel blending weights in (0, 1), one channel, plus provenance."""

    map: np.ndarray
    base_t: float
    regions: list[tuple[int, int, int, float]] = field(default_factory=list)


@dataclass
class NoiseField:
    """Non-negative additive noise and the key that regenerates it."""

    values: np.ndarray
    weight: float
    key: tuple[int, int] | None = None


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with corner alignment; identity when sizes match."""
    h, w, _ = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    ys = _grid(h, out_h)
    xs = _grid(w, out_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = img[y0][:, x0] * (1 - wx) + img[y0][:, x1] * wx
    bot = img[y1][:, x0] * (1 - wx) + img[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def _grid(n_in: int, n_out: int) -> np.ndarray:
    if n_out == 1:
        return np.array([(n_in - 1) / 2.0])
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))


def procedural_light_map(
    dims: tuple[int, int], key: tuple[int, int], channels: int = 3
) -> np.ndarray:
    """Smooth low-frequency color field in [0, 1], reproducible from key.

    Per channel, a sum of three cosine waves at 0.5..1.5 cycles across the
    image; the stack is then min-max normalized jointly so inter-channel
    ratios survive.
    """
    h, w = dims
    rng = RngStream(*key)
    yy = np.arange(h)[:, None] / max(h, 1)
    xx = np.arange(w)[None, :] / max(w, 1)
    chans = []
    for _ in range(channels):
        fld = np.zeros((h, w))
        for _ in range(3):
            fy = rng.uniform(0.5, 1.5)
            fx = rng.uniform(0.5, 1.5)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.uniform(0.5, 1.0)
            fld += amp * np.cos(2.0 * np.pi * (fy * yy + fx * xx) + phase)
        chans.append(fld)
    stack = np.stack(chans, axis=-1)
    lo, hi = stack.min(), stack.max()
    if hi == lo:
        return np.zeros((h, w, channels))
    return (stack - lo) / (hi - lo)


def sample_light_map(
    bank,
    dims: tuple[int, int],
    rng: RngStream,
    channels: int = 3,
    procedural_fallback: bool = True,
) -> LightMap:
    """Pick a light map uniformly from a bank directory and resize it.

    With an empty/absent bank, synthesizes a procedural field instead
    (unless the fallback is disabled, which is an error).
    """
    h, w = dims
    files = list_images(bank) if bank is not None else []
    if files:
        idx = rng.integers(0, len(files) - 1)
        img = load_image(files[idx])
        if img.shape[2] == 1 and channels == 3:
            img = np.repeat(img, 3, axis=2)
        elif img.shape[2] == 3 and channels == 1:
            img = img.mean(axis=2, keepdims=True)
        return LightMap(image=resize_bilinear(img, h, w), source_id=files[idx].name)
    if not procedural_fallback:
        raise DataError(f"light bank {bank!r} is empty and procedural fallback is disabled")
    sub = rng.spawn()
    return LightMap(
        image=procedural_light_map(dims, sub.key, channels),
        source_id=PROCEDURAL_SOURCE,
        key=sub.key,
    )


def apply_glow(image: np.ndarray, spots) -> np.ndarray:
    """Add recorded Gaussian bumps to every channel and clamp to [0, 1].

    Each spot is (cy, cx, size, amplitude): a size x size window centered
    at (cy, cx), clipped at the borders, with std = size / 4.
    """
    h, w, _ = image.shape
    out = image.copy()
    for cy, cx, size, amp in spots:
        half = size // 2
        y0, y1 = max(cy - half, 0), min(cy - half + size, h)
        x0, x1 = max(cx - half, 0), min(cx - half + size, w)
        if y0 >= y1 or x0 >= x1:
            continue
        sigma = size / 4.0
        yy = np.arange(y0, y1)[:, None] - cy
        xx = np.arange(x0, x1)[None, :] - cx
        bump = amp * np.exp(-(yy * yy + xx * xx) / (2.0 * sigma * sigma))
        out[y0:y1, x0:x1, :] += bump[:, :, None]
    return np.clip(out, 0.0, 1.0)


def add_glow(
    lm: LightMap, rng: RngStream, cfg: AugmentConfig, gain: float | None = None
) -> LightMap:
    """Brighten a few random regions of the light map with Gaussian bumps.

    Bump count and window size are drawn from cfg ranges; amplitude is
    uniform in (0, gain]. Bumps may overlap, which is what produces the
    extreme, saturating light patches.
    """
    if gain is None:
        gain = cfg.glow_gain
    h, w, _ = lm.image.shape
    count = rng.integers(cfg.glow_count[0], cfg.glow_count[1])
    spots = []
    for _ in range(count):
        size = int(rng.integers(cfg.glow_size[0], cfg.glow_size[1]))
        cy = int(rng.integers(0, h - 1))
        cx = int(rng.integers(0, w - 1))
        amp = gain * (1.0 - rng.random())  # (0, gain]
        spots.append((cy, cx, size, amp))
    return LightMap(
        image=apply_glow(lm.image, spots),
        source_id=lm.source_id,
        key=lm.key,
        glow=lm.glow + spots,
    )


def gen_blend_map(dims: tuple[int, int], rng: RngStream, cfg: AugmentConfig) -> BlendMap:
    """Constant base weight t ~ U[blend_min, blend_max], locally adjusted.

    A fixed number of square regions get the base replaced by t + delta,
    delta ~ U(0, blend_jitter); overlapping regions overwrite rather than
    stack, so no value exceeds t + blend_jitter. Regions larger than the
    image shrink to fit and the realized size is recorded.
    """
    h, w = dims
    t = rng.uniform(cfg.blend_min, cfg.blend_max)
    m = np.full((h, w), t)
    regions = []
    for _ in range(cfg.blend_regions):
        size = min(cfg.blend_region_size, h, w)
        y = int(rng.integers(0, h - size))
        x = int(rng.integers(0, w - size))
        delta = rng.uniform(0.0, cfg.blend_jitter)
        m[y : y + size, x : x + size] = t + delta
        regions.append((y, x, size, delta))
    np.minimum(m, np.nextafter(1.0, 0.0), out=m)
    return BlendMap(map=m, base_t=t, regions=regions)


def _truncated_std_normal(shape, rng: RngStream) -> np.ndarray:
    """Standard normal draws resampled until every value lies in [0, 3]."""
    vals = rng.normal(size=shape)
    bad = (vals < 0.0) | (vals > 3.0)
    while bad.any():
        vals[bad] = rng.normal(size=int(bad.sum()))
        bad = (vals < 0.0) | (vals > 3.0)
    return vals


def gen_noise(
    shape: tuple[int, int, int],
    rng: RngStream,
    cfg: AugmentConfig,
    severe: bool = True,
) -> NoiseField:
    """Truncated Gaussian noise field with ceiling 3 * weight * blend_max."""
    base = cfg.noise_weight if severe else cfg.mild_noise_weight
    weight = base * cfg.blend_max
    sub = rng.spawn()
    vals = _truncated_std_normal(shape, sub)
    return NoiseField(values=vals * weight, weight=weight, key=sub.key)


def _noise_from_key(shape, key, weight) -> np.ndarray:
    return _truncated_std_normal(shape, RngStream(*key)) * weight


def _as_array(x, attr):
    return getattr(x, attr) if hasattr(x, attr) else np.asarray(x, dtype=np.float64)


def compose(clear, blend, light, noise, clip: bool = True) -> np.ndarray:
    """Blend clear signal with the light field and add noise.

    out = W * J + (1 - W) * L + eps, elementwise, with the single-channel
    weight map broadcast across channels. Clamped to [0, 1] unless clip is
    False (the raw value is what a scalar reference loop produces).
    """
    j = check_image(clear)
    wb = _as_array(blend, "map")
    lf = _as_array(light, "image")
    eps = _as_array(noise, "values")
    if wb.ndim != 2 or wb.shape != j.shape[:2]:
        raise DimensionError(
            f"blend map must be (H, W) = {j.shape[:2]}, got {wb.shape}"
        )
    check_same_shape(lf, j, "light map and image")
    check_same_shape(eps, j, "noise field and image")
    wb3 = wb[:, :, None]
    out = wb3 * j + (1.0 - wb3) * lf + eps
    if clip:
        out = np.clip(out, 0.0, 1.0)
    return out


@dataclass
class AugRecord:
    """Full realization of one augmentation; enough to replay it bit-exactly."""

    dims: tuple[int, int, int]
    severe: bool
    light_source: str
    light_key: tuple[int, int] | None
    glow: list[tuple[int, int, int, float]]
    base_t: float
    blend_regions: list[tuple[int, int, int, float]]
    noise_key: tuple[int, int]
    noise_weight: float
    config: dict
    source_image: str | None = None

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "severe": self.severe,
            "light_source": self.light_source,
            "light_key": list(self.light_key) if self.light_key else None,
            "glow": [[int(a), int(b), int(c), float(d)] for a, b, c, d in self.glow],
            "base_t": self.base_t,
            "blend_regions": [
                [int(a), int(b), int(c), float(d)] for a, b, c, d in self.blend_regions
            ],
            "noise_key": list(self.noise_key),
            "noise_weight": self.noise_weight,
            "config": self.config,
            "source_image": self.source_image,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugRecord":
        return cls(
            dims=tuple(d["dims"]),
            severe=bool(d["severe"]),
            light_source=d["light_source"],
            light_key=tuple(d["light_key"]) if d.get("light_key") else None,
            glow=[tuple(g) for g in d["glow"]],
            base_t=float(d["base_t"]),
            blend_regions=[tuple(r) for r in d["blend_regions"]],
            noise_key=tuple(d["noise_key"]),
            noise_weight=float(d["noise_weight"]),
            config=d.get("config", {}),
            source_image=d.get("source_image"),
        )


def augment(
    clear: np.ndarray, cfg: AugmentConfig, rng: RngStream
) -> tuple[np.ndarray, AugRecord]:
    """Normalize a clear image and run the full degradation pipeline on it.

    Severity of the sample is drawn with probability cfg.severity_ratio;
    non-severe samples use the mild noise weight and glow gain. Returns the
    degraded image and the record of every sampled parameter.
    """
    cfg.validate()
    j = minmax_normalize(clear)
    h, w, c = j.shape
    severe = rng.random() < cfg.severity_ratio
    light = sample_light_map(
        cfg.light_bank, (h, w), rng, channels=c,
        procedural_fallback=cfg.procedural_fallback,
    )
    gain = cfg.glow_gain if severe else cfg.mild_glow_gain
    light = add_glow(light, rng, cfg, gain=gain)
    blend = gen_blend_map((h, w), rng, cfg)
    noise = gen_noise((h, w, c), rng, cfg, severe=severe)
    out = compose(j, blend, light, noise)
    record = AugRecord(
        dims=(h, w, c),
        severe=severe,
        light_source=light.source_id,
        light_key=light.key,
        glow=light.glow,
        base_t=blend.base_t,
        blend_regions=blend.regions,
        noise_key=noise.key,
        noise_weight=noise.weight,
        config=cfg.to_dict(),
    )
    return out, record


def replay(record: AugRecord, clear: np.ndarray, bank=None) -> np.ndarray:
    """Re-run a recorded augmentation on the same clear image, bit-exactly."""
    j = minmax_normalize(clear)
    h, w, c = j.shape
    if (h, w, c) != tuple(record.dims):
        raise ValueError(f"record dims {record.dims} do not match image {(h, w, c)}")
    if record.light_source == PROCEDURAL_SOURCE:
        base = procedural_light_map((h, w), record.light_key, channels=c)
    else:
        if bank is None:
            raise DataError("record references a bank light map but no bank was given")
        img = load_image(Path(bank) / record.light_source)
        if img.shape[2] == 1 and c == 3:
            img = np.repeat(img, 3, axis=2)
        elif img.shape[2] == 3 and c == 1:
            img = img.mean(axis=2, keepdims=True)
        base = resize_bilinear(img, h, w)
    light = apply_glow(base, record.glow)
    m = np.full((h, w), record.base_t)
    for y, x, size, delta in record.blend_regions:
        m[y : y + size, x : x + size] = record.base_t + delta
    np.minimum(m, np.nextafter(1.0, 0.0), out=m)
    eps = _noise_from_key((h, w, c), record.noise_key, record.noise_weight)
    return compose(j, m, light, eps)
