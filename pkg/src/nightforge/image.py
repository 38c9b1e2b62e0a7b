"""Image container conventions, file I/O, and basic photometric operations.

Images are plain numpy float64 arrays of shape (H, W, C) with C in {1, 3}
and intensities in [0, 1]. PNG is the canonical on-disk format; binary PPM
(P6, maxval 255) is accepted read-only because it is easy to write by hand
in test fixtures.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import CorruptImageError, DegenerateImageWarning, ImageFormatError
from .validation import check_image

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

# ITU-R BT.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


def load_image(path) -> np.ndarray:
    """Load a PNG or binary PPM file as a float64 (H, W, C) array in [0, 1].

    8-bit samples map to intensity by division by 255. Grayscale stays
    single-channel, RGB stays 3-channel, alpha channels are dropped.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(_PNG_MAGIC):
        return _load_png(path)
    if head.startswith(b"P6"):
        return _load_ppm(path)
    raise ImageFormatError(f"{path}: not a PNG or binary PPM file")


def _load_png(path: Path) -> np.ndarray:
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("RGBA", "P", "PA"):
                im = im.convert("RGBA").convert("RGB")
            elif mode == "LA":
                im = im.convert("L")
            elif mode not in ("L", "RGB", "1"):
                raise ImageFormatError(f"{path}: unsupported PNG mode {mode!r}")
            if im.mode == "1":
                im = im.convert("L")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise CorruptImageError(f"{path}: unreadable PNG ({exc})") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _load_ppm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    try:
        fields, offset = _ppm_header_fields(data)
        width, height, maxval = (int(f) for f in fields[1:4])
    except (ValueError, IndexError) as exc:
        raise CorruptImageError(f"{path}: corrupt PPM header") from exc
    if maxval != 255:
        raise ImageFormatError(f"{path}: only 8-bit PPM supported, maxval={maxval}")
    if width < 1 or height < 1:
        raise CorruptImageError(f"{path}: bad PPM dimensions {width}x{height}")
    n = width * height * 3
    raster = data[offset : offset + n]
    if len(raster) < n:
        raise CorruptImageError(f"{path}: truncated PPM raster")
    arr = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / 255.0
    return arr.reshape(height, width, 3)


def _ppm_header_fields(data: bytes):
    """Parse the 4 whitespace-separated header tokens, honoring # comments.

    Returns the tokens and the raster offset (one whitespace byte after
    maxval, per the P6 specification).
    """
    fields = []
    i = 0
    while len(fields) < 4:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i < len(data) and data[i : i + 1] == b"#":
            while i < len(data) and data[i] != 0x0A:
                i += 1
            continue
        start = i
        while i < len(data) and not data[i : i + 1].isspace():
            i += 1
        if start == i:
            raise ValueError("unexpected end of header")
        fields.append(data[start:i])
    if fields[0] != b"P6":
        raise ValueError("not a P6 header")
    return fields, i + 1


def save_image(image: np.ndarray, path) -> None:
    """Write an image as an 8-bit PNG (RGB or grayscale).

    Intensities quantize to round(x * 255), so load(save(x)) differs from x
    by at most 1/510 per pixel.
    """
    arr = check_image(image)
    quant = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    if quant.shape[2] == 1:
        pil = PILImage.fromarray(quant[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(quant, mode="RGB")
    pil.save(Path(path), format="PNG")


def minmax_normalize(image: np.ndarray) -> np.ndarray:
    """Stretch intensities to span [0, 1], jointly over all channels.

    A constant image has no spread to stretch; it maps to all zeros and a
    DegenerateImageWarning is emitted.
    """
    arr = check_image(image)
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        warnings.warn(
            "minmax_normalize: constant image, returning zeros",
            DegenerateImageWarning,
            stacklevel=2,
        )
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Luminance Y = 0.299 R + 0.587 G + 0.114 B as a (H, W, 1) array."""
    arr = check_image(image)
    if arr.shape[2] == 1:
        return arr
    return (arr @ _LUMA)[:, :, None]


def rms_contrast(image: np.ndarray) -> float:
    """Population standard deviation of luminance on the 0..255 scale."""
    gray = to_grayscale(image)
    return float(np.std(gray) * 255.0)


def list_images(directory) -> list[Path]:
    """Readable image files in a directory, in lexicographic filename order."""
    directory = Path(directory)
    files = [
        p
        for p in sorted(directory.iterdir(), key=lambda p: p.name)
        if p.is_file() and p.suffix.lower() in {".png", ".ppm"}
    ]
    return files
