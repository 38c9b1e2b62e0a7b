"""No-reference quality scoring.

The native metric is RMS contrast. Learned metrics stay outside the
package as external commands: the handle's template gets a PNG path
substituted for "{path}", and the command must print exactly one finite
decimal number to stdout and exit 0.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    MetricParseError,
    MetricProcessError,
    MetricTimeoutError,
)
from .image import list_images, load_image, rms_contrast, save_image
from .validation import check_image

NATIVE_CONTRAST = "native-contrast"
EXTERNAL = "external"

TMPDIR_ENV = "NIGHTFORGE_TMPDIR"


@dataclass
class MetricHandle:
    """Either the native contrast metric or an external command template."""

    kind: str = NATIVE_CONTRAST
    command: str | None = None
    timeout: float = 60.0

    def validate(self) -> "MetricHandle":
        if self.kind == NATIVE_CONTRAST:
            return self
        if self.kind == EXTERNAL:
            if not self.command or "{path}" not in self.command:
                raise ValueError("external metric needs a command template with {path}")
            return self
        raise ValueError(f"unknown metric kind {self.kind!r}")

    @classmethod
    def parse(cls, spec: str, timeout: float = 60.0) -> "MetricHandle":
        """CLI-facing constructor: 'contrast' or an external command template."""
        if spec in ("contrast", NATIVE_CONTRAST):
            return cls(kind=NATIVE_CONTRAST)
        return cls(kind=EXTERNAL, command=spec, timeout=timeout).validate()


@dataclass
class ScoreReport:
    scores: list[tuple[str, float]]
    mean: float


def _run_external(handle: MetricHandle, png_path: Path) -> float:
    argv = [a.replace("{path}", str(png_path)) for a in shlex.split(handle.command)]
    try:
        proc = subprocess.run(
            argv, capture_output=True, text=True, timeout=handle.timeout
        )
    except subprocess.TimeoutExpired as exc:
        raise MetricTimeoutError(
            f"metric command timed out after {handle.timeout}s: {handle.command}"
        ) from exc
    if proc.returncode != 0:
        raise MetricProcessError(
            f"metric command exited {proc.returncode}: {proc.stderr.strip()[:500]}"
        )
    tokens = proc.stdout.split()
    if len(tokens) != 1:
        raise MetricParseError(
            f"expected one number on stdout, got {proc.stdout!r}"
        )
    try:
        value = float(tokens[0])
    except ValueError as exc:
        raise MetricParseError(f"unparseable metric output {tokens[0]!r}") from exc
    if not np.isfinite(value):
        raise MetricParseError(f"non-finite metric output {value!r}")
    return value


def score(metric: MetricHandle, image: np.ndarray) -> float:
    """Score one in-memory image with the given metric."""
    metric.validate()
    arr = check_image(image)
    if metric.kind == NATIVE_CONTRAST:
        return rms_contrast(arr)
    tmpdir = os.environ.get(TMPDIR_ENV)
    with tempfile.TemporaryDirectory(dir=tmpdir) as td:
        png = Path(td) / "probe.png"
        save_image(arr, png)
        return _run_external(metric, png)


def score_path(metric: MetricHandle, path) -> float:
    """Score an image file; external metrics get the file path directly."""
    metric.validate()
    if metric.kind == NATIVE_CONTRAST:
        return rms_contrast(load_image(path))
    return _run_external(metric, Path(path))


def score_directory(metric: MetricHandle, directory, max_workers: int = 1) -> ScoreReport:
    """Score every image in a directory (lexicographic order) plus the mean."""
    files = list_images(directory)
    if not files:
        raise DataError(f"no images to score in {directory}")
    if max_workers > 1 and metric.kind == EXTERNAL:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            values = list(pool.map(lambda p: score_path(metric, p), files))
    else:
        values = [score_path(metric, p) for p in files]
    scores = [(p.name, v) for p, v in zip(files, values)]
    return ScoreReport(scores=scores, mean=float(np.mean(values)))
