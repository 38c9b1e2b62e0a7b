"""Deterministic, counter-based random streams.

Draw i of a stream is a pure function of (seed, stream, i): a 64-bit Weyl
sequence position pushed through the SplitMix64 finalizer. No hidden global
state, identical sequences on every platform, and cheap vectorized blocks.
Streams are cheap value objects; derive an independent child stream per
parallel task instead of sharing one.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_STREAM_SALT = 0xD6E8FEB86659FD93

_U_GOLDEN = np.uint64(_GOLDEN)
_U_MIX1 = np.uint64(_MIX1)
_U_MIX2 = np.uint64(_MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)

# 1/2**53, so a 53-bit draw maps onto [0, 1).
_INV53 = float(2.0**-53)


def _mix_scalar(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _U_MIX1
    z = (z ^ (z >> _S27)) * _U_MIX2
    return z ^ (z >> _S31)


class RngStream:
    """One independent random sequence, keyed by (seed, stream).

    The key fully determines every draw; position is a plain counter, so a
    stream can be reconstructed from its key alone. Equal keys give
    bit-identical sequences.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK
        self.stream = int(stream) & _MASK
        self._base = _mix_scalar(
            _mix_scalar(self.seed) ^ _mix_scalar((self.stream * _GOLDEN) ^ _STREAM_SALT)
        )
        self._counter = 0

    @property
    def key(self) -> tuple[int, int]:
        return (self.seed, self.stream)

    def _raw(self, n: int) -> np.ndarray:
        """Next n raw 64-bit words as a uint64 array."""
        idx = np.arange(self._counter, self._counter + n, dtype=np.uint64)
        self._counter += n
        words = np.uint64(self._base) + idx * _U_GOLDEN
        return _mix_array(words)

    def random(self, size: int | tuple[int, ...] | None = None):
        """Uniform floats in [0, 1); scalar when size is None."""
        if size is None:
            return float((int(self._raw(1)[0]) >> 11) * _INV53)
        n = int(np.prod(size))
        vals = (self._raw(n) >> _S11).astype(np.float64) * _INV53
        return vals.reshape(size)

    def uniform(self, low: float, high: float, size=None):
        u = self.random(size)
        return low + (high - low) * u

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in [low, high], both ends inclusive."""
        if high < low:
            raise ValueError(f"empty integer range [{low}, {high}]")
        span = high - low + 1
        u = self.random(size)
        if size is None:
            return low + int(u * span)
        return low + (u * span).astype(np.int64)

    def normal(self, size=None):
        """Standard normal draws via Box-Muller on paired uniforms."""
        n = 1 if size is None else int(np.prod(size))
        pairs = (n + 1) // 2
        words = self._raw(2 * pairs)
        # u1 in (0, 1] keeps the log finite; u2 in [0, 1).
        u1 = ((words[:pairs] >> _S11).astype(np.float64) + 1.0) * _INV53
        u2 = (words[pairs:] >> _S11).astype(np.float64) * _INV53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        if size is None:
            return float(out[0])
        return out[:n].reshape(size)

    def spawn(self) -> "RngStream":
        """Independent child stream; its key is recordable for replay."""
        child_stream = int(self._raw(1)[0])
        return RngStream(self.seed, child_stream)

    def child(self, task: int) -> "RngStream":
        """Stream for parallel task `task`, independent of draw position."""
        return RngStream(self.seed, _mix_scalar(self.stream ^ ((task + 1) * _GOLDEN)))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"
