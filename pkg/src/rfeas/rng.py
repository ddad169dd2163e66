"""Counter-based deterministic random streams.

Every draw is a pure function of (seed, index), so any slice of a stream can
be generated independently: parallel workers producing disjoint index ranges
yield bit-identical results to a single sequential pass, regardless of chunk
size or worker count.  The mixer is the splitmix64 finalizer.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix_scalar(x: int) -> int:
    x &= _MASK
    x = (x ^ (x >> 30)) * _MIX1 & _MASK
    x = (x ^ (x >> 27)) * _MIX2 & _MASK
    return x ^ (x >> 31)


def stream_key(seed: int) -> int:
    """Derive the per-seed stream key (one extra mixing round)."""
    return _mix_scalar(_mix_scalar(seed & _MASK) ^ _GOLDEN)


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """``count`` uniforms in [0, 1) at absolute stream indices ``start``...

    Random access by construction: uniforms(s, 0, 10) == concatenation of
    uniforms(s, 0, 3) and uniforms(s, 3, 7), bit for bit.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    key = np.uint64(stream_key(seed))
    idx = np.arange(start, start + count, dtype=np.uint64)
    x = (idx + np.uint64(1)) * np.uint64(_GOLDEN) + key
    x ^= x >> np.uint64(30)
    x *= np.uint64(_MIX1)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_MIX2)
    x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def uniform_pairs(seed: int, count: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Two independent uniform arrays over [lo, hi), a convenience for tests."""
    u = uniforms(seed, 0, 2 * count).reshape(count, 2)
    return lo + u[:, 0] * (hi - lo), lo + u[:, 1] * (hi - lo)
