"""Counter-based random streams.

Every uniform is a pure function of ``(seed, round, particle, purpose,
counter)``; nothing depends on call order or on which thread asks.  The
hash is splitmix64's finalizer chained over the key words.  A scalar
version (plain ints) and a numpy version (uint64 arrays) produce identical
bits, so blocks can be prefetched vectorially and continued one at a time.
"""

from __future__ import annotations

import numpy as np

MUTATION = 1
SELECTION = 2

_M64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
_SCALE = 2.0 ** -53


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _C1) & _M64
    z = ((z ^ (z >> 27)) * _C2) & _M64
    return z ^ (z >> 31)


def _absorb(h: int, word: int) -> int:
    return _mix((h + _GOLDEN + (word & _M64)) & _M64)


def stream_key(seed: int, rnd: int, particle: int, purpose: int) -> int:
    h = _absorb(0, seed)
    h = _absorb(h, purpose)
    h = _absorb(h, rnd)
    return _absorb(h, particle)


def uniform_at(key: int, counter: int) -> float:
    """The ``counter``-th uniform of a stream, strictly inside (0, 1)."""
    return ((_absorb(key, counter) >> 11) + 0.5) * _SCALE


# numpy twins -----------------------------------------------------------------

_U30, _U27, _U31, _U11 = (np.uint64(k) for k in (30, 27, 31, 11))
_NC1, _NC2, _NGOLD = np.uint64(_C1), np.uint64(_C2), np.uint64(_GOLDEN)


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U30)) * _NC1
    z = (z ^ (z >> _U27)) * _NC2
    return z ^ (z >> _U31)


def _absorb_np(h, word) -> np.ndarray:
    return _mix_np(h + _NGOLD + word)


def stream_keys(seed: int, rnd: int, particles: np.ndarray, purpose: int) -> np.ndarray:
    h = _absorb(_absorb(_absorb(0, seed), purpose), rnd)
    with np.errstate(over="ignore"):
        return _absorb_np(np.uint64(h), np.asarray(particles, dtype=np.uint64))


def uniform_block(keys: np.ndarray, count: int) -> np.ndarray:
    """Uniforms ``0..count-1`` of each stream, shape ``(len(keys), count)``."""
    ctr = np.arange(count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = _absorb_np(keys[:, None], ctr[None, :]) >> _U11
    return (bits.astype(np.float64) + 0.5) * _SCALE


def uniforms(seed: int, rnd: int, particle: int, purpose: int, count: int) -> np.ndarray:
    keys = stream_keys(seed, rnd, np.array([particle]), purpose)
    return uniform_block(keys, count)[0]


class Stream:
    """One logical stream; serves a prefetched block, then computes on demand."""

    __slots__ = ("key", "buf", "i")

    def __init__(self, key: int, buf=()):
        self.key = key
        self.buf = buf
        self.i = 0

    def next(self) -> float:
        i = self.i
        self.i = i + 1
        if i < len(self.buf):
            return self.buf[i]
        return uniform_at(self.key, i)

    def unread(self) -> None:
        """Give back the last draw; the next call returns it again."""
        self.i -= 1

    @classmethod
    def of(cls, seed: int, rnd: int, particle: int, purpose: int = MUTATION) -> "Stream":
        return cls(stream_key(seed, rnd, particle, purpose))
