"""Counted-stream deterministic RNG (PCG32, XSH-RR 64/32 variant).

Every randomized video gets its own stream, keyed by (master seed, video
index). Pure-integer Python keeps the draw sequence identical on every
platform, which is what lets a manifest pin its exact generation inputs.
"""

from __future__ import annotations

_MULT = 6364136223846793005
_M64 = (1 << 64) - 1
_M32 = (1 << 32) - 1


class RngStream:
    """One PCG32 stream; (seed, stream_id) fully determine all draws."""

    algorithm = "pcg32"

    def __init__(self, seed: int, stream_id: int):
        self.seed = int(seed) & _M64
        self.stream_id = int(stream_id) & _M64
        self._inc = ((self.stream_id << 1) | 1) & _M64
        self._state = 0
        self._next_u32()
        self._state = (self._state + self.seed) & _M64
        self._next_u32()

    def _next_u32(self) -> int:
        old = self._state
        self._state = (old * _MULT + self._inc) & _M64
        xorshifted = (((old >> 18) ^ old) >> 27) & _M32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & _M32

    @property
    def state(self) -> int:
        return self._state

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform double in [lo, hi) with 53 random bits."""
        a = self._next_u32() >> 5
        b = self._next_u32() >> 6
        u = (a * 67108864.0 + b) / 9007199254740992.0
        return lo + (hi - lo) * u

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n), rejection-sampled so there is no bias."""
        if n <= 0:
            raise ValueError("randint needs n >= 1")
        threshold = ((_M32 + 1) // n) * n
        while True:
            v = self._next_u32()
            if v < threshold:
                return v % n

    def choice(self, seq):
        if not seq:
            raise ValueError("cannot choose from an empty sequence")
        return seq[self.randint(len(seq))]


def derive_stream(master_seed: int, video_index: int) -> RngStream:
    """Stream for one video; distinct indices give distinct sequences."""
    if video_index < 0:
        raise ValueError("video_index must be non-negative")
    return RngStream(master_seed, video_index)
