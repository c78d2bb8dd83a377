"""Counter-based random streams for reproducible, splittable simulation replicas.

Every random draw is a pure function of (seed, replica, counter), so replicas
are independent by construction and a run can be reproduced bit-for-bit from
its config. The generator is the splitmix64 finalizer applied to a keyed
counter; draws never share state across replicas.
"""

from __future__ import annotations

import numpy as np

U64 = np.uint64

GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)

# 2**53, for turning the top 53 bits of a draw into a float in [0, 1)
_INV53 = 1.0 / 9007199254740992.0


def mix64(z: np.uint64) -> np.uint64:
    """splitmix64 finalizer: avalanching 64-bit mix."""
    z = (z ^ (z >> U64(30))) * _MIX1
    z = (z ^ (z >> U64(27))) * _MIX2
    return z ^ (z >> U64(31))


def stream_key(seed: int, replica: int = 0) -> np.uint64:
    """Derive the 64-bit key of one replica's draw stream."""
    with np.errstate(over="ignore"):
        k = mix64(U64(seed & 0xFFFFFFFFFFFFFFFF) + GOLDEN)
        return mix64(k ^ (U64(replica) * _MIX1 + GOLDEN))


class CounterRng:
    """Sequential view over one counter-based stream.

    Thin convenience wrapper for python-side consumers (tests, LETS helpers,
    dithering). The numba hot loops in ``_loops`` inline the same arithmetic.
    """

    def __init__(self, seed: int, replica: int = 0, counter: int = 0):
        self.key = stream_key(seed, replica)
        self.counter = U64(counter)

    def _next(self) -> np.uint64:
        with np.errstate(over="ignore"):
            v = mix64(self.key + self.counter * GOLDEN)
        self.counter += U64(1)
        return v

    def random(self) -> float:
        """Float in [0, 1)."""
        return float(self._next() >> U64(11)) * _INV53

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return int(self.random() * n)

    def integers(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.below(hi - lo + 1)
