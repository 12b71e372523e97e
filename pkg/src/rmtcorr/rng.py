"""Counter-based random streams with reproducible per-replication substreams."""

from __future__ import annotations

import numpy as np

__all__ = ["RandomStream", "substream_seed"]

_MASK64 = (1 << 64) - 1


def substream_seed(master_seed: int, index: int) -> int:
    """64-bit seed for replication ``index`` derived by hashing the pair.

    The derived seed alone reproduces the replication:
    ``RandomStream(substream_seed(s, i))`` equals ``RandomStream(s).substream(i)``.
    """
    if index < 0:
        raise ValueError("replication index must be nonnegative")
    ss = np.random.SeedSequence([master_seed & _MASK64, index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class RandomStream:
    """A Philox generator keyed by a 64-bit seed.

    Streams are not shared between workers; each replication builds its own
    from :meth:`substream`.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.generator = np.random.Generator(np.random.Philox(self.seed))

    def substream(self, index: int) -> RandomStream:
        return RandomStream(substream_seed(self.seed, index))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed})"

    # thin pass-throughs used by the samplers
    def standard_normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def random(self, size) -> np.ndarray:
        return self.generator.random(size)

    def integers(self, low, high=None, size=None) -> np.ndarray:
        return self.generator.integers(low, high, size=size)

    def standard_t(self, df: float, size) -> np.ndarray:
        return self.generator.standard_t(df, size)
