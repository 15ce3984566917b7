"""Counter-based random streams.

Every Monte Carlo replica draws from its own Philox stream whose 128-bit key
is ``(seed, replica)``. Streams for different replicas therefore never overlap
and results depend only on the seed and replica indices, not on how the
replicas are scheduled across workers.
"""

import numpy as np

from .errors import DomainError

_U64 = 2**64


class RngStream:
    """A reproducible normal-variate stream keyed by ``(seed, stream_id)``."""

    def __init__(self, seed: int, stream_id: int = 0):
        for name, v in (("seed", seed), ("stream_id", stream_id)):
            if not (isinstance(v, (int, np.integer)) and 0 <= int(v) < _U64):
                raise DomainError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, shape) -> np.ndarray:
        return self.generator.standard_normal(shape)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def rng_stream(seed: int, replica: int = 0) -> RngStream:
    return RngStream(seed, replica)
