"""Counter-based random streams.

Every stochastic code path draws from an `RngStream`, identified by a
64-bit `(seed, stream)` pair.  Streams are backed by Philox, so the same
pair yields the same draw sequence on every platform and independent of
how work is split across workers.  Per-shot convention: shot ``j`` of an
evaluation uses ``stream = j`` under that evaluation's derived seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible stream of uniform random numbers."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, n: int) -> np.ndarray:
        """First `n` uniform [0,1) draws of this stream."""
        return self.generator().random(n)


def derive_seed(seed: int, tag: int) -> int:
    """Deterministically derive a sub-seed for an evaluation or purpose.

    Used to give each energy evaluation its own family of per-shot
    streams (shift evaluations never share randomness).
    """
    key = np.array([seed & _MASK64, tag & _MASK64], dtype=np.uint64)
    return int(np.random.Philox(key=key).random_raw(1)[0])


def uniform_matrix(seed: int, n_streams: int, n_draws: int, first_stream: int = 0) -> np.ndarray:
    """Matrix U with row j = first `n_draws` uniforms of stream `first_stream + j`.

    Row j matches RngStream(seed, first_stream + j).uniforms(n_draws), so
    batched sampling reproduces per-shot serial sampling exactly.
    """
    out = np.empty((n_streams, n_draws), dtype=np.float64)
    for j in range(n_streams):
        out[j] = RngStream(seed, first_stream + j).uniforms(n_draws)
    return out
