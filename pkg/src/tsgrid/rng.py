"""Counter-based random streams with coordination-free splitting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

_U64 = 2**64


@dataclass(frozen=True)
class RngStream:
    """Address of an independent random stream.

    A stream is identified by ``(seed, stream)`` plus an optional child
    path.  The same address always yields bit-identical draws, and distinct
    addresses yield statistically independent draws, so parallel workers
    can split work by stream index without any coordination.  Generators
    are backed by the counter-based Philox engine.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < _U64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= int(self.stream) < _U64:
            raise ConfigurationError(f"stream must be a 64-bit unsigned integer, got {self.stream}")

    def child(self, index: int) -> "RngStream":
        """Derive the ``index``-th sub-stream of this stream."""
        if index < 0:
            raise ConfigurationError(f"child index must be nonnegative, got {index}")
        return RngStream(self.seed, self.stream, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *self.path))
        return np.random.Generator(np.random.Philox(ss))
