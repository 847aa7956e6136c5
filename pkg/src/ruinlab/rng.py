"""Seeded random streams backed by the counter-based generator in ``_kernels``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K

__all__ = ["Stream", "as_stream"]


@dataclass(frozen=True)
class Stream:
    """A reproducible random stream.

    ``seed`` is the master seed; ``stream`` selects an independent sub-stream
    (via :class:`numpy.random.SeedSequence` spawn keys), which is how
    independent seed blocks and coupled-but-distinct experiments are made.
    """

    seed: int
    stream: int = 0

    @property
    def key(self) -> np.uint64:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return ss.generate_state(1, dtype=np.uint64)[0]

    def spawn(self, stream: int) -> "Stream":
        return Stream(self.seed, stream)

    def uniforms(self, n: int, path: int = 0, tag: int = K.TAG_CLAIM) -> np.ndarray:
        """Raw uniforms on (0, 1) along one path; mainly for testing the generator."""
        return K.uniforms(self.key, int(path), int(tag), 0, int(n))


def as_stream(rng) -> Stream:
    if isinstance(rng, Stream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng))
    raise TypeError(f"expected a Stream or an integer seed, got {type(rng).__name__}")
