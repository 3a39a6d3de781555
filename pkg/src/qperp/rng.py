"""Seeded random streams.

A stream is identified by ``(seed, stream)``; the same pair always yields the
same sequence of draws.  Independent sub-streams (e.g. one per batch chunk)
are obtained with :meth:`RngState.child`.
"""

from __future__ import annotations

import numpy as np


class RngState:
    """Owns one ``numpy.random.Generator`` built from ``(seed, stream)``.

    ``position`` counts the generator calls routed through :meth:`take`;
    samplers use the generator directly, so it is informational only.
    """

    def __init__(self, seed: int, stream: int | tuple[int, ...] = ()) -> None:
        if not 0 <= int(seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)
        self.stream = (stream,) if isinstance(stream, int) else tuple(stream)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self.generator = np.random.Generator(np.random.PCG64(seq))
        self.position = 0

    def child(self, index: int) -> "RngState":
        return RngState(self.seed, self.stream + (int(index),))

    def take(self) -> np.random.Generator:
        self.position += 1
        return self.generator

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, stream={self.stream})"


def as_rng(rng: RngState | int | None) -> RngState:
    if isinstance(rng, RngState):
        return rng
    return RngState(0 if rng is None else rng)
