"""Per-worker random streams.

Each worker owns a counter-based Philox stream keyed by
``(master_seed, worker_id)``.  Drawing from one worker's stream never
advances another's, and a block draw is bit-identical to the same draws made
one at a time (NumPy fills arrays from the bit stream sequentially), so the
engine may batch sampling per epoch while staying exactly replayable.

``draw_index`` counts gradient samples taken from the stream so far; it is
recorded alongside each sample so any point of a run can be located and
replayed.
"""
from __future__ import annotations

import numpy as np


class WorkerStream:
    """Deterministic RNG stream owned by a single worker."""

    __slots__ = ("master_seed", "worker_id", "draw_index", "_gen")

    def __init__(self, master_seed: int, worker_id: int):
        self.master_seed = int(master_seed)
        self.worker_id = int(worker_id)
        self.draw_index = 0
        seq = np.random.SeedSequence(entropy=(self.master_seed, self.worker_id))
        self._gen = np.random.Generator(np.random.Philox(seq))

    def uniform_block(self, n_samples: int, dim: int, halfwidth: float) -> np.ndarray:
        """n_samples noise vectors, coordinates uniform on [-halfwidth, +halfwidth)."""
        self.draw_index += n_samples
        if halfwidth == 0.0:
            # consume nothing: a zero-noise family is deterministic
            return np.zeros((n_samples, dim))
        return self._gen.uniform(-halfwidth, halfwidth, size=(n_samples, dim))

    def index_block(self, n_samples: int, n_items: int) -> np.ndarray:
        """n_samples integer draws uniform on {0, ..., n_items - 1}."""
        self.draw_index += n_samples
        return self._gen.integers(0, n_items, size=n_samples)

    def __repr__(self) -> str:  # pragma: no cover
        return (f"WorkerStream(master_seed={self.master_seed}, "
                f"worker_id={self.worker_id}, draw_index={self.draw_index})")


def worker_streams(master_seed: int, n_workers: int) -> list[WorkerStream]:
    return [WorkerStream(master_seed, i) for i in range(n_workers)]
