"""Synchronization topologies and communication accounting.

Model averaging is simulated, not distributed: both topologies produce the
same bits (the fixed-order pairwise mean over worker rows) and differ only in
what they would cost on a real network.  Costs are counted in full parameter
vectors of ``dim`` float64 coordinates:

* ``parameter_server``: every worker uploads its model and downloads the
  average -> 2N vectors per round.
* ``all_reduce``: ring all-reduce moves 2(N-1) chunks of size dim/N through
  every worker, i.e. 2(N-1)/N vectors per worker -> 2(N-1) vector-equivalents
  per round in total.

A :class:`CommLedger` accumulates rounds and derives vector/byte totals on
demand; :func:`rounds_expected` gives the closed form floor(T/I) for a fixed
averaging interval.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .numerics import pairwise_mean


class Topology(enum.Enum):
    PARAMETER_SERVER = "parameter_server"
    ALL_REDUCE = "all_reduce"


def vectors_per_round(topology: Topology, n_workers: int) -> int:
    if topology is Topology.PARAMETER_SERVER:
        return 2 * n_workers
    return 2 * (n_workers - 1)


@dataclass
class CommLedger:
    """Counts synchronization rounds and derives traffic totals."""

    topology: Topology
    n_workers: int
    dim: int
    rounds: int = 0
    formula: str = field(init=False)

    def __post_init__(self):
        if self.topology is Topology.PARAMETER_SERVER:
            self.formula = "vectors = rounds * 2N (N uploads + N downloads)"
        else:
            self.formula = ("vectors = rounds * 2(N-1) "
                            "(ring all-reduce: 2N(N-1) chunks of dim/N)")

    def record_round(self) -> None:
        self.rounds += 1

    @property
    def vectors(self) -> int:
        return self.rounds * vectors_per_round(self.topology, self.n_workers)

    @property
    def bytes(self) -> int:
        return self.vectors * self.dim * 8

    def as_dict(self) -> dict:
        return {
            "topology": self.topology.value,
            "n_workers": self.n_workers,
            "dim": self.dim,
            "rounds": self.rounds,
            "vectors": self.vectors,
            "bytes": self.bytes,
            "formula": self.formula,
        }


def reduce_average(states: np.ndarray, ledger: CommLedger | None = None) -> np.ndarray:
    """Average worker rows (N, dim) -> (dim,), charging one round to the ledger.

    Uses the fixed-order pairwise kernel, so the result is independent of
    topology and bitwise reproducible; for N a power of two, averaging N
    copies of the same vector returns that vector exactly.
    """
    out = pairwise_mean(states, axis=0)
    if ledger is not None:
        ledger.record_round()
    return out


def rounds_expected(total_steps: int, interval: int) -> int:
    """Synchronization rounds for T steps at fixed interval I: floor(T/I)."""
    if interval < 1 or total_steps < 0:
        raise ValueError("need interval >= 1 and total_steps >= 0")
    return total_steps // interval
