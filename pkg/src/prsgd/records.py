"""Run records: everything a simulation produces, in replayable form.

The statistic of interest is an average over *pre-step* averaged iterates
xbar^0 .. xbar^{T-1} (the model average before each step is taken), so dense
per-step series are indexed by tau = 0..T-1 and row tau describes xbar^tau;
the final model xbar^T is stored separately.  Dense series (squared gradient
norms, step sizes, active-worker counts) always have one entry per step.
Bulky per-point data (iterates, worker deviations, objective values) is
recorded on a stride that always includes tau = 0 and tau = T-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .comms import CommLedger

MAX_DENSE_RECORD_POINTS = 10_000


def default_record_stride(total_steps: int) -> int:
    """1 while every step fits under the cap, else the smallest thinning."""
    if total_steps <= MAX_DENSE_RECORD_POINTS:
        return 1
    return math.ceil(total_steps / MAX_DENSE_RECORD_POINTS)


def recorded_indices(total_steps: int, stride: int) -> np.ndarray:
    """Strided tau values, always including the first and last pre-step point."""
    if total_steps < 1 or stride < 1:
        raise ValueError("need total_steps >= 1 and stride >= 1")
    idx = np.arange(0, total_steps, stride, dtype=np.int64)
    if idx[-1] != total_steps - 1:
        idx = np.append(idx, total_steps - 1)
    return idx


@dataclass
class TrajectoryRecord:
    """Complete output of one simulated run."""

    algorithm: str
    suite_key: str
    config_key: str
    n_workers: int
    dim: int
    master_seed: int
    total_steps: int
    grad_evals: int
    # dense, one entry per step tau = 0..T-1 (pre-step quantities)
    sq_grad_norms: np.ndarray    # ||grad f(xbar^tau)||^2
    gammas: np.ndarray           # step size used for the step leaving xbar^tau
    active_counts: np.ndarray | None   # workers still running (heterogeneous)
    # strided
    rec_idx: np.ndarray          # recorded tau values
    xbar_rec: np.ndarray         # (R, dim) averaged iterates
    dev_sq_rec: np.ndarray       # (R,) max_i ||xbar^tau - x_i^tau||^2
    f_rec: np.ndarray            # (R,) f(xbar^tau)
    rounds_before_rec: np.ndarray  # (R,) sync rounds completed before tau
    # terminal state
    xbar_final: np.ndarray
    f_final: float
    ledger: CommLedger
    record_stride: int
    epoch_lengths: tuple[int, ...] = ()
    intervals: tuple[int, ...] | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        t = self.total_steps
        if len(self.sq_grad_norms) != t or len(self.gammas) != t:
            raise ValueError("dense series must have one entry per step")
        if self.active_counts is not None and len(self.active_counts) != t:
            raise ValueError("active_counts must have one entry per step")
        r = len(self.rec_idx)
        for name in ("xbar_rec", "dev_sq_rec", "f_rec", "rounds_before_rec"):
            if len(getattr(self, name)) != r:
                raise ValueError(f"{name} does not match rec_idx")

    def max_deviation_sq(self) -> float:
        return float(np.max(self.dev_sq_rec))

    def f_initial(self) -> float:
        return float(self.f_rec[0])

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n_workers": self.n_workers,
            "dim": self.dim,
            "master_seed": self.master_seed,
            "total_steps": self.total_steps,
            "grad_evals": self.grad_evals,
            "rounds": self.ledger.rounds,
            "comm_vectors": self.ledger.vectors,
            "comm_bytes": self.ledger.bytes,
            "f_initial": self.f_initial(),
            "f_final": self.f_final,
            "max_deviation_sq": self.max_deviation_sq(),
        }
