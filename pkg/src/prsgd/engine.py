"""Simulation engines for parallel restarted SGD and its variants.

All variants share one epoch-structured core.  An *epoch* is a span of local
steps between synchronizations: every worker starts the epoch at the same
point (the previous reduction's output, exactly), runs its own SGD steps from
its own RNG stream, and -- if the epoch ends with a reset -- all workers are
atomically replaced by the reduced average.  Because every epoch starts at a
known common point, worker states after a reset are bitwise identical across
workers by construction.

The fixed-interval runner covers the classical scheme (interval I, reset
every I steps, floor(T/I) synchronization rounds), with I = 1 degenerating to
fully synchronous minibatch SGD and I = T to a single one-shot average.  The
time-varying runner takes per-epoch (length, step size) schedules; the
heterogeneous runner lets each worker run a different number of local steps
per epoch, freezing finished workers in place until the next reset (frozen
workers consume no RNG draws and are excluded from gradient-evaluation
counts).

Determinism contract: serial and threaded execution produce bitwise identical
records, and records are a pure function of (suite, schedule, master_seed) --
independent of topology, thread count, and recording stride.
"""
from __future__ import annotations

import hashlib
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import mpmath
import numpy as np

from .comms import CommLedger, Topology, reduce_average
from .numerics import pairwise_mean, sq_norm_rows
from .problems import eval_f
from .records import TrajectoryRecord, default_record_stride, recorded_indices
from .rng import worker_streams


class StepSizeWarning(UserWarning):
    """Emitted when a run uses gamma > 1/L; the run proceeds, but the
    convergence guarantees (and the bound evaluators) do not apply."""


@dataclass(frozen=True)
class _Epoch:
    lengths: np.ndarray      # (N,) local steps per worker this epoch
    gamma: float
    reset_after: bool


def _warn_if_gamma_large(gammas, certificate) -> None:
    if max(gammas) > 1.0 / certificate.L:
        warnings.warn(
            f"step size {max(gammas)!r} exceeds 1/L = {1.0 / certificate.L!r}; "
            "convergence guarantees do not apply", StepSizeWarning, stacklevel=3)


def _pad_blocks(blocks: list[np.ndarray], n_rows: int) -> np.ndarray:
    """Stack per-worker presampled blocks into (n_rows, N, ...), zero-padded.

    Padding rows are never read: step k only touches row k-1 of workers with
    lengths >= k, and those rows came from the worker's own stream.
    """
    trailing = blocks[0].shape[1:]
    pad = np.zeros((n_rows, len(blocks)) + trailing, dtype=blocks[0].dtype)
    for i, b in enumerate(blocks):
        pad[: b.shape[0], i] = b
    return pad


def _simulate_epoch_serial(suite, start, epoch, streams):
    n = suite.n_workers
    span = int(epoch.lengths.max())
    blocks = [suite.presample(streams[i], int(epoch.lengths[i]))
              for i in range(n)]
    pad = _pad_blocks(blocks, span)
    traj = np.empty((span + 1, n, suite.dim))
    traj[0] = start
    all_idx = np.arange(n)
    uniform = bool(np.all(epoch.lengths == span))
    for k in range(1, span + 1):
        if uniform:
            x = traj[k - 1]
            traj[k] = x - epoch.gamma * suite.stoch_rows(x, pad[k - 1], all_idx)
        else:
            traj[k] = traj[k - 1]
            idx = np.flatnonzero(epoch.lengths >= k)
            x = traj[k - 1][idx]
            traj[k][idx] = x - epoch.gamma * suite.stoch_rows(
                x, pad[k - 1][idx], idx)
    return traj


def _simulate_epoch_threaded(suite, start, epoch, streams, pool):
    n = suite.n_workers
    span = int(epoch.lengths.max())
    # presample serially so stream consumption order never depends on threads
    blocks = [suite.presample(streams[i], int(epoch.lengths[i]))
              for i in range(n)]
    traj = np.empty((span + 1, n, suite.dim))
    traj[0] = start

    def run_worker(i: int) -> None:
        x = traj[0, i].copy()
        mine = np.asarray([i])
        steps = int(epoch.lengths[i])
        for k in range(1, steps + 1):
            g = suite.stoch_rows(x[None, :], blocks[i][k - 1:k], mine)
            x = x - epoch.gamma * g[0]
            traj[k, i] = x
        traj[steps + 1:, i] = x

    list(pool.map(run_worker, range(n)))
    return traj


def _active_counts(lengths: np.ndarray, span: int) -> np.ndarray:
    """j_k = number of workers still stepping at local step k = 1..span."""
    return np.asarray([int(np.sum(lengths >= k)) for k in range(1, span + 1)],
                      dtype=np.int64)


def _f_values(suite, points: np.ndarray) -> np.ndarray:
    """f at each row, with the exact (fsum) component average of eval_f."""
    vals = suite.values_at_many(points)
    return np.asarray([math.fsum(row.tolist()) / suite.n_workers
                       for row in vals])


def _resolve_x0(suite, x0) -> np.ndarray:
    if x0 is None:
        return np.zeros(suite.dim)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (suite.dim,):
        raise ValueError(f"x0 has shape {x0.shape}, suite dimension is "
                         f"{suite.dim}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    return x0.copy()


def _run_epochs(suite, epochs, master_seed, *, topology, n_threads,
                record_stride, algorithm, config_key, x0=None,
                count_active=False, intervals=None, extras=None):
    n, dim = suite.n_workers, suite.dim
    if x0 is not None:
        digest = hashlib.sha256(np.asarray(x0, dtype=float).tobytes())
        config_key += f"+x0:{digest.hexdigest()[:12]}"
    total = sum(int(ep.lengths.max()) for ep in epochs)
    stride = record_stride if record_stride is not None else default_record_stride(total)
    rec = recorded_indices(total, stride)

    streams = worker_streams(master_seed, n)
    ledger = CommLedger(topology, n, dim)
    pool = ThreadPoolExecutor(max_workers=n_threads) if n_threads > 1 else None

    norms = np.empty(total)
    gammas = np.empty(total)
    active = np.empty(total, dtype=np.int64) if count_active else None
    xbar_rec = np.empty((len(rec), dim))
    dev_rec = np.empty(len(rec))
    f_rec = np.empty(len(rec))
    rounds_rec = np.empty(len(rec), dtype=np.int64)

    w = _resolve_x0(suite, x0)
    pos = 0          # cursor into rec
    t0 = 0           # global steps completed before this epoch
    grad_evals = 0
    try:
        for ep in epochs:
            span = int(ep.lengths.max())
            if pool is None:
                traj = _simulate_epoch_serial(suite, w, ep, streams)
            else:
                traj = _simulate_epoch_threaded(suite, w, ep, streams, pool)
            if not np.all(np.isfinite(traj[span])):
                raise FloatingPointError(
                    f"non-finite worker state after step {t0 + span} "
                    f"(gamma={ep.gamma!r} diverged?)")
            grad_evals += int(ep.lengths.sum())

            xbars = pairwise_mean(traj, axis=1)
            xbars[0] = w  # the epoch start is common across workers: keep it exact
            gbar = pairwise_mean(suite.grads_at_many(xbars[:span]), axis=1)
            norms[t0:t0 + span] = sq_norm_rows(gbar)
            gammas[t0:t0 + span] = ep.gamma
            if count_active:
                active[t0:t0 + span] = _active_counts(ep.lengths, span)

            while pos < len(rec) and rec[pos] < t0 + span:
                lo = int(rec[pos] - t0)
                xbar_rec[pos] = xbars[lo]
                dev_rec[pos] = float(np.max(sq_norm_rows(traj[lo] - xbars[lo])))
                rounds_rec[pos] = ledger.rounds
                pos += 1

            if ep.reset_after:
                w = reduce_average(traj[span], ledger)
            else:
                # evaluation output only; not an algorithm round
                w = pairwise_mean(traj[span], axis=0)
            t0 += span
    finally:
        if pool is not None:
            pool.shutdown()

    f_rec[:] = _f_values(suite, xbar_rec)
    return TrajectoryRecord(
        algorithm=algorithm,
        suite_key=suite.cache_key,
        config_key=config_key,
        n_workers=n,
        dim=dim,
        master_seed=master_seed,
        total_steps=total,
        grad_evals=grad_evals,
        sq_grad_norms=norms,
        gammas=gammas,
        active_counts=active,
        rec_idx=rec,
        xbar_rec=xbar_rec,
        dev_sq_rec=dev_rec,
        f_rec=f_rec,
        rounds_before_rec=rounds_rec,
        xbar_final=w,
        f_final=eval_f(suite, w),
        ledger=ledger,
        record_stride=stride,
        epoch_lengths=tuple(int(ep.lengths.max()) for ep in epochs),
        intervals=intervals,
        extras=extras or {},
    )


# -- public runners ----------------------------------------------------------

def run_pr_sgd(suite, total_steps: int, interval: int, gamma: float,
               master_seed: int, *, topology: Topology = Topology.PARAMETER_SERVER,
               n_threads: int = 1, record_stride: int | None = None,
               x0=None, _label: str = "pr_sgd") -> TrajectoryRecord:
    """Fixed averaging interval: reset every ``interval`` steps, floor(T/I)
    rounds in total (a trailing partial epoch runs without a reset)."""
    if total_steps < 1 or interval < 1 or gamma <= 0:
        raise ValueError("need total_steps >= 1, interval >= 1, gamma > 0")
    _warn_if_gamma_large([gamma], suite.certificate)
    full, rem = divmod(total_steps, interval)
    lengths = np.full(suite.n_workers, interval, dtype=np.int64)
    epochs = [_Epoch(lengths, gamma, True)] * full
    if rem:
        epochs = epochs + [_Epoch(np.full(suite.n_workers, rem, dtype=np.int64),
                                  gamma, False)]
    key = (f"{_label}(suite={suite.cache_key},T={total_steps},I={interval},"
           f"gamma={gamma!r},topology={topology.value})")
    return _run_epochs(suite, epochs, master_seed, topology=topology,
                       n_threads=n_threads, record_stride=record_stride,
                       algorithm=_label, config_key=key, x0=x0)


def run_one_shot(suite, total_steps: int, gamma: float, master_seed: int,
                 **kwargs) -> TrajectoryRecord:
    """Single averaging at the very end (interval = T, one round)."""
    return run_pr_sgd(suite, total_steps, total_steps, gamma, master_seed,
                      _label="one_shot", **kwargs)


def run_minibatch_baseline(suite, total_steps: int, gamma: float,
                           master_seed: int, *,
                           topology: Topology = Topology.PARAMETER_SERVER,
                           record_stride: int | None = None,
                           x0=None) -> TrajectoryRecord:
    """Fully synchronous SGD: every worker steps once from the common point,
    states are averaged, repeat.  Averaging states equals the classical
    gamma * (mean gradient) update in exact arithmetic, and is implemented as
    the state average so one round of the same reduction happens per step.

    Deliberately a separate stepwise implementation (not the epoch engine):
    it must reproduce the interval-1 runner bit for bit, which makes the two
    code paths checks on each other.
    """
    if total_steps < 1 or gamma <= 0:
        raise ValueError("need total_steps >= 1 and gamma > 0")
    _warn_if_gamma_large([gamma], suite.certificate)
    n, dim = suite.n_workers, suite.dim
    stride = record_stride if record_stride is not None else default_record_stride(total_steps)
    rec = recorded_indices(total_steps, stride)
    streams = worker_streams(master_seed, n)
    ledger = CommLedger(topology, n, dim)
    blocks = [suite.presample(streams[i], total_steps) for i in range(n)]
    pad = _pad_blocks(blocks, total_steps)
    all_idx = np.arange(n)

    ws = np.empty((total_steps + 1, dim))
    w = _resolve_x0(suite, x0)
    ws[0] = w
    for t in range(1, total_steps + 1):
        x = np.repeat(w[None, :], n, axis=0)
        z = x - gamma * suite.stoch_rows(x, pad[t - 1], all_idx)
        w = reduce_average(z, ledger)
        ws[t] = w
    if not np.all(np.isfinite(w)):
        raise FloatingPointError(
            f"non-finite state after step {total_steps} (gamma={gamma!r} "
            "diverged?)")

    gbar = pairwise_mean(suite.grads_at_many(ws[:total_steps]), axis=1)
    norms = sq_norm_rows(gbar)
    f_rec = _f_values(suite, ws[rec])
    key = (f"minibatch_baseline(suite={suite.cache_key},T={total_steps},"
           f"gamma={gamma!r},topology={topology.value})")
    if x0 is not None:
        digest = hashlib.sha256(np.asarray(x0, dtype=float).tobytes())
        key += f"+x0:{digest.hexdigest()[:12]}"
    return TrajectoryRecord(
        algorithm="minibatch_baseline",
        suite_key=suite.cache_key,
        config_key=key,
        n_workers=n,
        dim=dim,
        master_seed=master_seed,
        total_steps=total_steps,
        grad_evals=n * total_steps,
        sq_grad_norms=norms,
        gammas=np.full(total_steps, gamma),
        active_counts=None,
        rec_idx=rec,
        xbar_rec=ws[rec],
        dev_sq_rec=np.zeros(len(rec)),  # pre-step states coincide by construction
        f_rec=f_rec,
        rounds_before_rec=rec.astype(np.int64),
        xbar_final=w,
        f_final=eval_f(suite, w),
        ledger=ledger,
        record_stride=stride,
    )


def run_time_varying(suite, epoch_lengths, epoch_gammas, master_seed: int, *,
                     topology: Topology = Topology.PARAMETER_SERVER,
                     n_threads: int = 1, record_stride: int | None = None,
                     x0=None) -> TrajectoryRecord:
    """Per-epoch (length, step size) schedule; resets between epochs only,
    so S epochs cost S-1 rounds."""
    lengths = [int(k) for k in epoch_lengths]
    gammas = [float(g) for g in epoch_gammas]
    if len(lengths) != len(gammas) or not lengths:
        raise ValueError("epoch_lengths and epoch_gammas must match and be nonempty")
    if min(lengths) < 1 or min(gammas) <= 0:
        raise ValueError("epoch lengths must be >= 1 and step sizes > 0")
    _warn_if_gamma_large(gammas, suite.certificate)
    last = len(lengths) - 1
    epochs = [_Epoch(np.full(suite.n_workers, k, dtype=np.int64), g, s != last)
              for s, (k, g) in enumerate(zip(lengths, gammas))]
    digest = hashlib.sha256(repr((lengths, gammas)).encode()).hexdigest()[:12]
    key = (f"time_varying(suite={suite.cache_key},S={len(lengths)},"
           f"schedule={digest},topology={topology.value})")
    return _run_epochs(suite, epochs, master_seed, topology=topology,
                       n_threads=n_threads, record_stride=record_stride,
                       algorithm="time_varying", config_key=key, x0=x0,
                       extras={"epoch_gammas": tuple(gammas)})


def run_heterogeneous(suite, intervals, n_epochs: int, gamma: float,
                      master_seed: int, *,
                      topology: Topology = Topology.PARAMETER_SERVER,
                      n_threads: int = 1, record_stride: int | None = None,
                      x0=None) -> TrajectoryRecord:
    """Per-worker local-step counts I_1 >= ... >= I_N, restarted for
    ``n_epochs`` epochs; workers that finish early freeze until the reset.

    Requires a suite whose components are identically distributed (shared
    phases / shared data): with heterogeneous step counts the workers no
    longer weight their components equally, which is only harmless when the
    components agree.
    """
    iv = tuple(int(i) for i in intervals)
    if len(iv) != suite.n_workers:
        raise ValueError("need one interval per worker")
    if min(iv) < 1:
        raise ValueError("intervals must be >= 1")
    if any(a < b for a, b in zip(iv, iv[1:])):
        raise ValueError("intervals must be nonincreasing")
    if n_epochs < 1 or gamma <= 0:
        raise ValueError("need n_epochs >= 1 and gamma > 0")
    if not suite.identical_distributions:
        raise ValueError("heterogeneous intervals require identically "
                         "distributed components (shared phases/data)")
    _warn_if_gamma_large([gamma], suite.certificate)
    lengths = np.asarray(iv, dtype=np.int64)
    epochs = [_Epoch(lengths, gamma, s != n_epochs - 1) for s in range(n_epochs)]
    key = (f"heterogeneous(suite={suite.cache_key},I={iv},S={n_epochs},"
           f"gamma={gamma!r},topology={topology.value})")
    return _run_epochs(suite, epochs, master_seed, topology=topology,
                       n_threads=n_threads, record_stride=record_stride,
                       algorithm="heterogeneous", config_key=key, x0=x0,
                       count_active=True, intervals=iv)


# -- schedule recipes --------------------------------------------------------

def plan_interval(total_steps: int, n_workers: int) -> int:
    """Largest integer interval I with I <= T^(1/4) / N^(3/4), at least 1.

    Exact integer arithmetic: I satisfies the inequality iff I^4 * N^3 <= T.
    Requires T >= N (fewer steps than workers leaves the rate regime).
    """
    if n_workers < 1:
        raise ValueError("n_workers must be positive")
    if total_steps < n_workers:
        raise ValueError("need total_steps >= n_workers")
    q = 1
    while (q + 1) ** 4 * n_workers ** 3 <= total_steps:
        q += 1
    return q


def corollary_gamma(L: float, total_steps: int, n_workers: int) -> float:
    """sqrt(N) / (L * sqrt(T)) -- the step size of the 1/sqrt(NT) regime."""
    if L <= 0 or total_steps < 1 or n_workers < 1:
        raise ValueError("need L > 0, total_steps >= 1, n_workers >= 1")
    return math.sqrt(n_workers) / (L * math.sqrt(total_steps))


def _icbrt_ceil(s: int) -> int:
    """Smallest integer c with c^3 >= s (exact, no float cube roots)."""
    c = max(1, round(s ** (1.0 / 3.0)))
    while c ** 3 < s:
        c += 1
    while c > 1 and (c - 1) ** 3 >= s:
        c -= 1
    return c


def decaying_schedule(n_workers: int, n_epochs: int):
    """The diminishing schedule K^s = ceil(s^(1/3)/N), gamma^s = N * s^(-2/3).

    Epoch lengths are exact integers (ceil(x/N) = ceil(ceil(x)/N) for integer
    N, with ceil(s^(1/3)) computed by integer search).  Step sizes are
    evaluated in high-precision arithmetic and rounded once to float64.
    """
    if n_workers < 1 or n_epochs < 1:
        raise ValueError("need n_workers >= 1 and n_epochs >= 1")
    lengths = np.empty(n_epochs, dtype=np.int64)
    gammas = np.empty(n_epochs)
    with mpmath.workprec(120):
        for s in range(1, n_epochs + 1):
            lengths[s - 1] = -(-_icbrt_ceil(s) // n_workers)
            gammas[s - 1] = float(mpmath.mpf(n_workers) / mpmath.cbrt(s) ** 2)
    return lengths, gammas
