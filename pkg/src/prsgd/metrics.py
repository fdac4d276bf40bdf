"""Convergence statistics and certified bound evaluation.

The central statistic is the running average of squared gradient norms of the
averaged iterate, (1/T) * sum_{tau=0}^{T-1} ||grad f(xbar^tau)||^2, with two
weighted variants: step-size weights for diminishing schedules and
active-worker weights for heterogeneous runs (each step counts in proportion
to the fraction of workers that actually moved).

Bound evaluators compute the certified right-hand sides from a suite's
:class:`~prsgd.problems.ConstantCertificate` and *refuse* -- raising
:class:`CertificationError` -- whenever the certificate's hypotheses are not
met (non-global constants, step size above 1/L, non-constant step size where
a fixed one is assumed).  A refusal is not a failure of the bound; it means
the inequality was never claimed for that configuration.

Sampling noise is handled by aggregating the statistic over independent
seeds: a :class:`BoundReport` is ``satisfied`` when mean + 2*SE <= bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import corollary_gamma, plan_interval
from .problems import ConstantCertificate
from .records import TrajectoryRecord


class CertificationError(Exception):
    """The requested bound is not certified for this configuration."""


# -- statistics --------------------------------------------------------------

def avg_sq_grad_norm(record: TrajectoryRecord) -> float:
    """(1/T) sum_tau ||grad f(xbar^tau)||^2 over all pre-step points."""
    return math.fsum(record.sq_grad_norms.tolist()) / record.total_steps


def gamma_weighted_avg_sq_grad_norm(record: TrajectoryRecord) -> float:
    """Step-size-weighted variant: sum gamma_tau * norm_tau / sum gamma_tau."""
    w = record.gammas
    num = math.fsum((w * record.sq_grad_norms).tolist())
    return num / math.fsum(w.tolist())


def participation_weighted_avg_sq_grad_norm(record: TrajectoryRecord) -> float:
    """Active-worker-weighted variant for heterogeneous runs.

    Weight j_tau/N per step, normalized by the average local work
    (1/N) * sum_i I_i per epoch: algebraically sum(j*norm)/sum(j), with the
    integer weights exact in float64.
    """
    if record.active_counts is None:
        raise ValueError("record has no active-worker counts")
    j = record.active_counts.astype(float)
    num = math.fsum((j * record.sq_grad_norms).tolist())
    return num / math.fsum(j.tolist())


def aggregate_over_seeds(records: list[TrajectoryRecord], stat_fn) -> tuple[float, float]:
    """Mean and standard error of a statistic across independent seeds.

    Requires >= 2 records of the same configuration differing only in
    master_seed.
    """
    if len(records) < 2:
        raise ValueError("need at least two seeds to estimate a standard error")
    keys = {r.config_key for r in records}
    if len(keys) != 1:
        raise ValueError(f"records mix configurations: {sorted(keys)}")
    seeds = {r.master_seed for r in records}
    if len(seeds) != len(records):
        raise ValueError("records repeat a master_seed")
    vals = np.asarray([stat_fn(r) for r in records])
    mean = math.fsum(vals.tolist()) / len(vals)
    se = float(np.std(vals, ddof=1)) / math.sqrt(len(vals))
    return mean, se


# -- certified right-hand sides ----------------------------------------------

def lemma1_deviation_bound(gamma: float, interval: float, G: float) -> float:
    """4 gamma^2 I^2 G^2: pathwise cap on the worker-to-average deviation
    ||xbar - x_i||^2 under per-sample gradient norms <= G."""
    return 4.0 * gamma ** 2 * interval ** 2 * G ** 2


def theorem1_terms(delta_f: float, gamma: float, total_steps: int,
                   interval: int, n_workers: int,
                   cert: ConstantCertificate) -> dict[str, float]:
    return {
        "descent": 2.0 * delta_f / (gamma * total_steps),
        "drift": 4.0 * gamma ** 2 * interval ** 2 * cert.G ** 2 * cert.L ** 2,
        "variance": cert.L * gamma * cert.sigma ** 2 / n_workers,
    }


def theorem3_terms(delta_f: float, gamma: float, n_epochs: int,
                   intervals: tuple[int, ...], n_workers: int,
                   cert: ConstantCertificate) -> dict[str, float]:
    mean_interval = math.fsum(intervals) / n_workers
    return {
        "descent": 2.0 * delta_f / (gamma * n_epochs * mean_interval),
        "drift": 4.0 * gamma ** 2 * max(intervals) ** 2 * cert.G ** 2 * cert.L ** 2,
        "variance": cert.L * gamma * cert.sigma ** 2 / n_workers,
    }


def corollary1_bound(delta_f: float, total_steps: int, n_workers: int,
                     cert: ConstantCertificate) -> float:
    """(2 L delta + 4 G^2 + sigma^2) / sqrt(N T) at the prescribed step size."""
    num = 2.0 * cert.L * delta_f + 4.0 * cert.G ** 2 + cert.sigma ** 2
    return num / math.sqrt(n_workers * total_steps)


def _require_certifiable(cert: ConstantCertificate, gammas) -> None:
    if not cert.globally_valid:
        raise CertificationError(
            "suite constants are not globally valid (unbounded gradients); "
            "no bound is certified")
    if max(gammas) > 1.0 / cert.L:
        raise CertificationError(
            f"step size {max(gammas)!r} exceeds 1/L = {1.0 / cert.L!r}; "
            "the bound's hypothesis fails")


# -- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """Outcome of checking mean statistic (+2 SE) against a certified bound."""

    name: str
    statistic_mean: float
    statistic_se: float
    n_seeds: int
    bound: float
    terms: dict
    satisfied: bool

    @property
    def margin(self) -> float:
        """bound - (mean + 2 SE); nonnegative iff satisfied."""
        return self.bound - (self.statistic_mean + 2.0 * self.statistic_se)


def _common_setup(suite, records):
    cert = suite.certificate
    if any(r.suite_key != suite.cache_key for r in records):
        raise ValueError("records were produced on a different suite")
    f0 = records[0].f_initial()
    if any(r.f_initial() != f0 for r in records):
        raise ValueError("records disagree on the initial objective value")
    delta = f0 - cert.f_star
    return cert, delta


def _fixed_gamma(records) -> float:
    g = records[0].gammas
    for r in records:
        if not np.all(r.gammas == g[0]):
            raise ValueError("a fixed step size is required for this bound")
    return float(g[0])


def make_theorem1_report(suite, records: list[TrajectoryRecord]) -> BoundReport:
    """Fixed-interval convergence bound:
    2 delta/(gamma T) + 4 gamma^2 I^2 G^2 L^2 + L gamma sigma^2 / N."""
    cert, delta = _common_setup(suite, records)
    gamma = _fixed_gamma(records)
    _require_certifiable(cert, [gamma])
    total_steps = records[0].total_steps
    interval = max(records[0].epoch_lengths) if records[0].epoch_lengths else 1
    terms = theorem1_terms(delta, gamma, total_steps, interval,
                           suite.n_workers, cert)
    bound = math.fsum(terms.values())
    mean, se = aggregate_over_seeds(records, avg_sq_grad_norm)
    return BoundReport("theorem1", mean, se, len(records), bound, terms,
                       mean + 2.0 * se <= bound)


def make_theorem3_report(suite, records: list[TrajectoryRecord]) -> BoundReport:
    """Heterogeneous-interval bound on the participation-weighted statistic:
    2 delta/(gamma S Ibar) + 4 gamma^2 I_1^2 G^2 L^2 + L gamma sigma^2 / N."""
    cert, delta = _common_setup(suite, records)
    gamma = _fixed_gamma(records)
    _require_certifiable(cert, [gamma])
    intervals = records[0].intervals
    if intervals is None:
        raise ValueError("records do not carry per-worker intervals")
    n_epochs = len(records[0].epoch_lengths)
    terms = theorem3_terms(delta, gamma, n_epochs, intervals,
                           suite.n_workers, cert)
    bound = math.fsum(terms.values())
    mean, se = aggregate_over_seeds(records,
                                    participation_weighted_avg_sq_grad_norm)
    return BoundReport("theorem3", mean, se, len(records), bound, terms,
                       mean + 2.0 * se <= bound)


def make_corollary_report(suite, records: list[TrajectoryRecord]) -> BoundReport:
    """1/sqrt(NT)-regime bound; certifies only runs that actually use the
    prescribed step size and an interval within the planning rule."""
    cert, delta = _common_setup(suite, records)
    gamma = _fixed_gamma(records)
    _require_certifiable(cert, [gamma])
    total_steps = records[0].total_steps
    n = suite.n_workers
    prescribed = corollary_gamma(cert.L, total_steps, n)
    if gamma != prescribed:
        raise CertificationError(
            f"step size {gamma!r} is not the prescribed {prescribed!r}")
    interval = max(records[0].epoch_lengths) if records[0].epoch_lengths else 1
    allowed = plan_interval(total_steps, n)
    if interval > allowed:
        raise CertificationError(
            f"interval {interval} exceeds the planned maximum {allowed}")
    bound = corollary1_bound(delta, total_steps, n, cert)
    terms = {"numerator": 2.0 * cert.L * delta + 4.0 * cert.G ** 2 + cert.sigma ** 2,
             "scale": math.sqrt(n * total_steps)}
    mean, se = aggregate_over_seeds(records, avg_sq_grad_norm)
    return BoundReport("corollary1", mean, se, len(records), bound, terms,
                       mean + 2.0 * se <= bound)
