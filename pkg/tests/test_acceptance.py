"""Acceptance gate: nine certified end-to-end checks, one test per criterion.

Each test is self-contained, uses pinned constants and seeds, and asserts its
own wall-clock budget, so `pytest -v tests/test_acceptance.py` reads as a
pass/fail line per criterion.
"""

import math
import time

import mpmath
import numpy as np
import pytest

from prsgd.cli import fit_rate_slope
from prsgd.comms import rounds_expected
from prsgd.engine import (corollary_gamma, decaying_schedule, plan_interval,
                          run_heterogeneous, run_minibatch_baseline,
                          run_one_shot, run_pr_sgd, run_time_varying)
from prsgd.metrics import (aggregate_over_seeds, avg_sq_grad_norm,
                           lemma1_deviation_bound, make_theorem1_report,
                           make_theorem3_report)
from prsgd.oracles import (finite_diff_check, mc_unbiasedness_check,
                           noise_variance_check, per_sample_norm_check,
                           replay_equivalence, run_oracle_battery,
                           small_instance_exhaustive, tamper_certificate_G,
                           tamper_gradients, tamper_noise_scale,
                           tamper_sampler_bias)
from prsgd.problems import make_logistic_family, make_sine_family


def sine_suite(**kw):
    return make_sine_family(4, 8, 1.0, 0.5, seed=7, **kw)


def test_criterion_01_bitwise_equivalence_identities():
    """Four exact identities, each under one second."""
    gamma, total = 0.05, 64

    t0 = time.perf_counter()
    s = sine_suite()
    every_step = run_pr_sgd(s, total, 1, gamma, master_seed=0)
    baseline = run_minibatch_baseline(s, total, gamma, master_seed=0)
    assert np.array_equal(every_step.sq_grad_norms, baseline.sq_grad_norms)
    assert np.array_equal(every_step.xbar_final, baseline.xbar_final)
    assert every_step.f_final == baseline.f_final
    assert time.perf_counter() - t0 < 1.0

    t0 = time.perf_counter()
    shared = sine_suite(shared_phases=True)
    fixed = run_pr_sgd(shared, total, 4, gamma, master_seed=0)
    uniform = run_heterogeneous(shared, [4, 4, 4, 4], total // 4, gamma,
                                master_seed=0)
    assert np.array_equal(fixed.sq_grad_norms, uniform.sq_grad_norms)
    assert np.array_equal(fixed.xbar_final, uniform.xbar_final)
    assert time.perf_counter() - t0 < 1.0

    t0 = time.perf_counter()
    tv = run_time_varying(s, [total], [gamma], master_seed=0)
    one = run_one_shot(s, total, gamma, master_seed=0)
    assert np.array_equal(tv.sq_grad_norms, one.sq_grad_norms)
    assert np.array_equal(tv.xbar_final, one.xbar_final)
    assert time.perf_counter() - t0 < 1.0

    t0 = time.perf_counter()
    serial = run_pr_sgd(s, total, 4, gamma, master_seed=0, n_threads=1)
    threaded = run_pr_sgd(s, total, 4, gamma, master_seed=0, n_threads=4)
    verdict = replay_equivalence(serial, threaded)
    assert verdict.passed, verdict.detail
    assert time.perf_counter() - t0 < 1.0


def test_criterion_02_pathwise_deviation_bound():
    """Every realized worker deviation obeys 4 gamma^2 I^2 G^2 -- all steps,
    all intervals, all seeds."""
    t0 = time.perf_counter()
    s = sine_suite()
    gamma, total = 0.05, 2048
    worst = 0.0
    for interval in (2, 8, 32):
        cap = lemma1_deviation_bound(gamma, interval, s.certificate.G)
        for seed in range(8):
            rec = run_pr_sgd(s, total, interval, gamma, master_seed=seed)
            assert len(rec.dev_sq_rec) == total        # dense recording
            top = rec.max_deviation_sq()
            assert top <= cap, (interval, seed, top, cap)
            worst = max(worst, top / cap)
    elapsed = time.perf_counter() - t0
    print(f"criterion 2: worst deviation/bound ratio {worst:.4f}, "
          f"{elapsed:.1f}s")
    assert elapsed < 10.0


def test_criterion_03_fixed_interval_bound_on_grid():
    """mean + 2 SE of the averaged-gradient statistic stays under the
    certified fixed-interval bound at all 18 grid points."""
    t0 = time.perf_counter()
    worst = 0.0
    for n in (2, 4, 8):
        s = make_sine_family(n, 8, 1.0, 0.5, seed=7)
        inv_l = 1.0 / s.certificate.L
        for total in (1024, 4096):
            gamma = min(corollary_gamma(s.certificate.L, total, n), inv_l)
            for interval in (1, 4, 16):
                recs = [run_pr_sgd(s, total, interval, gamma, master_seed=m)
                        for m in range(16)]
                rep = make_theorem1_report(s, recs)
                assert rep.satisfied, (n, total, interval, rep)
                worst = max(worst,
                            (rep.statistic_mean + 2 * rep.statistic_se) / rep.bound)
    elapsed = time.perf_counter() - t0
    print(f"criterion 3: worst (mean+2SE)/bound ratio {worst:.4f}, "
          f"{elapsed:.1f}s")
    assert elapsed < 120.0


def test_criterion_04_rate_slope_in_T():
    """Log-log slope of the statistic against T under the planned interval
    and prescribed step size lands in the 1/sqrt(T) band."""
    t0 = time.perf_counter()
    s = make_sine_family(4, 8, 1.0, 2.0, seed=11)   # noise-dominated regime
    ts = [2 ** 12, 2 ** 14, 2 ** 16, 2 ** 18]
    by_seed = []
    for total in ts:
        gamma = corollary_gamma(s.certificate.L, total, 4)
        interval = plan_interval(total, 4)
        by_seed.append([avg_sq_grad_norm(
            run_pr_sgd(s, total, interval, gamma, master_seed=m))
            for m in range(16)])
    slope, (lo, hi) = fit_rate_slope([float(t) for t in ts], by_seed)
    elapsed = time.perf_counter() - t0
    print(f"criterion 4: slope {slope:.4f}, 95% CI [{lo:.4f}, {hi:.4f}], "
          f"{elapsed:.1f}s")
    assert -0.65 <= slope <= -0.35
    assert elapsed < 600.0


def test_criterion_05_speedup_in_N():
    """At fixed T the statistic strictly decreases in N, separated by 2 SE
    bands (identical components so only parallelism varies)."""
    t0 = time.perf_counter()
    total = 2 ** 16
    levels = []
    for n in (1, 2, 4, 8):
        s = make_sine_family(n, 8, 1.0, 0.5, seed=11, shared_phases=True)
        gamma = corollary_gamma(s.certificate.L, total, n)
        interval = plan_interval(total, n)
        recs = [run_pr_sgd(s, total, interval, gamma, master_seed=m)
                for m in range(16)]
        levels.append(aggregate_over_seeds(recs, avg_sq_grad_norm))
    elapsed = time.perf_counter() - t0
    print("criterion 5: " + ", ".join(
        f"N={n}: {m:.5f}+-{2 * se:.5f}" for n, (m, se)
        in zip((1, 2, 4, 8), levels)) + f", {elapsed:.1f}s")
    for (m_lo, se_lo), (m_hi, se_hi) in zip(levels, levels[1:]):
        assert m_lo - 2 * se_lo > m_hi + 2 * se_hi
    assert elapsed < 600.0


def test_criterion_06_communication_round_reduction():
    """Exact round ledger: 13107 rounds at the planned interval vs 65536
    at interval 1, for the same step budget."""
    total, n = 65536, 4
    interval = plan_interval(total, n)
    assert interval == 5
    assert rounds_expected(total, interval) == 13107
    s = make_sine_family(n, 2, 1.0, 0.5, seed=7)
    gamma = corollary_gamma(s.certificate.L, total, n)
    planned = run_pr_sgd(s, total, interval, gamma, master_seed=0)
    dense = run_pr_sgd(s, total, 1, gamma, master_seed=0)
    assert planned.ledger.rounds == 13107
    assert dense.ledger.rounds == 65536
    assert planned.ledger.vectors == 13107 * 2 * n


def test_criterion_07_decaying_schedule_exactness():
    """Schedule values agree exactly with an independent evaluation: epoch
    lengths by pure-integer inequalities, step sizes by 240-bit arithmetic."""
    t0 = time.perf_counter()
    for n in (1, 2, 4):
        lengths, gammas = decaying_schedule(n, 10 ** 4)
        with mpmath.workprec(240):
            for s in range(1, 10 ** 4 + 1):
                k = int(lengths[s - 1])
                # K is the least integer with s <= (K N)^3
                assert (k * n) ** 3 >= s
                assert ((k - 1) * n) ** 3 < s
                want = float(mpmath.mpf(n) *
                             mpmath.exp(mpmath.mpf(-2) / 3 * mpmath.log(s)))
                assert gammas[s - 1] == want, (n, s)
    elapsed = time.perf_counter() - t0
    print(f"criterion 7: 3 x 10^4 schedule entries exact, {elapsed:.1f}s")


def test_criterion_08_heterogeneous_weighted_bound():
    """Participation-weighted statistic of a straggler run stays under the
    heterogeneous bound on the shared-data logistic family."""
    t0 = time.perf_counter()
    s = make_logistic_family(4, 8, 32, 0.05, seed=5, shared_data=True)
    gamma = 0.1
    assert gamma <= 1.0 / s.certificate.L
    recs = [run_heterogeneous(s, [8, 8, 4, 2], 64, gamma, master_seed=m)
            for m in range(16)]
    rep = make_theorem3_report(s, recs)
    elapsed = time.perf_counter() - t0
    print(f"criterion 8: mean+2SE {rep.statistic_mean + 2 * rep.statistic_se:.6f}"
          f" <= bound {rep.bound:.5f}, {elapsed:.1f}s")
    assert rep.satisfied
    assert elapsed < 60.0


def test_criterion_09_oracle_suite_green_and_controls_fail():
    """Honest suites pass every oracle; tampered twins are rejected; the
    exhaustive instance obeys the pathwise bound and predicts the engine."""
    t0 = time.perf_counter()
    for suite in (sine_suite(), make_logistic_family(4, 6, 32, 0.05, seed=0,
                                                     shared_data=True)):
        verdicts = run_oracle_battery(suite)
        bad = [v.line() for v in verdicts if not v.passed]
        assert not bad, bad

    atoms = (-0.3, 0.0, 0.3)
    s = make_sine_family(2, 1, 1.0, 0.3, seed=12, noise_atoms=atoms)
    phases = [list(row) for row in s.phases]
    exact = small_instance_exhaustive(phases, 1.0, atoms, gamma=0.1,
                                      interval=2, total_steps=3)
    assert exact["n_paths"] == 729
    assert exact["max_dev_sq"] <= lemma1_deviation_bound(
        0.1, 2, s.certificate.G)
    vals = [avg_sq_grad_norm(run_pr_sgd(s, 3, 2, 0.1, master_seed=m))
            for m in range(200)]
    se = float(np.std(vals, ddof=1)) / math.sqrt(len(vals))
    assert abs(float(np.mean(vals)) - exact["mean_stat"]) <= 5 * se

    base = sine_suite()
    x = np.zeros(base.dim)
    assert not finite_diff_check(tamper_gradients(base)).passed
    assert not mc_unbiasedness_check(tamper_sampler_bias(base), 0, x).passed
    assert not noise_variance_check(tamper_noise_scale(base), 0, x).passed
    assert not per_sample_norm_check(tamper_certificate_G(base)).passed
    elapsed = time.perf_counter() - t0
    print(f"criterion 9: oracles green, 4/4 controls rejected, {elapsed:.1f}s")
    assert elapsed < 60.0
