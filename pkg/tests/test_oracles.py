"""The verification battery must accept honest suites and reject tampered ones."""

import dataclasses
import math

import numpy as np
import pytest

from prsgd.engine import run_pr_sgd
from prsgd.metrics import avg_sq_grad_norm, lemma1_deviation_bound
from prsgd.oracles import (finite_diff_check, lower_bound_check,
                           mc_unbiasedness_check, noise_variance_check,
                           per_sample_norm_check, replay_equivalence,
                           run_oracle_battery, small_instance_exhaustive,
                           smoothness_check, tamper_certificate_G,
                           tamper_gradients, tamper_noise_scale,
                           tamper_sampler_bias)
from prsgd.problems import make_logistic_family, make_quadratic_family, make_sine_family


def sine():
    return make_sine_family(4, 8, 1.0, 0.5, seed=0)


def logistic():
    return make_logistic_family(4, 6, 32, 0.05, seed=0, shared_data=True)


# -- battery on honest suites ----------------------------------------------------

@pytest.mark.parametrize("factory", [sine, logistic], ids=["sine", "logistic"])
def test_battery_accepts_honest_suite(factory):
    verdicts = run_oracle_battery(factory())
    failed = [v.line() for v in verdicts if not v.passed]
    assert not failed, failed


def test_battery_covers_every_certified_constant():
    names = {v.name.split("[")[0] for v in run_oracle_battery(sine())}
    assert {"finite_diff", "smoothness", "unbiasedness", "noise_variance",
            "per_sample_norm", "lower_bound"} <= names


def test_per_sample_norm_skipped_when_unbounded():
    q = make_quadratic_family([[0.0], [2.0]], noise_halfwidth=0.1)
    v = per_sample_norm_check(q)
    assert v.passed and "skip" in v.detail.lower()


# -- tamper controls: each specific lie is caught by the matching check -----------

def test_scaled_gradients_fail_finite_diff():
    assert finite_diff_check(sine()).passed
    assert not finite_diff_check(tamper_gradients(sine())).passed


def test_biased_sampler_fails_unbiasedness():
    s = sine()
    x = np.full(8, 0.3)
    assert mc_unbiasedness_check(s, 0, x).passed
    assert not mc_unbiasedness_check(tamper_sampler_bias(s), 0, x).passed


def test_inflated_noise_fails_variance_check():
    s = sine()
    x = np.zeros(8)
    assert noise_variance_check(s, 0, x).passed
    assert not noise_variance_check(tamper_noise_scale(s), 0, x).passed


def test_understated_G_fails_norm_check():
    assert per_sample_norm_check(sine()).passed
    assert not per_sample_norm_check(tamper_certificate_G(sine())).passed


def test_understated_f_star_fails_lower_bound():
    s = sine()
    lifted = dataclasses.replace(s.certificate, f_star=s.certificate.f_star + 1.0)
    s.certificate = lifted
    assert not lower_bound_check(s).passed


def test_smoothness_check_catches_understated_L():
    s = sine()
    s.certificate = dataclasses.replace(s.certificate, L=s.certificate.L / 4.0)
    assert not smoothness_check(s).passed


# -- replay -----------------------------------------------------------------------

def test_replay_equivalence_detects_tampering():
    s = sine()
    a = run_pr_sgd(s, 16, 4, 0.05, master_seed=1)
    b = run_pr_sgd(s, 16, 4, 0.05, master_seed=1)
    assert replay_equivalence(a, b).passed
    b.sq_grad_norms[7] *= 1.0 + 2 ** -50   # one bit of drift, one entry
    v = replay_equivalence(a, b)
    assert not v.passed
    assert "sq_grad_norms" in v.detail


# -- exhaustive enumeration --------------------------------------------------------

def test_exhaustive_noise_free_path_matches_engine_exactly():
    """With a single zero atom there is one path, and the pure-Python
    re-implementation must agree with the vectorized engine to the last bit."""
    s = make_sine_family(2, 1, 1.0, 0.0, seed=12, noise_atoms=(0.0,))
    phases = [list(row) for row in s.phases]
    ex = small_instance_exhaustive(phases, 1.0, (0.0,), gamma=0.1,
                                   interval=2, total_steps=6)
    rec = run_pr_sgd(s, 6, 2, 0.1, master_seed=0)
    assert ex["n_paths"] == 1
    assert ex["mean_stat"] == avg_sq_grad_norm(rec)
    assert ex["max_dev_sq"] == rec.max_deviation_sq()


def test_exhaustive_mean_matches_engine_monte_carlo():
    """Exact expectation over all 729 noise paths vs the engine's sample mean
    over 200 master seeds: they must agree within 5 standard errors."""
    atoms = (-0.3, 0.0, 0.3)
    s = make_sine_family(2, 1, 1.0, 0.3, seed=12, noise_atoms=atoms)
    phases = [list(row) for row in s.phases]
    ex = small_instance_exhaustive(phases, 1.0, atoms, gamma=0.1,
                                   interval=2, total_steps=3)
    assert ex["n_paths"] == 729
    vals = [avg_sq_grad_norm(run_pr_sgd(s, 3, 2, 0.1, master_seed=m))
            for m in range(200)]
    mean = np.mean(vals)
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(mean - ex["mean_stat"]) <= 5 * se
    assert ex["min_stat"] <= min(vals) and max(vals) <= ex["max_stat"]


def test_exhaustive_deviations_respect_pathwise_bound():
    atoms = (-0.3, 0.0, 0.3)
    s = make_sine_family(2, 1, 1.0, 0.3, seed=12, noise_atoms=atoms)
    phases = [list(row) for row in s.phases]
    ex = small_instance_exhaustive(phases, 1.0, atoms, gamma=0.1,
                                   interval=2, total_steps=4, max_paths=6561)
    assert ex["max_dev_sq"] <= lemma1_deviation_bound(0.1, 2, s.certificate.G)


def test_exhaustive_refuses_blowup():
    with pytest.raises(ValueError):
        small_instance_exhaustive([[0.1], [0.2]], 1.0, (-0.1, 0.0, 0.1),
                                  gamma=0.1, interval=2, total_steps=10)
