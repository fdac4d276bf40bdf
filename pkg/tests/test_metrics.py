"""Statistics and certified bound arithmetic."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prsgd.comms import CommLedger, Topology
from prsgd.engine import corollary_gamma, run_heterogeneous, run_pr_sgd
from prsgd.metrics import (BoundReport, CertificationError,
                           aggregate_over_seeds, avg_sq_grad_norm,
                           corollary1_bound, gamma_weighted_avg_sq_grad_norm,
                           lemma1_deviation_bound, make_corollary_report,
                           make_theorem1_report, make_theorem3_report,
                           participation_weighted_avg_sq_grad_norm,
                           theorem1_terms, theorem3_terms)
from prsgd.problems import ConstantCertificate, make_quadratic_family, make_sine_family
from prsgd.records import TrajectoryRecord

UNIT_CERT = ConstantCertificate(L=1.0, sigma=1.0, G=1.0, f_star=0.0,
                                f_star_is_exact=True)


def stub_record(norms, gammas=None, active=None, seed=0, key="cfg"):
    """Hand-built record with consistent shapes, for the pure stat functions."""
    t = len(norms)
    norms = np.asarray(norms, dtype=float)
    g = np.full(t, 0.1) if gammas is None else np.asarray(gammas, dtype=float)
    a = None if active is None else np.asarray(active, dtype=np.int64)
    return TrajectoryRecord(
        algorithm="pr_sgd", suite_key="stub", config_key=key, n_workers=2,
        dim=1, master_seed=seed, total_steps=t, grad_evals=2 * t,
        sq_grad_norms=norms, gammas=g, active_counts=a,
        rec_idx=np.arange(t), xbar_rec=np.zeros((t, 1)),
        dev_sq_rec=np.zeros(t), f_rec=np.zeros(t),
        rounds_before_rec=np.zeros(t, dtype=np.int64),
        xbar_final=np.zeros(1), f_final=0.0,
        ledger=CommLedger(Topology.PARAMETER_SERVER, 2, 1), record_stride=1)


# -- statistics -----------------------------------------------------------------

def test_avg_sq_grad_norm_is_plain_mean():
    assert avg_sq_grad_norm(stub_record([1.0, 2.0, 3.0, 6.0])) == 3.0


def test_gamma_weighted_average():
    r = stub_record([1.0, 1.0, 3.0], gammas=[1.0, 1.0, 2.0])
    assert gamma_weighted_avg_sq_grad_norm(r) == 2.0
    uniform = stub_record([1.0, 2.0, 3.0, 6.0], gammas=[0.3] * 4)
    assert gamma_weighted_avg_sq_grad_norm(uniform) == avg_sq_grad_norm(uniform)


def test_participation_weighted_average():
    r = stub_record([1.0, 2.0], active=[3, 1])
    assert participation_weighted_avg_sq_grad_norm(r) == (3.0 + 2.0) / 4.0
    with pytest.raises(ValueError):
        participation_weighted_avg_sq_grad_norm(stub_record([1.0]))


def test_aggregate_over_seeds():
    recs = [stub_record([1.0], seed=0), stub_record([3.0], seed=1)]
    mean, se = aggregate_over_seeds(recs, avg_sq_grad_norm)
    assert mean == 2.0
    assert se == 1.0  # std(ddof=1) = sqrt(2), / sqrt(2)


def test_aggregate_refuses_sloppy_inputs():
    with pytest.raises(ValueError):
        aggregate_over_seeds([stub_record([1.0])], avg_sq_grad_norm)
    with pytest.raises(ValueError):  # same seed twice
        aggregate_over_seeds([stub_record([1.0]), stub_record([2.0])],
                             avg_sq_grad_norm)
    with pytest.raises(ValueError):  # mixed configurations
        aggregate_over_seeds([stub_record([1.0], seed=0, key="a"),
                              stub_record([2.0], seed=1, key="b")],
                             avg_sq_grad_norm)


def test_zero_noise_gives_zero_standard_error():
    s = make_sine_family(2, 3, 1.0, 0.0, seed=4)
    recs = [run_pr_sgd(s, 12, 3, 0.1, master_seed=m) for m in (0, 1, 2)]
    mean, se = aggregate_over_seeds(recs, avg_sq_grad_norm)
    assert se == 0.0
    assert mean == avg_sq_grad_norm(recs[0])


# -- closed-form bounds -----------------------------------------------------------

def test_lemma1_bound_value():
    assert lemma1_deviation_bound(0.1, 4, 2.0) == pytest.approx(2.56, rel=1e-15)


def test_theorem1_terms_values():
    terms = theorem1_terms(1.0, 0.1, 100, 2, 4, UNIT_CERT)
    assert terms == {"descent": 0.2, "drift": 0.16000000000000003,
                     "variance": 0.025}


def test_theorem3_terms_values():
    terms = theorem3_terms(1.0, 0.1, 10, (4, 2), 2, UNIT_CERT)
    assert terms["descent"] == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert terms["drift"] == pytest.approx(0.64, rel=1e-15)
    assert terms["variance"] == 0.05


def test_corollary1_bound_value():
    assert corollary1_bound(1.0, 65536, 4, UNIT_CERT) == 7.0 / 512.0


@given(st.floats(min_value=1e-4, max_value=1.0),
       st.integers(min_value=1, max_value=64),
       st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=50, deadline=None)
def test_lemma1_bound_monotone_in_each_argument(gamma, interval, G):
    b = lemma1_deviation_bound(gamma, interval, G)
    assert b >= 0
    assert lemma1_deviation_bound(2 * gamma, interval, G) >= b
    assert lemma1_deviation_bound(gamma, interval + 1, G) >= b
    assert lemma1_deviation_bound(gamma, interval, 2 * G) >= b


# -- reports ---------------------------------------------------------------------

def sine_runs(gamma=0.05, total=64, interval=4, seeds=(0, 1, 2)):
    s = make_sine_family(4, 8, 1.0, 0.5, seed=7)
    return s, [run_pr_sgd(s, total, interval, gamma, master_seed=m) for m in seeds]


def test_theorem1_report_holds_on_real_runs():
    s, recs = sine_runs()
    rep = make_theorem1_report(s, recs)
    assert rep.name == "theorem1"
    assert rep.n_seeds == 3
    assert rep.bound == math.fsum(rep.terms.values())
    assert rep.satisfied
    assert rep.margin >= 0
    mean, se = aggregate_over_seeds(recs, avg_sq_grad_norm)
    assert (rep.statistic_mean, rep.statistic_se) == (mean, se)


def test_theorem3_report_on_heterogeneous_runs():
    s = make_sine_family(4, 8, 1.0, 0.5, seed=7, shared_phases=True)
    recs = [run_heterogeneous(s, [8, 8, 4, 2], 8, 0.05, master_seed=m)
            for m in range(4)]
    rep = make_theorem3_report(s, recs)
    assert rep.name == "theorem3"
    assert rep.satisfied
    # S * Ibar in the descent term: S=8 epochs, Ibar = 22/4
    delta = recs[0].f_initial() - s.certificate.f_star
    assert rep.terms["descent"] == pytest.approx(
        2.0 * delta / (0.05 * 8 * 5.5), rel=1e-15)


def test_theorem3_report_requires_interval_metadata():
    s, recs = sine_runs()
    with pytest.raises(ValueError):
        make_theorem3_report(s, recs)


def test_corollary_report_enforces_prescription():
    s = make_sine_family(4, 8, 1.0, 0.5, seed=7)
    total = 4096
    gamma = corollary_gamma(s.certificate.L, total, 4)
    planned = 2  # largest I with I^4 N^3 <= T at T=4096, N=4
    recs = [run_pr_sgd(s, total, planned, gamma, master_seed=m) for m in (0, 1)]
    rep = make_corollary_report(s, recs)
    assert rep.name == "corollary1"
    assert rep.satisfied
    off = [run_pr_sgd(s, total, planned, gamma * 1.01, master_seed=m)
           for m in (0, 1)]
    with pytest.raises(CertificationError, match="prescribed"):
        make_corollary_report(s, off)
    wide = [run_pr_sgd(s, total, 64, gamma, master_seed=m) for m in (0, 1)]
    with pytest.raises(CertificationError, match="interval"):
        make_corollary_report(s, wide)


def test_reports_refuse_uncertifiable_suites():
    q = make_quadratic_family([[0.0], [2.0]], noise_halfwidth=0.1)
    recs = [run_pr_sgd(q, 8, 2, 0.1, master_seed=m) for m in (0, 1)]
    with pytest.raises(CertificationError):
        make_theorem1_report(q, recs)


@pytest.mark.filterwarnings("ignore::prsgd.engine.StepSizeWarning")
def test_reports_refuse_oversized_step():
    s, recs = sine_runs(gamma=1.5, total=8, interval=2)  # 1/L = 1
    with pytest.raises(CertificationError, match="1/L"):
        make_theorem1_report(s, recs)


def test_reports_refuse_foreign_records():
    s, recs = sine_runs(total=8)
    other = make_sine_family(4, 8, 1.0, 0.5, seed=8)
    with pytest.raises(ValueError):
        make_theorem1_report(other, recs)


def test_bound_report_margin_sign():
    rep = BoundReport("x", 1.0, 0.1, 4, 1.3, {}, True)
    assert rep.margin == pytest.approx(0.1)
    bad = BoundReport("x", 1.3, 0.1, 4, 1.2, {}, False)
    assert bad.margin < 0
