"""Deterministic desk-scale simulator for parallel restarted SGD.

Local SGD with periodic model averaging on synthetic smooth nonconvex
objectives whose constants (L, sigma, G, f*) are certified analytically, so
deviation and convergence bounds can be checked numerically rather than
trusted.
"""
from .comms import CommLedger, Topology, reduce_average, rounds_expected
from .engine import (StepSizeWarning, corollary_gamma, decaying_schedule,
                     plan_interval, run_heterogeneous, run_minibatch_baseline,
                     run_one_shot, run_pr_sgd, run_time_varying)
from .metrics import (BoundReport, CertificationError, aggregate_over_seeds,
                      avg_sq_grad_norm, corollary1_bound,
                      gamma_weighted_avg_sq_grad_norm, lemma1_deviation_bound,
                      make_corollary_report, make_theorem1_report,
                      make_theorem3_report,
                      participation_weighted_avg_sq_grad_norm, theorem1_terms,
                      theorem3_terms)
from .problems import (ConstantCertificate, GradSample, component_grad,
                       component_value, eval_f, eval_grad_f,
                       make_logistic_family, make_quadratic_family,
                       make_sine_family, sample_stoch_grad)
from .records import TrajectoryRecord
from .rng import WorkerStream, worker_streams

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "CertificationError", "CommLedger", "ConstantCertificate",
    "GradSample", "StepSizeWarning", "Topology", "TrajectoryRecord",
    "WorkerStream", "aggregate_over_seeds", "avg_sq_grad_norm",
    "component_grad", "component_value", "corollary1_bound", "corollary_gamma",
    "decaying_schedule", "eval_f", "eval_grad_f",
    "gamma_weighted_avg_sq_grad_norm", "lemma1_deviation_bound",
    "make_corollary_report", "make_logistic_family", "make_quadratic_family",
    "make_sine_family", "make_theorem1_report", "make_theorem3_report",
    "participation_weighted_avg_sq_grad_norm", "plan_interval",
    "reduce_average", "rounds_expected", "run_heterogeneous",
    "run_minibatch_baseline", "run_one_shot", "run_pr_sgd", "run_time_varying",
    "sample_stoch_grad", "theorem1_terms", "theorem3_terms", "worker_streams",
]
