"""Independent checks on suites and runs.

Everything here verifies the package against *re-derivations*, not against
itself: analytic gradients against central differences, certificate constants
against Monte Carlo draws and brute-force search, the simulation engine
against a naive pure-Python re-implementation that enumerates every noise
path of a tiny atomic-noise instance.

Each check returns an :class:`OracleVerdict`; :func:`run_oracle_battery`
bundles the applicable ones for a suite (this powers the ``verify`` CLI
verb).  The ``tamper_*`` factories build deliberately broken variants of a
suite and exist so the tests can show the checks actually reject bad inputs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .numerics import pairwise_mean, sq_norm, sq_norm_rows
from .problems import component_grad
from .rng import WorkerStream


@dataclass(frozen=True)
class OracleVerdict:
    name: str
    passed: bool
    worst: float
    detail: str

    def line(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


def _oracle_gen(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(entropy=(seed, 0x0AC1E, tag))))


def _probe_points(suite, gen, n_points: int) -> np.ndarray:
    """Points at mixed scales; bounded-gradient claims are global claims."""
    small = gen.uniform(-3.0, 3.0, size=(n_points, suite.dim))
    large = gen.uniform(-30.0, 30.0, size=(max(1, n_points // 2), suite.dim))
    return np.vstack([np.zeros((1, suite.dim)), small, large])


def finite_diff_check(suite, n_points: int = 4, seed: int = 0,
                      h: float = 1e-5, tol: float = 5e-7) -> OracleVerdict:
    """Central differences of component values vs analytic gradients."""
    gen = _oracle_gen(seed, 1)
    pts = _probe_points(suite, gen, n_points)
    worst = 0.0
    for x in pts:
        g = suite.grads_at_many(x[None, :])[0]          # (N, dim)
        for j in range(suite.dim):
            up, dn = x.copy(), x.copy()
            up[j] += h
            dn[j] -= h
            vals = suite.values_at_many(np.vstack([up, dn]))
            fd = (vals[0] - vals[1]) / (2.0 * h)        # (N,)
            err = np.max(np.abs(fd - g[:, j]) / (1.0 + np.abs(g[:, j])))
            worst = max(worst, float(err))
    return OracleVerdict("finite_diff", worst <= tol, worst,
                         f"max rel grad error {worst:.3e} (tol {tol:.0e})")


def smoothness_check(suite, n_pairs: int = 200, seed: int = 0,
                     slack: float = 1e-9) -> OracleVerdict:
    """||grad f_i(x) - grad f_i(y)|| <= L ||x - y|| on random pairs."""
    gen = _oracle_gen(seed, 2)
    cert = suite.certificate
    xs = gen.uniform(-10.0, 10.0, size=(n_pairs, suite.dim))
    ys = xs + gen.uniform(-1.0, 1.0, size=(n_pairs, suite.dim)) * \
        gen.choice([1e-3, 1e-1, 1.0, 10.0], size=(n_pairs, 1))
    gx = suite.grads_at_many(xs)
    gy = suite.grads_at_many(ys)
    num = np.sqrt(sq_norm_rows(gx - gy))                # (n_pairs, N)
    den = np.sqrt(sq_norm_rows(xs - ys))[:, None]
    worst = float(np.max(num / den))
    ok = worst <= cert.L * (1.0 + slack)
    return OracleVerdict("smoothness", ok, worst,
                         f"max Lipschitz ratio {worst:.6f} vs L = {cert.L:.6f}")


def mc_unbiasedness_check(suite, worker_id: int, x: np.ndarray,
                          n_samples: int = 20_000, seed: int = 0,
                          tol_sigmas: float = 5.0) -> OracleVerdict:
    """Sample mean of stochastic gradients vs the exact component gradient."""
    stream = WorkerStream(seed, worker_id)
    draws = suite.presample(stream, n_samples)
    xs = np.repeat(np.asarray(x, dtype=float)[None, :], n_samples, axis=0)
    g = suite.stoch_rows(xs, draws, np.full(n_samples, worker_id))
    err = math.sqrt(sq_norm(pairwise_mean(g, axis=0) - component_grad(suite, worker_id, x)))
    lim = tol_sigmas * suite.certificate.sigma / math.sqrt(n_samples)
    return OracleVerdict(
        f"unbiasedness[w{worker_id}]", err <= lim, err,
        f"||mean - grad|| = {err:.3e} vs {tol_sigmas:.0f} sigma/sqrt(n) = {lim:.3e}")


def noise_variance_check(suite, worker_id: int, x: np.ndarray,
                         n_samples: int = 20_000, seed: int = 0,
                         slack: float = 0.02) -> OracleVerdict:
    """Measured E||g - grad f_i||^2 must not exceed the certified sigma^2."""
    stream = WorkerStream(seed, worker_id)
    draws = suite.presample(stream, n_samples)
    xs = np.repeat(np.asarray(x, dtype=float)[None, :], n_samples, axis=0)
    g = suite.stoch_rows(xs, draws, np.full(n_samples, worker_id))
    dev = g - component_grad(suite, worker_id, x)[None, :]
    measured = math.fsum(sq_norm_rows(dev).tolist()) / n_samples
    cap = suite.certificate.sigma ** 2 * (1.0 + slack)
    return OracleVerdict(
        f"noise_variance[w{worker_id}]", measured <= cap, measured,
        f"measured {measured:.6f} vs sigma^2 (+{slack:.0%}) = {cap:.6f}")


def per_sample_norm_check(suite, n_points: int = 16, draws_per_point: int = 64,
                          seed: int = 0, slack: float = 1e-12) -> OracleVerdict:
    """Every sampled gradient must satisfy ||g|| <= G, pathwise."""
    cert = suite.certificate
    if not math.isfinite(cert.G):
        return OracleVerdict("per_sample_norm", True, math.inf,
                             "skipped: suite certifies no finite G")
    gen = _oracle_gen(seed, 3)
    pts = _probe_points(suite, gen, n_points)
    worst = 0.0
    for worker_id in range(suite.n_workers):
        stream = WorkerStream(seed, worker_id)
        for x in pts:
            draws = suite.presample(stream, draws_per_point)
            xs = np.repeat(x[None, :], draws_per_point, axis=0)
            g = suite.stoch_rows(xs, draws, np.full(draws_per_point, worker_id))
            worst = max(worst, float(np.max(np.sqrt(sq_norm_rows(g)))))
    ok = worst <= cert.G * (1.0 + slack)
    return OracleVerdict("per_sample_norm", ok, worst,
                         f"max ||g|| = {worst:.6f} vs G = {cert.G:.6f}")


def lower_bound_check(suite, n_points: int = 512, seed: int = 0) -> OracleVerdict:
    """f(x) >= f* on random probes (equality allowed)."""
    gen = _oracle_gen(seed, 4)
    pts = _probe_points(suite, gen, n_points)
    vals = pairwise_mean(suite.values_at_many(pts), axis=1)
    worst = float(np.min(vals))
    ok = worst >= suite.certificate.f_star
    return OracleVerdict("lower_bound", ok, worst,
                         f"min probed f = {worst:.6f} vs f* = {suite.certificate.f_star:.6f}")


def run_oracle_battery(suite, seed: int = 0) -> list[OracleVerdict]:
    gen = _oracle_gen(seed, 5)
    x_a = np.zeros(suite.dim)
    x_b = gen.uniform(-2.0, 2.0, size=suite.dim)
    verdicts = [
        finite_diff_check(suite, seed=seed),
        smoothness_check(suite, seed=seed),
        per_sample_norm_check(suite, seed=seed),
        lower_bound_check(suite, seed=seed),
    ]
    for worker_id in sorted({0, suite.n_workers - 1}):
        verdicts.append(mc_unbiasedness_check(suite, worker_id, x_b, seed=seed))
        verdicts.append(noise_variance_check(suite, worker_id, x_a, seed=seed))
    return verdicts


# -- record comparison -------------------------------------------------------

_REPLAY_FIELDS = ("sq_grad_norms", "gammas", "rec_idx", "xbar_rec",
                  "dev_sq_rec", "f_rec", "rounds_before_rec", "xbar_final")


def replay_equivalence(rec_a, rec_b) -> OracleVerdict:
    """Bitwise comparison of two records' trajectory content.

    Compares what the dynamics produced (iterates, norms, deviations,
    objective values), not how it is labeled or what it cost -- so a
    fixed-interval run and the matching uniform heterogeneous run can be
    checked against each other.  Records must share a recording stride.
    """
    if rec_a.f_final != rec_b.f_final:
        return OracleVerdict("replay_equivalence", False, math.inf,
                             f"f_final differs: {rec_a.f_final!r} vs {rec_b.f_final!r}")
    for name in _REPLAY_FIELDS:
        a, b = getattr(rec_a, name), getattr(rec_b, name)
        if a.shape != b.shape or a.tobytes() != b.tobytes():
            return OracleVerdict("replay_equivalence", False, math.inf,
                                 f"field {name} differs")
    return OracleVerdict("replay_equivalence", True, 0.0,
                         "records are bitwise identical")


# -- exhaustive tiny-instance reference ---------------------------------------

def small_instance_exhaustive(phases, amplitude: float, atoms, gamma: float,
                              interval: int, total_steps: int,
                              max_paths: int = 4096) -> dict:
    """Enumerate *every* noise path of a tiny atomic-noise sine instance.

    Pure-Python re-implementation of the dynamics (plain floats, fsum
    reductions, no engine code): N workers start at 0, take ``total_steps``
    local steps with one noise atom per worker per step added to every
    coordinate, and are reset to their exact average every ``interval``
    steps.  With k atoms there are k^(N*T) equally likely paths, so sample
    averages over paths are *exact* expectations.

    Returns the exact expected running-average statistic, its per-path
    extremes, and the largest squared worker deviation seen at any pre-step
    point on any path -- the quantities the certified bounds constrain.
    """
    n_workers = len(phases)
    dim = len(phases[0])
    n_paths = len(atoms) ** (n_workers * total_steps)
    if n_paths > max_paths:
        raise ValueError(f"{n_paths} paths exceeds max_paths={max_paths}")

    stats = []
    max_dev_sq = 0.0
    for path in itertools.product(range(len(atoms)), repeat=n_workers * total_steps):
        x = [[0.0] * dim for _ in range(n_workers)]
        per_step = []
        for t in range(1, total_steps + 1):
            xbar = [math.fsum(x[i][j] for i in range(n_workers)) / n_workers
                    for j in range(dim)]
            gbar = [amplitude * math.fsum(
                        math.cos(xbar[j] + phases[i][j]) for i in range(n_workers)
                    ) / n_workers for j in range(dim)]
            per_step.append(math.fsum(g * g for g in gbar))
            dev = max(math.fsum((x[i][j] - xbar[j]) ** 2 for j in range(dim))
                      for i in range(n_workers))
            max_dev_sq = max(max_dev_sq, dev)
            for i in range(n_workers):
                atom = atoms[path[(t - 1) * n_workers + i]]
                for j in range(dim):
                    x[i][j] -= gamma * (
                        amplitude * math.cos(x[i][j] + phases[i][j]) + atom)
            if t % interval == 0:
                xbar_post = [math.fsum(x[i][j] for i in range(n_workers)) / n_workers
                             for j in range(dim)]
                x = [list(xbar_post) for _ in range(n_workers)]
        stats.append(math.fsum(per_step) / total_steps)

    return {
        "n_paths": n_paths,
        "mean_stat": math.fsum(stats) / n_paths,
        "max_stat": max(stats),
        "min_stat": min(stats),
        "max_dev_sq": max_dev_sq,
    }


# -- tamper controls (for testing the checks themselves) ----------------------

class _Tampered:
    """Delegating wrapper; subclasses override what they break."""

    def __init__(self, base):
        self._base = base
        self.certificate = base.certificate

    def __getattr__(self, name):
        return getattr(self._base, name)


class _BiasedGradients(_Tampered):
    def grads_at_many(self, points):
        return self._base.grads_at_many(points) * (1.0 + 5e-4)


class _BiasedSampler(_Tampered):
    def __init__(self, base, bias):
        super().__init__(base)
        self._bias = bias

    def stoch_rows(self, x_rows, draws, worker_idx):
        return self._base.stoch_rows(x_rows, draws, worker_idx) + self._bias


class _ScaledNoise(_Tampered):
    def __init__(self, base, scale):
        super().__init__(base)
        self._scale = scale

    def presample(self, stream, n_steps):
        return self._base.presample(stream, n_steps) * self._scale


def tamper_gradients(suite):
    """Analytic gradients off by 0.05%: finite differences must catch it."""
    return _BiasedGradients(suite)


def tamper_sampler_bias(suite, bias: float = 0.05):
    """Systematic sampler bias: the unbiasedness check must catch it."""
    return _BiasedSampler(suite, bias)


def tamper_noise_scale(suite, scale: float = 1.5):
    """Noise larger than certified: the variance check must catch it."""
    return _ScaledNoise(suite, scale)


def tamper_certificate_G(suite, factor: float = 0.5):
    """Understated gradient bound: the per-sample check must catch it."""
    out = _Tampered(suite)
    out.certificate = replace(suite.certificate, G=suite.certificate.G * factor)
    return out
