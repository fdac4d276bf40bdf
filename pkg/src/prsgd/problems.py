"""Synthetic objective suites with certified constants.

A *suite* bundles N per-worker components f_i (the global objective is their
average f = N^-1 sum_i f_i), a stochastic-gradient sampler per worker, and a
:class:`ConstantCertificate` carrying constants (L, sigma, G, f*) that are
proved for the family rather than estimated:

* every f_i (hence f) is L-smooth,
* E||g - grad f_i(x)||^2 <= sigma^2 for the sampled gradient g at any x,
* ||g|| <= G holds per sample (deterministically, given the bounded noise),
* f* lower-bounds f everywhere (exactly when ``f_star_is_exact``).

Suites are duck-typed: every family exposes the same evaluation interface
(``values_at_many`` / ``grads_at_many`` / ``stoch_rows`` / ``presample``)
consumed by the engine, plus the module-level convenience ops below.  All
cross-component and cross-sample reductions use the fixed-order kernels from
:mod:`prsgd.numerics` so evaluations are bitwise reproducible regardless of
batching.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import pairwise_mean, pairwise_sum, sq_norm_rows
from .rng import WorkerStream

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ConstantCertificate:
    """Constants certified for a suite.

    ``globally_valid`` is False for test-only families (e.g. quadratics,
    whose gradients are unbounded): such suites are rejected by the bound
    evaluators in :mod:`prsgd.metrics`.
    """

    L: float
    sigma: float
    G: float
    f_star: float
    f_star_is_exact: bool
    globally_valid: bool = True


@dataclass(frozen=True)
class GradSample:
    """One stochastic gradient draw.

    ``draw_index`` is the 1-based ordinal of this sample in the owning
    worker's stream, recorded so runs can be replayed exactly.
    """

    grad: np.ndarray
    worker_id: int
    draw_index: int


class SineFamily:
    """f_i(x) = amplitude * sum_j sin(x_j + phi_ij).

    Phases phi are drawn once from ``seed`` (one row per worker, or a single
    shared row when ``shared_phases`` -- then all components are identical and
    the suite satisfies the identical-distribution assumption).

    Stochastic gradients add zero-mean noise to the exact gradient:
    i.i.d. per-coordinate noise uniform on [-noise_halfwidth, +noise_halfwidth),
    or -- for enumeration-style oracles -- one atom drawn uniformly from the
    finite zero-mean set ``noise_atoms`` and added to every coordinate.

    Certified constants:

    * ``L = amplitude``: each coordinate of the Hessian is -amplitude*sin(.),
      so ||H|| <= amplitude for every component.
    * ``sigma^2 = dim * halfwidth^2 / 3`` (uniform noise) or
      ``dim * mean(atom^2)`` (atomic noise; the atom is applied to all
      coordinates).
    * ``G = (amplitude + max_noise) * sqrt(dim)``: ||grad f_i|| <=
      amplitude*sqrt(dim) everywhere and the noise vector has norm at most
      max_noise*sqrt(dim), so the bound holds per sample, deterministically.
    * ``f_star = -amplitude * sum_j R_j`` with
      R_j = |N^-1 sum_i exp(1j*phi_ij)|: coordinates separate, and the j-th
      coordinate of f is amplitude*R_j*sin(x_j + psi_j), which attains -R_j.
      This is exact, so ``f_star_is_exact`` is always True here.
    """

    def __init__(self, n_workers: int, dim: int, amplitude: float,
                 noise_halfwidth: float, seed: int, *,
                 shared_phases: bool = False,
                 noise_atoms: tuple[float, ...] | None = None):
        if n_workers < 1 or dim < 1:
            raise ValueError("n_workers and dim must be positive")
        if amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if noise_halfwidth < 0:
            raise ValueError("noise_halfwidth must be nonnegative")
        self.n_workers = int(n_workers)
        self.dim = int(dim)
        self.amplitude = float(amplitude)
        self.noise_halfwidth = float(noise_halfwidth)
        self.seed = int(seed)
        self.shared_phases = bool(shared_phases)
        self.identical_distributions = self.shared_phases

        if noise_atoms is not None:
            atoms = tuple(float(a) for a in noise_atoms)
            if not atoms:
                raise ValueError("noise_atoms must be nonempty")
            if math.fsum(atoms) != 0.0:
                raise ValueError("noise_atoms must have exact zero mean")
            self.noise_atoms: tuple[float, ...] | None = atoms
            max_noise = max(abs(a) for a in atoms)
            noise_var = math.fsum(a * a for a in atoms) / len(atoms)
            sigma = math.sqrt(dim * noise_var)
        else:
            self.noise_atoms = None
            max_noise = self.noise_halfwidth
            sigma = math.sqrt(dim * self.noise_halfwidth ** 2 / 3.0)

        gen = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=(self.seed, 0x51E5))))
        if shared_phases:
            row = gen.uniform(0.0, TWO_PI, size=dim)
            self.phases = np.tile(row, (n_workers, 1))
        else:
            self.phases = gen.uniform(0.0, TWO_PI, size=(n_workers, dim))

        # exact minimum via per-coordinate phasor magnitudes
        re = pairwise_mean(np.cos(self.phases), axis=0)
        im = pairwise_mean(np.sin(self.phases), axis=0)
        r = np.hypot(re, im)
        f_star = -self.amplitude * math.fsum(r.tolist())

        self.certificate = ConstantCertificate(
            L=self.amplitude,
            sigma=sigma,
            G=(self.amplitude + max_noise) * math.sqrt(dim),
            f_star=f_star,
            f_star_is_exact=True,
        )
        self.name = "sine"
        self.cache_key = (f"sine(N={n_workers},dim={dim},A={self.amplitude!r},"
                          f"noise={self.noise_halfwidth!r},seed={self.seed},"
                          f"shared={self.shared_phases},atoms={self.noise_atoms!r})")

    # -- evaluation ---------------------------------------------------------

    def values_at_many(self, points: np.ndarray) -> np.ndarray:
        """(K, dim) points -> (K, N) component values."""
        s = np.sin(points[:, None, :] + self.phases[None, :, :])
        return self.amplitude * pairwise_sum(s, axis=-1)

    def grads_at_many(self, points: np.ndarray) -> np.ndarray:
        """(K, dim) points -> (K, N, dim) component gradients."""
        return self.amplitude * np.cos(points[:, None, :] + self.phases[None, :, :])

    def stoch_rows(self, x_rows: np.ndarray, draws: np.ndarray,
                   worker_idx: np.ndarray) -> np.ndarray:
        """Sampled gradients: row r is a draw of worker worker_idx[r] at x_rows[r]."""
        det = self.amplitude * np.cos(x_rows + self.phases[worker_idx])
        return det + draws

    def presample(self, stream: WorkerStream, n_steps: int) -> np.ndarray:
        if self.noise_atoms is not None:
            idx = stream.index_block(n_steps, len(self.noise_atoms))
            vals = np.asarray(self.noise_atoms)[idx]
            return np.repeat(vals[:, None], self.dim, axis=1)
        return stream.uniform_block(n_steps, self.dim, self.noise_halfwidth)


class LogisticFamily:
    """Average logistic loss on synthetic data plus a bounded nonconvex term.

    f_i(x) = n^-1 sum_s log(1 + exp(-y_s <w_s, x>)) + r * sum_j x_j^2/(1+x_j^2)

    Features are unit-norm (R = max ||w_s|| = 1 up to rounding; the certificate
    uses the realized maximum), labels are +/-1, everything deterministic from
    ``seed``.  With ``shared_data`` every worker holds the same pooled dataset,
    so the components are identical and the identical-distribution flag is set;
    otherwise each worker gets its own dataset.

    A stochastic gradient draws one sample index uniformly and returns that
    sample's loss gradient plus the (deterministic) regulariser gradient.

    Certified constants (derivations):

    * ``L = R^2/4 + 2r``: per-sample loss Hessian is s(1-s) w w^T with
      s(1-s) <= 1/4; the regulariser's second derivative 2(1-3u^2)/(1+u^2)^3
      peaks at 2 (u = 0).
    * ``sigma = R``: the deviation of a draw from grad f_i is the per-sample
      logistic gradient minus its mean (the regulariser cancels), and
      E||g_s - mean||^2 = E||g_s||^2 - ||mean||^2 <= R^2 since
      ||g_s|| = s(.)||w_s|| <= R per sample.
    * ``G = R + r*(3*sqrt(3)/8)*sqrt(dim)``: |d/du u^2/(1+u^2)| =
      2|u|/(1+u^2)^2 peaks at u = 1/sqrt(3) with value 3*sqrt(3)/8, so the
      regulariser gradient has norm at most r*(3*sqrt(3)/8)*sqrt(dim); add the
      per-sample loss gradient bound R.  Holds per sample, deterministically.
    * ``f_star = 0`` is a lower bound (both terms are nonnegative), not exact.
    """

    def __init__(self, n_workers: int, dim: int, samples_per_worker: int,
                 nonconvex_reg_weight: float, seed: int, shared_data: bool):
        if samples_per_worker < 1:
            raise ValueError("samples_per_worker must be positive")
        if nonconvex_reg_weight < 0:
            raise ValueError("nonconvex_reg_weight must be nonnegative")
        self.n_workers = int(n_workers)
        self.dim = int(dim)
        self.samples_per_worker = int(samples_per_worker)
        self.reg_weight = float(nonconvex_reg_weight)
        self.seed = int(seed)
        self.shared_data = bool(shared_data)
        self.identical_distributions = self.shared_data

        gen = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=(self.seed, 0x10615))))
        n_datasets = 1 if shared_data else n_workers
        raw = gen.standard_normal((n_datasets, samples_per_worker, dim))
        norms = np.sqrt(sq_norm_rows(raw))
        feats = raw / norms[:, :, None]
        labels = gen.integers(0, 2, size=(n_datasets, samples_per_worker)) * 2.0 - 1.0
        if shared_data:
            feats = np.repeat(feats, n_workers, axis=0)
            labels = np.repeat(labels, n_workers, axis=0)
        self._feats = feats          # (N, n, dim)
        self._labels = labels        # (N, n)

        radius = float(np.max(np.sqrt(sq_norm_rows(feats))))
        reg_grad_peak = 3.0 * math.sqrt(3.0) / 8.0
        self.certificate = ConstantCertificate(
            L=radius ** 2 / 4.0 + 2.0 * self.reg_weight,
            sigma=radius,
            G=radius + self.reg_weight * reg_grad_peak * math.sqrt(dim),
            f_star=0.0,
            f_star_is_exact=False,
        )
        self.name = "logistic"
        self.cache_key = (f"logistic(N={n_workers},dim={dim},"
                          f"n={samples_per_worker},reg={self.reg_weight!r},"
                          f"seed={self.seed},shared={self.shared_data})")

    def _reg_value_rows(self, points: np.ndarray) -> np.ndarray:
        p2 = points ** 2
        return self.reg_weight * pairwise_sum(p2 / (1.0 + p2), axis=-1)

    def _reg_grad(self, points: np.ndarray) -> np.ndarray:
        return self.reg_weight * 2.0 * points / (1.0 + points ** 2) ** 2

    @staticmethod
    def _sigmoid(z: np.ndarray) -> np.ndarray:
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def _margins(self, worker: int, points: np.ndarray) -> np.ndarray:
        """z[k, s] = -y_s <w_s, points_k> for the given worker's data."""
        prod = self._feats[worker][None, :, :] * points[:, None, :]
        return -self._labels[worker][None, :] * pairwise_sum(prod, axis=-1)

    def values_at_many(self, points: np.ndarray) -> np.ndarray:
        k = points.shape[0]
        out = np.empty((k, self.n_workers))
        reg = self._reg_value_rows(points)
        for i in range(self.n_workers):
            loss = pairwise_mean(np.logaddexp(0.0, self._margins(i, points)), axis=-1)
            out[:, i] = loss + reg
        return out

    def grads_at_many(self, points: np.ndarray) -> np.ndarray:
        k = points.shape[0]
        out = np.empty((k, self.n_workers, self.dim))
        reg = self._reg_grad(points)
        # chunk rows so the (chunk, n, dim) temporary stays small; chunking
        # cannot change results because all reductions are per-element
        chunk = max(1, 2_000_000 // (self.samples_per_worker * self.dim))
        for i in range(self.n_workers):
            feats = self._feats[i]
            labels = self._labels[i]
            for lo in range(0, k, chunk):
                pts = points[lo:lo + chunk]
                z = self._margins(i, pts)
                coef = -labels[None, :] * self._sigmoid(z)       # (c, n)
                g = pairwise_mean(coef[:, :, None] * feats[None, :, :], axis=1)
                out[lo:lo + chunk, i, :] = g + reg[lo:lo + chunk]
        return out

    def stoch_rows(self, x_rows: np.ndarray, draws: np.ndarray,
                   worker_idx: np.ndarray) -> np.ndarray:
        w = self._feats[worker_idx, draws]       # (r, dim)
        y = self._labels[worker_idx, draws]      # (r,)
        z = -y * pairwise_sum(w * x_rows, axis=-1)
        coef = -y * self._sigmoid(z)
        return coef[:, None] * w + self._reg_grad(x_rows)

    def presample(self, stream: WorkerStream, n_steps: int) -> np.ndarray:
        return stream.index_block(n_steps, self.samples_per_worker)


class QuadraticFamily:
    """Test-only family f_i(x) = ||x - c_i||^2 with optional uniform noise.

    Quadratics have unbounded gradients, so no global G exists: the
    certificate is flagged ``globally_valid=False`` and the suite is rejected
    by every bound evaluator.  Useful for gradient/descent sanity checks with
    hand-computable values.
    """

    def __init__(self, centers, noise_halfwidth: float = 0.0):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.centers = centers
        self.n_workers, self.dim = centers.shape
        self.noise_halfwidth = float(noise_halfwidth)
        self.identical_distributions = bool(
            np.all(centers == centers[0][None, :]))
        centroid = pairwise_mean(centers, axis=0)
        f_star = float(pairwise_mean(sq_norm_rows(centers - centroid), axis=0))
        self.certificate = ConstantCertificate(
            L=2.0,
            sigma=math.sqrt(self.dim * self.noise_halfwidth ** 2 / 3.0),
            G=math.inf,
            f_star=f_star,
            f_star_is_exact=True,
            globally_valid=False,
        )
        self.name = "quadratic"
        self.cache_key = (f"quadratic(centers={centers.tolist()!r},"
                          f"noise={self.noise_halfwidth!r})")

    def values_at_many(self, points: np.ndarray) -> np.ndarray:
        return sq_norm_rows(points[:, None, :] - self.centers[None, :, :])

    def grads_at_many(self, points: np.ndarray) -> np.ndarray:
        return 2.0 * (points[:, None, :] - self.centers[None, :, :])

    def stoch_rows(self, x_rows: np.ndarray, draws: np.ndarray,
                   worker_idx: np.ndarray) -> np.ndarray:
        return 2.0 * (x_rows - self.centers[worker_idx]) + draws

    def presample(self, stream: WorkerStream, n_steps: int) -> np.ndarray:
        return stream.uniform_block(n_steps, self.dim, self.noise_halfwidth)


# -- constructors (the public way to build suites) --------------------------

def make_sine_family(n_workers: int, dim: int, amplitude: float,
                     noise_halfwidth: float, seed: int, *,
                     shared_phases: bool = False,
                     noise_atoms: tuple[float, ...] | None = None) -> SineFamily:
    return SineFamily(n_workers, dim, amplitude, noise_halfwidth, seed,
                      shared_phases=shared_phases, noise_atoms=noise_atoms)


def make_logistic_family(n_workers: int, dim: int, samples_per_worker: int,
                         nonconvex_reg_weight: float, seed: int,
                         shared_data: bool) -> LogisticFamily:
    return LogisticFamily(n_workers, dim, samples_per_worker,
                          nonconvex_reg_weight, seed, shared_data)


def make_quadratic_family(centers, noise_halfwidth: float = 0.0) -> QuadraticFamily:
    return QuadraticFamily(centers, noise_halfwidth)


# -- module-level evaluation ops --------------------------------------------

def component_value(suite, worker_id: int, x: np.ndarray) -> float:
    """f_i(x) for one component."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    return float(suite.values_at_many(pts)[0, worker_id])


def component_grad(suite, worker_id: int, x: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    return suite.grads_at_many(pts)[0, worker_id]


def eval_f(suite, x: np.ndarray) -> float:
    """f(x) = N^-1 sum_i f_i(x), summed exactly (fsum)."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    vals = suite.values_at_many(pts)[0]
    return math.fsum(vals.tolist()) / suite.n_workers


def eval_grad_f(suite, x: np.ndarray) -> np.ndarray:
    """grad f(x), reduced across components by the fixed-order kernel."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    return pairwise_mean(suite.grads_at_many(pts)[0], axis=0)


def sample_stoch_grad(suite, worker_id: int, x: np.ndarray,
                      stream: WorkerStream) -> GradSample:
    """Draw one stochastic gradient of f_{worker_id} at x from the stream."""
    if stream.worker_id != worker_id:
        raise ValueError("stream belongs to a different worker")
    draws = suite.presample(stream, 1)
    x_rows = np.atleast_2d(np.asarray(x, dtype=float))
    grad = suite.stoch_rows(x_rows, draws[:1], np.asarray([worker_id]))[0]
    return GradSample(grad=grad, worker_id=worker_id,
                      draw_index=stream.draw_index)
