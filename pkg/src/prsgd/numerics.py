"""Deterministic reduction kernels.

Every cross-worker or cross-sample reduction in this package goes through the
fixed-order pairwise kernels below instead of ``np.sum``/BLAS so that results
are independent of execution schedule, batching, and array layout: the adds
performed for one output element depend only on the number of addends, never
on how many other elements are reduced alongside it.  That is what makes the
single-threaded and multi-threaded engine paths, and re-runs of the same
config, bitwise identical.

The pairwise order also has a useful exactness property: summing 2^k copies
of a vector performs only exact doublings, so the node average of bitwise
identical worker states is exact for power-of-two worker counts (for other
counts it is correct to within an ulp or two, which the compensated-summation
oracle in :mod:`prsgd.oracles` checks).
"""
from __future__ import annotations

import numpy as np


def pairwise_sum(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Sum ``a`` along ``axis`` by fixed-order pairwise (binary tree) reduction.

    The tree splits the index range [0, n) at ceil(n/2) recursively, always
    combining lower indices before higher ones, so the result is a pure
    function of the operand order.
    """
    m = np.moveaxis(np.asarray(a), axis, 0)
    if m.shape[0] == 0:
        raise ValueError("cannot reduce an empty axis")
    return _tree(m)


def _tree(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    # small cases unrolled; identical associativity to the general recursion
    if n == 1:
        return m[0].copy()
    if n == 2:
        return m[0] + m[1]
    if n == 3:
        return (m[0] + m[1]) + m[2]
    if n == 4:
        return (m[0] + m[1]) + (m[2] + m[3])
    h = (n + 1) // 2
    return _tree(m[:h]) + _tree(m[h:])


def pairwise_mean(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Pairwise sum along ``axis`` followed by a single division."""
    n = np.asarray(a).shape[axis]
    return pairwise_sum(a, axis=axis) / n


def sq_norm_rows(a: np.ndarray) -> np.ndarray:
    """Squared Euclidean norm over the last axis, pairwise-reduced.

    Works for a single vector (returns a 0-d array) or any stack of vectors;
    the per-element operation sequence does not depend on the stack shape.
    """
    return pairwise_sum(np.asarray(a) ** 2, axis=-1)


def sq_norm(v: np.ndarray) -> float:
    return float(sq_norm_rows(v))


def kahan_sum(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Compensated (Kahan) summation along ``axis``; reference oracle only."""
    m = np.moveaxis(np.asarray(a, dtype=np.float64), axis, 0)
    total = m[0].copy()
    comp = np.zeros_like(total)
    for row in m[1:]:
        y = row - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total
