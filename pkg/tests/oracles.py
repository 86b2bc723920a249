"""Ground-truth oracles used only by the test suite.

Three independent sources of truth, none sharing code with the production
estimators:

* exact pattern probabilities under a small discrete distribution (full
  enumeration of support assignments);
* exact expectations of arbitrary series statistics under that distribution
  (full enumeration of all q^T series);
* Gaussian pattern probabilities by 1-D transfer-operator quadrature on a
  window-aligned grid (trapezoid + prefix sums), accurate to ~1e-7.
"""

from __future__ import annotations

import math

import numpy as np

from rbds.patterns import PatternGraph, _adjacency, _rooted_children

# A three-point distribution chosen so that no pairwise distance sits on the
# threshold boundary: |0-1| = 1 < 1.2, |1-2.05| = 1.05 < 1.2, |0-2.05| = 2.05.
DISCRETE_VALUES = np.array([0.0, 1.0, 2.05])
DISCRETE_PROBS = np.array([0.2, 0.5, 0.3])
DISCRETE_EPS = 1.2


def discrete_pattern_probability(
    pattern: PatternGraph,
    values: np.ndarray = DISCRETE_VALUES,
    probs: np.ndarray = DISCRETE_PROBS,
    eps: float = DISCRETE_EPS,
) -> float:
    """Exact probability of the pattern's edge events for i.i.d. draws from a
    finite distribution, by enumerating all q^n support assignments."""
    values = np.asarray(values, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    q = values.shape[0]
    n = pattern.vertex_count
    close = np.abs(values[:, None] - values[None, :]) < eps
    total = q**n
    ids = np.arange(total, dtype=np.int64)
    radix = np.array([q**j for j in range(n)], dtype=np.int64)
    coords = (ids[:, None] // radix[None, :]) % q
    ok = np.ones(total, dtype=bool)
    for a, b in pattern.edges:
        ok &= close[coords[:, a], coords[:, b]]
    weight = probs[coords].prod(axis=1)
    return float(weight[ok].sum())


def enumerate_discrete_series(
    T: int,
    values: np.ndarray = DISCRETE_VALUES,
    probs: np.ndarray = DISCRETE_PROBS,
) -> tuple[np.ndarray, np.ndarray]:
    """All q^T series over the support, with their exact probabilities.

    Returns ``(series, weights)`` of shapes ``(q^T, T)`` and ``(q^T,)``.
    """
    values = np.asarray(values, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    q = values.shape[0]
    total = q**T
    ids = np.arange(total, dtype=np.int64)
    radix = np.array([q**j for j in range(T)], dtype=np.int64)
    coords = (ids[:, None] // radix[None, :]) % q
    series = values[coords]
    weights = probs[coords].prod(axis=1)
    return series, weights


def expectation_over_series(f, T: int, **kw) -> float:
    """Exact E[f(u_1..u_T)] for i.i.d. draws from the discrete distribution."""
    series, weights = enumerate_discrete_series(T, **kw)
    acc = 0.0
    for row, w in zip(series, weights):
        acc += w * float(f(row))
    return acc


class GaussianPatternOracle:
    """Pattern probabilities for i.i.d. standard normal draws, by tree message
    passing over a quadrature grid.

    The grid step divides epsilon exactly, so every window ``[x - eps, x + eps]``
    is grid-aligned and window integrals reduce to prefix-sum differences
    (composite trapezoid).  Accuracy ~1e-7 at the default resolution.
    """

    def __init__(self, eps: float, points_per_eps: int = 256, half_width: float = 9.0):
        self.eps = float(eps)
        self.K = int(points_per_eps)
        self.h = self.eps / self.K
        n_half = int(math.ceil(half_width / self.h))
        self.x = np.arange(-n_half, n_half + 1) * self.h
        self.phi = np.exp(-0.5 * self.x**2) / math.sqrt(2.0 * math.pi)

    def _window_integral(self, f: np.ndarray) -> np.ndarray:
        """g(x_i) = integral of f * phi over [x_i - eps, x_i + eps]."""
        g = f * self.phi
        csum = np.concatenate([[0.0], np.cumsum(g)])
        n = g.shape[0]
        idx = np.arange(n)
        lo = np.maximum(idx - self.K, 0)
        hi = np.minimum(idx + self.K, n - 1)
        s = csum[hi + 1] - csum[lo] - 0.5 * (g[lo] + g[hi])
        return s * self.h

    def _full_integral(self, f: np.ndarray) -> float:
        g = f * self.phi
        return self.h * (g.sum() - 0.5 * (g[0] + g[-1]))

    def expectation(self, pattern: PatternGraph) -> float:
        """Probability that every edge's pair of i.i.d. N(0,1) draws is within
        eps; factorizes over components; any tree shape is supported."""
        adj = _adjacency(pattern)
        value = 1.0
        for comp in pattern.components():
            if len(comp) == 1:
                continue
            root = comp[0]
            children = _rooted_children(adj, root)

            def up(v: int) -> np.ndarray:
                f = np.ones_like(self.x)
                for c in children[v]:
                    f = f * up(c)
                return self._window_integral(f)

            f = np.ones_like(self.x)
            for c in children[root]:
                f = f * up(c)
            value *= self._full_integral(f)
        return value

    def chain1_closed_form(self) -> float:
        """P(|X - Y| < eps) = 2 Phi(eps / sqrt(2)) - 1 for X, Y iid N(0,1)."""
        return math.erf(self.eps / 2.0)


def naive_bds_components(u: np.ndarray, m: int, eps: float) -> tuple[float, float, float]:
    """Independent reference for the z-test inputs: ``(c_full, w1, w2)``.

    Deliberately different code paths from production: the correlation
    integral and pair rate come from explicit Python double loops; the
    common-neighbor rate comes from a matrix product over the zero-diagonal
    indicator (not from row-count combinatorics).
    """
    u = np.asarray(u, dtype=np.float64)
    T = len(u)
    T_m = T - m + 1
    match = 0
    for t in range(T_m):
        for s in range(t + 1, T_m):
            if all(abs(u[t + rho] - u[s + rho]) < eps for rho in range(m)):
                match += 1
    c_full = match / (T_m * (T_m - 1) / 2.0)
    close_pairs = 0
    for t in range(T):
        for s in range(T):
            if t != s and abs(u[t] - u[s]) < eps:
                close_pairs += 1
    w1 = close_pairs / (T * (T - 1.0))
    B = (np.abs(u[:, None] - u[None, :]) < eps).astype(np.float64)
    np.fill_diagonal(B, 0.0)
    paths2 = B @ B
    w2 = (paths2.sum() - np.trace(paths2)) / (T * (T - 1.0) * (T - 2.0))
    return c_full, w1, float(w2)


def naive_correlation_counts(u: np.ndarray, m: int, eps: float) -> tuple[int, int]:
    """Pure-Python double-loop reference: returns ``(pairs_all, pairs_far)``
    where ``pairs_all`` counts window pairs ``t < s`` whose next ``m`` offsets
    are all within eps, and ``pairs_far`` restricts to ``s - t >= m``."""
    T = len(u)
    T_m = T - m + 1
    total = 0
    far = 0
    for t in range(T_m):
        for s in range(t + 1, T_m):
            ok = True
            for rho in range(m):
                if abs(u[t + rho] - u[s + rho]) >= eps:
                    ok = False
                    break
            if ok:
                total += 1
                if s - t >= m:
                    far += 1
    return total, far
