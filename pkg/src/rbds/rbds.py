"""Finite-sample mean and variance of the correlation integral, and the
corrected serial-independence statistic built on them.

The correlation integral ``C`` averages window-pair match indicators over all
``N`` window pairs, near (gap < m) and far (gap >= m) alike, so it is not a
U-statistic and its exact expectation under independence is a weighted blend
of per-gap joint probabilities rather than ``(omega_1^0)^m``.  This module
computes:

* ``mu_hat`` — the exact expectation of ``C`` (plug-in or ground-truth
  probabilities, depending on the :class:`~rbds.patterns.EstimatorSet`);
* ``breve_sigma_sq`` — the near-pair variance contribution, complete through
  order ``T^-2``;
* ``tilde_sigma_sq`` — the exact variance of the far-pair average, all orders,
  via an integer-exact enumeration of pairwise window-overlap classes;
* the seven cross/variance terms and their signed combination ``nu_sq`` for
  the variance of ``C - mu_hat``;
* ``rbds_statistic`` — the corrected statistic ``(C - mu_hat)/nu``, compared
  against the standard normal.

Closed-form helpers (``w_function``, ``u_function``, ``w_partials``) evaluate
the published per-gap joint-probability formulas; ``union_graph_expectation``
builds the underlying union of window-pair edge sets directly and evaluates
it as a forest of patterns.  Where the closed forms and the union
construction disagree (some partial-overlap cases drop a disconnected
single-edge factor), the union construction is authoritative and is what the
production variance uses; the closed forms are kept for cross-checking, and
``docs/crosscheck_ledger.md`` records every comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

from .bds import TestResult
from .core import (
    CombinatoricFactors,
    ProximityStructure,
    TestConfig,
    TimeSeries,
    build_proximity,
    combinatoric_factors,
    normal_two_sided_p,
    step_negative,
)
from .correlation import correlation_integral
from .errors import (
    DegenerateScale,
    ExponentNegative,
    NonPositiveVariance,
    RbdsError,
    SeriesTooShort,
)
from .patterns import (
    EstimatorSet,
    PatternGraph,
    estimator_closure,
    forest_from_edges,
    omega12_hat,
)

__all__ = [
    "LagDecomposition",
    "RbdsIntermediates",
    "w_function",
    "u_function",
    "union_graph_expectation",
    "w_partials",
    "mu_hat",
    "breve_sigma_sq",
    "tilde_sigma_sq",
    "tilde_shape_counts",
    "chain_with_interior_pendants",
    "nu_sq",
    "rbds_statistic",
]


# ---------------------------------------------------------------------------
# lag decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LagDecomposition:
    """Integer decomposition of a window/gap/offset triple ``(m, k, d)``:

    ``h = m // k``, ``i = m - h*k`` (how the length-``m`` window wraps around
    gap ``k``), ``r = d // k``, ``tau = d - r*k`` (how the offset ``d`` wraps),
    and the shifted pair ``h1 = (m-k) // k``, ``i1 = (m-k) - h1*k`` used by
    one of the variance cross terms.  Note ``h1 == h - 1`` and ``i1 == i``
    identically for ``1 <= k <= m-1``.
    """

    m: int
    k: int
    d: int = 0
    h: int = field(init=False)
    i: int = field(init=False)
    r: int = field(init=False)
    tau: int = field(init=False)
    h1: int = field(init=False)
    i1: int = field(init=False)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise RbdsError(f"window length m={self.m} must be >= 1")
        if not 1 <= self.k <= self.m:
            raise RbdsError(f"gap k={self.k} must satisfy 1 <= k <= m={self.m}")
        if self.d < 0:
            raise RbdsError(f"offset d={self.d} must be >= 0")
        h, i = divmod(self.m, self.k)
        r, tau = divmod(self.d, self.k)
        h1, i1 = divmod(self.m - self.k, self.k) if self.m > self.k else (0, 0)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "i1", i1)


# ---------------------------------------------------------------------------
# pattern helpers
# ---------------------------------------------------------------------------


def chain_with_interior_pendants(l: int) -> PatternGraph:
    """Chain of ``l`` edges (vertices ``v0..vl``) with one pendant attached to
    every interior vertex ``v1..v{l-1}`` — ``2l`` vertices, ``2l-1`` edges.

    This is the connected component produced by a far-left window landing
    strictly inside a near pair's gap: the shared chain picks up one fresh
    pendant per interior vertex.  For ``l = 1`` it degenerates to a single
    edge; for ``l = 2`` it is the 3-edge star.
    """
    if l < 1:
        raise RbdsError(f"chain_with_interior_pendants needs l >= 1, got {l}")
    edges = [(j, j + 1) for j in range(l)]
    edges += [(j, l + 1 + j) for j in range(1, l)]
    return forest_from_edges(edges)


def _xi_sum(est: EstimatorSet, l: int, kappa_hi: int) -> float:
    """Sum of single-interior-pendant caterpillar probabilities
    ``xi_l^kappa`` for ``kappa = 1..kappa_hi`` (empty sum -> 0)."""
    return sum(est.xi(l, kap) for kap in range(1, kappa_hi + 1))


# ---------------------------------------------------------------------------
# closed-form joint probabilities of one near pair x one far pair
# ---------------------------------------------------------------------------


def w_function(est: EstimatorSet, m: int, k: int, d: int) -> float:
    """Closed-form joint probability of a gap-``k`` near pair and a far pair
    whose left window overlaps the near block from the left by ``d`` vertices
    (``d = 0`` means disjoint: the product of the marginals).

    Branches on whether the wrapped offset ``tau`` exceeds ``i``; the second
    branch's final exponent is read as ``k - tau`` so that the exponents total
    ``k`` in both branches (matching the ``d = 0`` specialization).
    """
    if not 0 <= d <= m:
        raise RbdsError(f"w_function offset d={d} must satisfy 0 <= d <= m={m}")
    lag = LagDecomposition(m, k, d)
    h, i, r, tau = lag.h, lag.i, lag.r, lag.tau
    out = 1.0
    if step_negative(i - tau) == 0:  # tau <= i
        if tau:
            out *= est.omega(h + 1, r + 1) ** tau
        if i - tau:
            out *= est.omega(h + 1, r) ** (i - tau)
        if k - i:
            out *= est.omega(h, r) ** (k - i)
    else:  # tau > i
        if i:
            out *= est.omega(h + 1, r + 1) ** i
        out *= est.omega(h, r + 1) ** (tau - i)
        if k - tau:
            out *= est.omega(h, r) ** (k - tau)
    return out


def u_function(est: EstimatorSet, m: int, k: int, d: int) -> float:
    """Closed-form covariance contribution of a gap-``k`` near pair and a far
    pair whose left window starts ``d`` steps inside the near gap: the joint
    probability minus the product of the marginals.

    The middle factor is the all-interior-pendant caterpillar of chain length
    ``h+1`` (see :func:`chain_with_interior_pendants`); with that reading the
    factor product matches the union graph exactly (same vertex and edge
    counts), which the crosscheck ledger verifies.
    """
    if not 1 <= k <= m - 1:
        raise RbdsError(f"u_function needs 1 <= k <= m-1, got k={k}, m={m}")
    lag = LagDecomposition(m, k, d)
    h, i = lag.h, lag.i
    e_full = i - d
    e_bare = k - i - d
    if d < 0 or e_full < 0 or e_bare < 0:
        raise ExponentNegative(
            f"u_function offsets infeasible: m={m}, k={k}, d={d} gives "
            f"exponents i-d={e_full}, k-i-d={e_bare}; need 0 <= d <= min(i, k-i)"
        )
    out = 1.0
    if e_full:
        out *= est.omega(h + 1, h + 1) ** e_full
    if d:
        out *= est.value(chain_with_interior_pendants(h + 1)) ** d
        out *= est.omega(h, h + 1) ** d
    if e_bare:
        out *= est.omega(h, h) ** e_bare
    return out - w_function(est, m, k, 0) * w_function(est, m, m, 0)


def union_graph_expectation(
    est: EstimatorSet, m: int, k: int, overlap: tuple[str, int]
) -> float:
    """Joint match probability of a gap-``k`` near pair and one far pair,
    evaluated by building the union of the two edge sets directly and taking
    the product of per-component pattern probabilities (exact under
    independence; authoritative where the closed forms drop factors).

    ``overlap`` is ``("left", d1)`` — the far pair's left window overlaps the
    near block from the left by ``d1`` vertices, ``0 <= d1 <= m`` (``0`` =
    disjoint) — or ``("inner", d2)`` — the far pair's left window starts
    ``d2`` steps inside the near gap, ``0 <= d2 <= k-1``.  The far pair's
    right window is always fresh.
    """
    kind, off = overlap
    LagDecomposition(m, k)  # validates 1 <= k <= m
    edges = [(m + rho, m + k + rho) for rho in range(m)]
    far_s = 3 * m + k
    if kind == "left":
        if not 0 <= off <= m:
            raise RbdsError(f"left overlap d1={off} must satisfy 0 <= d1 <= m={m}")
        t2 = off  # near block starts at m; far-left window at m + (off - m)
    elif kind == "inner":
        if not 0 <= off <= k - 1:
            raise RbdsError(
                f"inner overlap d2={off} must satisfy 0 <= d2 <= k-1={k - 1}"
            )
        t2 = m + off
    else:
        raise RbdsError(f"unknown overlap kind {kind!r}")
    edges += [(t2 + rho, far_s + rho) for rho in range(m)]
    return est.value(forest_from_edges(edges))


def w_partials(est: EstimatorSet, m: int, k: int) -> tuple[float, float, float]:
    """Partial derivatives of the disjoint-case joint probability
    ``W(k,0) = (omega_h^0)^(k-i) (omega_{h+1}^0)^i`` with respect to
    ``omega_h^0`` and ``omega_{h+1}^0``, plus the derivative of
    ``W(m,0) = (omega_1^0)^m`` with respect to ``omega_1^0``."""
    lag = LagDecomposition(m, k)
    h, i = lag.h, lag.i
    w_h = est.omega(h, 0)
    w_h1 = est.omega(h + 1, 0) if i else 1.0
    d_h = (k - i) * w_h ** (k - i - 1) * w_h1**i
    d_h1 = i * w_h ** (k - i) * w_h1 ** (i - 1) if i else 0.0
    d_1 = m * est.chain(1) ** (m - 1)
    return d_h, d_h1, d_1


# ---------------------------------------------------------------------------
# exact expectation
# ---------------------------------------------------------------------------


def mu_hat(est: EstimatorSet, factors: CombinatoricFactors, m: int) -> float:
    """Exact expectation of the correlation integral under independence:
    the gap-weighted blend of near-pair probabilities plus the far-pair
    block.  The weights satisfy ``sum_k (T_m - k) + N0 = N``, so an
    estimator set that is identically 1 gives exactly 1."""
    if m < 2:
        raise RbdsError(f"exact expectation defined for m >= 2, got m={m}")
    if factors.m != m:
        raise RbdsError(
            f"factors were built for m={factors.m}, not m={m}"
        )
    acc = 0.0
    for k in range(1, m):
        acc += (factors.T_m - k) * w_function(est, m, k, 0)
    acc += factors.N0 * w_function(est, m, m, 0)
    return acc / factors.N


# ---------------------------------------------------------------------------
# near-pair variance contribution (order T^-2)
# ---------------------------------------------------------------------------


def breve_sigma_sq(
    est: EstimatorSet,
    factors: CombinatoricFactors,
    m: int,
    form: str = "oracle",
) -> float:
    """Variance contribution of the near-pair part of the correlation
    integral, complete through order ``T^-2``: for each gap ``k`` the
    placement count ``script_M(k)`` times twice the left-overlap covariances
    (offsets ``d1 = 1..m``) plus the inner-overlap covariances (offsets
    ``d2 = 1..k-1``).

    ``form="oracle"`` (production) evaluates every joint probability by
    explicit union-graph construction at its true offset.  ``form="literal"``
    evaluates the published closed forms with their folded offset branches
    instead; it is kept for the crosscheck ledger and golden tests (its
    left-overlap values drop disconnected single-edge factors, and its
    branch bookkeeping double-counts one term when ``i = 0``).
    """
    if m < 2:
        raise RbdsError(f"breve term defined for m >= 2, got m={m}")
    if factors.m != m:
        raise RbdsError(f"factors were built for m={factors.m}, not m={m}")
    if form not in ("oracle", "literal"):
        raise RbdsError(f"unknown breve form {form!r}")
    factors.require_full_order()
    w_m0 = w_function(est, m, m, 0)
    total = 0.0
    for k in range(1, m):
        lag = LagDecomposition(m, k)
        i = lag.i
        base = w_function(est, m, k, 0) * w_m0
        if form == "oracle":
            w_part = sum(
                union_graph_expectation(est, m, k, ("left", d1)) - base
                for d1 in range(1, m + 1)
            )
            u_part = sum(
                union_graph_expectation(est, m, k, ("inner", d2)) - base
                for d2 in range(1, k)
            )
        else:
            w_part = sum(
                w_function(est, m, k, d1) - base for d1 in range(1, m + 1)
            )
            if step_negative(k - 2 * i) == 0:
                u_part = (
                    sum(u_function(est, m, k, d2) for d2 in range(1, i + 1))
                    + (k - 2 * i) * u_function(est, m, k, i)
                    + sum(
                        u_function(est, m, k, k - d2)
                        for d2 in range(k - i + 1, k)
                    )
                )
            else:
                u_part = (
                    sum(u_function(est, m, k, d2) for d2 in range(1, k - i + 1))
                    + (2 * i - k) * u_function(est, m, k, k - i)
                    + sum(u_function(est, m, k, k - d2) for d2 in range(i + 1, k))
                )
        total += factors.script_M(k) * (2.0 * w_part + u_part)
    return 2.0 * total / (float(factors.N) ** 2)


# ---------------------------------------------------------------------------
# far-pair variance (exact, all orders)
# ---------------------------------------------------------------------------


def _ramp_sum(cap: int, z: int, lo: int, hi: int) -> int:
    """``sum_{x=lo}^{hi} max(0, min(cap, z - x))`` in closed form."""
    if hi < lo or cap <= 0:
        return 0
    hi = min(hi, z - 1)
    if hi < lo:
        return 0
    total = 0
    plateau_hi = min(hi, z - cap)
    if plateau_hi >= lo:
        total += cap * (plateau_hi - lo + 1)
    ramp_lo = max(lo, z - cap + 1)
    if ramp_lo <= hi:
        a = z - ramp_lo
        b = z - hi
        total += (a + b) * (a - b + 1) // 2
    return total


def _decompose_paths(edges: list[tuple[int, int]]) -> tuple[int, ...]:
    """Connected components of a union of two window-pair edge sets, as a
    sorted tuple of per-component edge counts.  Such unions always have max
    degree 2 and no cycles, so every component is a path."""
    adj: dict[int, list[int]] = {}
    seen_edges: set[tuple[int, int]] = set()
    for a, b in edges:
        e = (a, b) if a < b else (b, a)
        if e in seen_edges:
            continue
        seen_edges.add(e)
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    visited: set[int] = set()
    lengths: list[int] = []
    for v0 in adj:
        if v0 in visited:
            continue
        comp = [v0]
        visited.add(v0)
        stack = [v0]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in visited:
                    visited.add(w)
                    comp.append(w)
                    stack.append(w)
        n_edges = sum(len(adj[v]) for v in comp) // 2
        if n_edges != len(comp) - 1:  # pragma: no cover - structural guarantee
            raise RbdsError("window-pair union is not a forest")
        lengths.append(n_edges)
    return tuple(sorted(lengths))


@lru_cache(maxsize=32)
def tilde_shape_counts(T: int, m: int) -> dict[tuple[int, ...], int]:
    """Integer-exact census of all ordered pairs of far window pairs for a
    series of length ``T`` and window length ``m``, grouped by the shape of
    their union graph (the sorted multiset of path edge-lengths; all lengths
    are ``<= 2m``).  The counts total exactly ``N0**2`` (diagonal included);
    the no-contact class is the remainder, so nothing is enumerated twice.

    The census depends only on ``(T, m)`` and is cached, so per-replication
    variance evaluation reduces to a small dot product.

    A far pair is ``(t, t+g)`` with window indices in ``[0, T_m)`` and gap
    ``g >= m``; the companion pair is ``(t+u, t+v)`` with ``v - u >= m``.
    The number of valid ``t`` placements for fixed ``(g, u, v)`` is
    ``max(0, T_m - max(g, v) - max(0, -u))``, and the union shape depends on
    ``(g, u, v)`` only through anchor differences clamped at ``+-m``.
    """
    if m < 1:
        raise RbdsError(f"window length m={m} must be >= 1")
    if T < 2 * m:
        raise SeriesTooShort(f"T={T} too short for far pairs at m={m}")
    T_m = T - m + 1
    side = T_m - m + 1
    n0 = side * (side - 1) // 2
    g_max = T_m - 1

    plan: dict[tuple[int, ...], int] = {}
    shape_cache: dict[tuple[int, ...], tuple[int, ...]] = {}

    def clamp(x: int) -> int:
        if x >= m:
            return m
        if x <= -m:
            return -m
        return x

    def shape_of(g: int, u: int, v: int) -> tuple[int, ...]:
        key = (
            clamp(u),
            clamp(v),
            clamp(g),
            clamp(u - g),
            clamp(v - g),
            clamp(v - u),
        )
        s = shape_cache.get(key)
        if s is None:
            edges = [(rho, g + rho) for rho in range(m)]
            edges += [(u + rho, v + rho) for rho in range(m)]
            s = _decompose_paths(edges)
            shape_cache[key] = s
        return s

    def add(shape: tuple[int, ...], count: int) -> None:
        if count:
            plan[shape] = plan.get(shape, 0) + count

    contact_total = 0
    diag_total = 0
    for g in range(m, g_max + 1):
        u_contact = sorted(
            set(range(-(m - 1), m)) | set(range(g - m + 1, g + m))
        )
        # PART A: companion's left anchor u in contact with either anchor.
        for u in u_contact:
            q = max(0, -u)
            r_hi = T_m - 1 - q  # largest allowed max(g, v)
            if g > r_hi:
                continue
            lo_v = u + m
            if lo_v > r_hi:
                continue
            cap = T_m - g - q
            explicit = 0
            for v in u_contact:
                if not lo_v <= v <= r_hi:
                    continue
                n_t = T_m - max(g, v) - q
                explicit += n_t
                if u == 0 and v == g:
                    diag_total += n_t  # the pair paired with itself
                    continue
                add(shape_of(g, u, v), n_t)
                contact_total += n_t
            full = _ramp_sum(cap, T_m - q, lo_v, r_hi)
            rest = full - explicit
            if rest > 0:
                v_far = max(g, u, 0) + 2 * m
                add(shape_of(g, u, v_far), rest)
                contact_total += rest
        # PART B: right anchor v in contact, left anchor u out of contact.
        for v in u_contact:
            q_cap = T_m - max(g, v)
            if q_cap < 1:
                continue
            hi_u = v - m
            lo_u = 1 - q_cap
            if lo_u > hi_u:
                continue
            full = _ramp_sum(q_cap, q_cap, -hi_u, -lo_u)
            explicit = 0
            for u in u_contact:
                if lo_u <= u <= hi_u:
                    explicit += q_cap - max(0, -u)
            rest = full - explicit
            if rest > 0:
                u_far = min(0, v) - 2 * m
                add(shape_of(g, u_far, v), rest)
                contact_total += rest

    if diag_total != n0:  # pragma: no cover - internal consistency
        raise RbdsError(
            f"far-pair census inconsistency: diagonal {diag_total} != N0 {n0}"
        )
    add((1,) * m, n0)
    no_contact = n0 * n0 - n0 - contact_total
    if no_contact < 0:  # pragma: no cover - internal consistency
        raise RbdsError("far-pair census inconsistency: negative remainder")
    add((1,) * (2 * m), no_contact)
    return plan


def tilde_sigma_sq(
    est: EstimatorSet, factors: CombinatoricFactors, m: int
) -> float:
    """Exact variance of the far-pair average of match indicators (all
    orders in ``T``): every ordered pair of far pairs contributes the joint
    probability of its union graph minus the squared marginal, grouped by
    union shape with integer-exact counts."""
    if factors.m != m:
        raise RbdsError(f"factors were built for m={factors.m}, not m={m}")
    plan = tilde_shape_counts(factors.T, m)
    chain_val = {}

    def chain(l: int) -> float:
        v = chain_val.get(l)
        if v is None:
            v = est.chain(l)
            chain_val[l] = v
        return v

    w_sq = chain(1) ** (2 * m)
    terms = []
    for shape, count in sorted(plan.items()):
        val = 1.0
        for length in shape:
            val *= chain(length)
        terms.append(count * (val - w_sq))
    n0 = factors.N0
    return math.fsum(terms) / (float(n0) ** 2)


# ---------------------------------------------------------------------------
# the seven variance terms and their combination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RbdsIntermediates:
    """Everything behind one corrected-statistic evaluation: the exact mean,
    the two variance building blocks, the seven signed variance terms (keys
    ``mm, 11, mh, mh1, m1, 1h, 1h1``), and their combination ``nu_sq``."""

    mu_hat: float
    breve_sigma_sq: float
    tilde_sigma_sq: float
    sigma_terms: dict[str, float]
    nu_sq: float


def nu_sq(
    est: EstimatorSet,
    factors: CombinatoricFactors,
    m: int,
    *,
    breve_form: str = "oracle",
    mh_form: str = "derived",
    m1_form: str = "derived",
) -> RbdsIntermediates:
    """Variance of ``C - mu_hat``: the full-integral variance plus the
    plug-in variance minus twice their covariance, expanded into seven
    closed-form terms combined as ``mm + 11 - mh - mh1 - m1 + 1h + 1h1``.

    ``mh_form`` and ``m1_form`` select between the published displays
    (``"closed_form"``) and the forms validated against simulation
    (``"derived"``, the default; see docs/CHANGES.md):

    * ``mh/mh1``: derived uses coefficient 2/N^2 where the display has 4/N^2;
    * ``m1``: derived uses per-gap weight ``2(T_m-k)(T-m-k)`` (twice the
      display's binomial), sums the second pendant family to ``h``, uses
      coefficient ``-(m+k)`` on the marginal part, and replaces the display's
      tail bracket with one whose terms all vanish at probability 1.

    Raises :class:`NonPositiveVariance` when the combination is not a usable
    positive variance (degenerate proximity or a too-extreme threshold).
    """
    if m < 2:
        raise RbdsError(f"corrected variance defined for m >= 2, got m={m}")
    if factors.m != m:
        raise RbdsError(f"factors were built for m={factors.m}, not m={m}")
    if mh_form not in ("derived", "closed_form"):
        raise RbdsError(f"unknown mh form {mh_form!r}")
    if m1_form not in ("derived", "closed_form"):
        raise RbdsError(f"unknown m1 form {m1_form!r}")
    factors.require_full_order()

    T = factors.T
    T_m = factors.T_m
    n_pairs = float(factors.N)
    n0 = float(factors.N0)
    ratio = n0 / n_pairs
    c_t1 = factors.c_ratio(1)

    w = est.chain(1)
    w2 = est.chain(2)
    w_m0 = w**m
    w1_partial = m * w ** (m - 1)

    breve = breve_sigma_sq(est, factors, m, form=breve_form)
    tilde = tilde_sigma_sq(est, factors, m)
    s_mm = breve + ratio**2 * tilde

    s_11 = (
        2.0
        * (ratio * w1_partial) ** 2
        * c_t1
        * (w + 2.0 * (T - 2) * w2 - (2.0 * T - 3) * w * w)
    )

    mh_coef = 2.0 if mh_form == "derived" else 4.0
    s_mh = 0.0
    s_mh1 = 0.0
    s_1h = 0.0
    s_1h1 = 0.0
    m1_sum = 0.0
    for k in range(1, m):
        lag = LagDecomposition(m, k)
        h = lag.h
        d_h, d_h1, _ = w_partials(est, m, k)
        w_k0 = w_function(est, m, k, 0)
        bracket_h = 2.0 * est.omega(h, 1) + _xi_sum(est, h, h - 1)
        s_mh += (
            (T_m - k)
            * d_h
            * factors.c_ratio(h)
            * factors.falling(h + 2)
            * (w1_partial * bracket_h - m * (h + 1) * w_m0 * est.omega(h, 0))
        )
        s_1h += (
            (T_m - k)
            * d_h
            * (T - h - 1)
            * (bracket_h - (h + 1) * w * est.omega(h, 0))
        )
        if d_h1:
            bracket_h1 = 2.0 * est.omega(h + 1, 1) + _xi_sum(est, h + 1, h)
            s_mh1 += (
                (T_m - k)
                * d_h1
                * factors.c_ratio(h + 1)
                * factors.falling(h + 3)
                * (
                    w1_partial * bracket_h1
                    - m * (h + 2) * w_m0 * est.omega(h + 1, 0)
                )
            )
            s_1h1 += (
                (T_m - k)
                * d_h1
                * (T - h - 2)
                * (bracket_h1 - (h + 2) * w * est.omega(h + 1, 0))
            )
        if m1_form == "derived":
            b_k = d_h * bracket_h - (m + k) * w_k0 * w
            if d_h1:
                b_k += d_h1 * (2.0 * est.omega(h + 1, 1) + _xi_sum(est, h + 1, h))
            m1_sum += 2.0 * (T_m - k) * (T - m - k) * b_k
        else:
            inner = d_h * (
                2.0 * est.omega(h, 1)
                + _xi_sum(est, h, lag.h1)
                + lag.i1 * est.xi(h, h - 1)
            )
            if d_h1:
                inner += d_h1 * (
                    2.0 * est.omega(h + 1, 1) + _xi_sum(est, h + 1, lag.h1)
                )
            inner -= (m - k) * w_k0 * w
            m1_sum += 2.0 * factors.script_N(k) * inner
    s_mh *= mh_coef / n_pairs**2
    s_mh1 *= mh_coef / n_pairs**2
    s_1h *= 4.0 * n0 * c_t1 / n_pairs**2 * w1_partial
    s_1h1 *= 4.0 * n0 * c_t1 / n_pairs**2 * w1_partial

    if m1_form == "derived":
        w3 = est.chain(3)
        tail = (
            4.0 * m * (T - 2 * m) * (w2 * w ** (m - 1) - w ** (m + 1))
            + 2.0 * m * (w**m - w ** (m + 1))
            + 4.0 * m * (m - 1) * (w3 * w ** (m - 2) - w ** (m + 1))
        )
        s_m1 = 2.0 * n0 * c_t1 / n_pairs**2 * w1_partial * (m1_sum + n0 * tail)
    else:
        m2 = factors.falling(2)
        m3 = factors.falling(3)
        w3 = est.chain(3)
        tail = 2.0 * w1_partial * (
            (m3 + (m - 1) * m2) * w2 + m2 * (w + (m - 1) * w3 / w)
        ) - w_m0 * w * (m * m3 + (4 * m - 2) * m2)
        s_m1 = 2.0 * n0 * c_t1 / n_pairs**2 * w1_partial * (m1_sum + tail)

    terms = {
        "mm": s_mm,
        "11": s_11,
        "mh": s_mh,
        "mh1": s_mh1,
        "m1": s_m1,
        "1h": s_1h,
        "1h1": s_1h1,
    }
    total = s_mm + s_11 - s_mh - s_mh1 - s_m1 + s_1h + s_1h1
    mu = mu_hat(est, factors, m)
    inter = RbdsIntermediates(
        mu_hat=mu,
        breve_sigma_sq=breve,
        tilde_sigma_sq=tilde,
        sigma_terms=terms,
        nu_sq=total,
    )
    if not math.isfinite(total) or total <= 0.0:
        raise NonPositiveVariance(
            f"corrected variance is not positive (nu_sq={total!r}) at "
            f"T={T}, m={m}: the expansion is unreliable in this "
            "threshold/length regime"
        )
    return inter


# ---------------------------------------------------------------------------
# the corrected statistic
# ---------------------------------------------------------------------------


def rbds_statistic(series, config: TestConfig) -> TestResult:
    """Corrected serial-independence statistic
    ``(C - mu_hat) / sqrt(nu_sq)``, compared two-sided against N(0,1).

    Unlike the classic statistic there is no ``sqrt(T)`` scaling: ``nu_sq``
    is the finite-sample variance of ``C - mu_hat`` itself.
    """
    if config.m < 2:
        raise RbdsError(
            f"corrected statistic requires m >= 2, got m={config.m}"
        )
    ts = series if isinstance(series, TimeSeries) else TimeSeries(series)
    factors = combinatoric_factors(ts.T, config.m)
    factors.require_full_order()
    P = build_proximity(ts, config.epsilon)
    parts = correlation_integral(P, config.m)
    w1h, w2h = omega12_hat(P)
    if not 0.0 < w1h < 1.0:
        raise DegenerateScale(
            f"single-gap match frequency {w1h!r} is degenerate at "
            f"epsilon={config.epsilon!r}; the variance expansion needs "
            "matches to be neither empty nor saturated"
        )
    est = estimator_closure(P, config.m)
    inter = nu_sq(est, factors, config.m)
    scale = math.sqrt(inter.nu_sq)
    stat = (parts.c_full - inter.mu_hat) / scale
    p_value = normal_two_sided_p(stat)
    return TestResult(
        method="rbds",
        statistic=float(stat),
        p_value=float(p_value),
        reject=bool(p_value < config.alpha),
        m=config.m,
        epsilon=float(config.epsilon),
        alpha=config.alpha,
        T=ts.T,
        c_full=parts.c_full,
        omega1_hat=w1h,
        omega2_hat=w2h,
        variance_sq=inter.nu_sq,
        mu_hat=inter.mu_hat,
        nu_sq=inter.nu_sq,
        sigma_terms=dict(inter.sigma_terms),
    )
