"""The sample correlation integral and its near/far pair split.

For window length ``m`` there are ``T_m = T - m + 1`` windows and
``N = C(T_m, 2)`` window pairs ``t < s``.  A pair *matches* when all ``m``
aligned offsets are within epsilon.  Pairs split by gap ``s - t``:

* **near** pairs (``1 <= s - t <= m - 1``) have overlapping windows;
* **far** pairs (``s - t >= m``) have disjoint index windows; there are
  ``N0 = C(T_m - m + 1, 2)`` of them.

The full, near-only, and far-only match rates are ``c_full`` (out of ``N``),
``c_breve`` (out of ``N``), and ``c_tilde`` (out of ``N0``), linked by the
exact identity ``N * c_full = N * c_breve + N0 * c_tilde``.

The kernel works on packed 64-bit rows: the window indicator accumulates as a
word-parallel AND of bit-shifted row blocks, pair totals come from popcounts,
and near-pair counts read ``m - 1`` sub-diagonals directly from the packed
words."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CombinatoricFactors, ProximityStructure, shift_packed_rows
from .errors import SeriesTooShort

__all__ = ["CorrelationIntegralParts", "correlation_integral", "window_match_counts"]

_WORD = 64


@dataclass(frozen=True)
class CorrelationIntegralParts:
    """Window-pair match counts and rates for one proximity structure."""

    T: int
    m: int
    T_m: int
    N: int
    N0: int
    pairs_all: int
    pairs_near: int
    pairs_far: int

    @property
    def c_full(self) -> float:
        """Match rate over all window pairs."""
        return self.pairs_all / self.N

    @property
    def c_breve(self) -> float:
        """Near-pair (overlapping windows) match rate, out of ``N``."""
        return self.pairs_near / self.N

    @property
    def c_tilde(self) -> float:
        """Far-pair (disjoint windows) match rate, out of ``N0``."""
        return self.pairs_far / self.N0


def window_match_counts(P: ProximityStructure, m: int) -> tuple[int, int]:
    """Exact counts ``(pairs_all, pairs_near)`` of matching window pairs.

    ``pairs_all`` counts pairs ``0 <= t < s < T_m`` with all ``m`` offsets
    within epsilon; ``pairs_near`` restricts to gaps ``s - t < m``.
    """
    T = P.T
    if m < 1:
        raise SeriesTooShort(f"window length m={m} must be >= 1")
    if T < 2 * m:
        raise SeriesTooShort(f"T={T} too short for window length m={m}: need T >= 2m")
    T_m = T - m + 1
    W = P.packed.shape[1]

    # acc[t] bit s  =  prod_rho bits[t + rho][s + rho], for t, s in [0, T_m)
    acc = None
    for rho in range(m):
        block = shift_packed_rows(P.packed, rho, T)[rho : rho + T_m]
        acc = block.copy() if acc is None else np.bitwise_and(acc, block, out=acc)

    # mask bits at s >= T_m
    mask = np.zeros(W, dtype=np.uint64)
    full_words, rem = divmod(T_m, _WORD)
    mask[:full_words] = np.uint64(0xFFFFFFFFFFFFFFFF)
    if rem:
        mask[full_words] = np.uint64((1 << rem) - 1)
    acc &= mask[None, :]

    total = int(np.bitwise_count(acc).sum())
    # the matrix is symmetric with an all-ones diagonal (each window matches
    # itself), so the strict upper triangle holds (total - T_m) / 2 pairs
    pairs_all = (total - T_m) // 2

    pairs_near = 0
    for g in range(1, m):
        t = np.arange(T_m - g, dtype=np.int64)
        s = t + g
        words = acc[t, s // _WORD]
        bits = (words >> (s % _WORD).astype(np.uint64)) & np.uint64(1)
        pairs_near += int(bits.sum())

    return pairs_all, pairs_near


def correlation_integral(P: ProximityStructure, m: int) -> CorrelationIntegralParts:
    """Compute the correlation integral of window length ``m`` and its split
    into near (overlapping) and far (disjoint) window pairs."""
    factors = CombinatoricFactors(T=P.T, m=m)
    pairs_all, pairs_near = window_match_counts(P, m)
    return CorrelationIntegralParts(
        T=P.T,
        m=m,
        T_m=factors.T_m,
        N=factors.N,
        N0=factors.N0,
        pairs_all=pairs_all,
        pairs_near=pairs_near,
        pairs_far=pairs_all - pairs_near,
    )
