"""Fundamental types: time series, test configuration, combinatoric factors,
and the strict pairwise-proximity structure every estimator consumes.

Conventions fixed here (and tested explicitly):

* the closeness indicator is **strictly** less-than: ``|u_t - u_s| < eps``;
* the discrete step indicator ``step_negative(y)`` is 1 iff ``y < 0``;
* sample standard deviation uses the T-1 denominator;
* the proximity matrix stores the diagonal as 1 (``|u_t - u_t| = 0 < eps``);
  operations needing distinct indices mask it explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    ConstantSeries,
    NonFiniteInput,
    NonPositiveEpsilon,
    RbdsError,
    SeriesTooShort,
)

__all__ = [
    "TimeSeries",
    "TestConfig",
    "CombinatoricFactors",
    "ProximityStructure",
    "build_proximity",
    "combinatoric_factors",
    "epsilon_from_fraction",
    "normal_cdf",
    "normal_two_sided_p",
    "step_negative",
    "ratio_product",
]


def normal_cdf(x: float) -> float:
    """Standard normal CDF via erfc; absolute error below 1e-12."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_two_sided_p(z: float) -> float:
    """Two-sided tail probability ``2(1 - Phi(|z|))`` via erfc (stable in the
    far tail where ``1 - Phi`` underflows)."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def step_negative(y: float | int) -> int:
    """Discrete step indicator: 1 iff ``y < 0`` (strict), else 0."""
    return 1 if y < 0 else 0


def ratio_product(numerators: Iterable[float], denominators: Iterable[float]) -> float:
    """Product of ``numerators`` divided by product of ``denominators``,
    evaluated as interleaved small-factor ratios so that intermediate values
    stay near 1 (no factorials, no overflow/underflow)."""
    nums = list(numerators)
    dens = list(denominators)
    out = 1.0
    for i in range(max(len(nums), len(dens))):
        if i < len(nums):
            out *= nums[i]
        if i < len(dens):
            out /= dens[i]
    return out


@dataclass(frozen=True)
class TimeSeries:
    """An observed scalar series ``u_1 .. u_T`` (finite values, T >= 2)."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise NonFiniteInput("series must be one-dimensional")
        if arr.shape[0] < 2:
            raise SeriesTooShort(f"series length {arr.shape[0]} < 2")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("series contains NaN or infinite values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def T(self) -> int:
        return int(self.values.shape[0])

    def sample_sd(self) -> float:
        """Sample standard deviation with the T-1 denominator."""
        return float(np.std(self.values, ddof=1))


@dataclass(frozen=True)
class TestConfig:
    """Test parameters: window length ``m``, threshold ``epsilon``, level
    ``alpha``."""

    __test__ = False  # not a pytest class, despite the name

    m: int
    epsilon: float
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if int(self.m) != self.m or self.m < 1:
            raise SeriesTooShort(f"window length m={self.m} must be an integer >= 1")
        object.__setattr__(self, "m", int(self.m))
        if not (self.epsilon > 0.0) or not math.isfinite(self.epsilon):
            raise NonPositiveEpsilon(f"epsilon={self.epsilon} must be finite and > 0")
        if not (0.0 < self.alpha < 1.0):
            raise RbdsError(f"alpha={self.alpha} must lie in (0, 1)")


@dataclass(frozen=True)
class CombinatoricFactors:
    """Exact counting quantities for sample length ``T`` and window length
    ``m``:

    * ``T_m = T - m + 1`` windows;
    * ``N = C(T_m, 2)`` window pairs;
    * ``N0 = C(T_m - m + 1, 2)`` disjoint-window ("far") pairs;
    * ``c_ratio(x)`` = ``1 / (T (T-1) ... (T-x))`` (x+1 factors);
    * ``falling(x)`` = ``(T-2m+2)(T-2m+1)...(T-2m+3-x)`` (x factors);
    * ``script_M(k)`` = ``(T-4m-k+3)(T-4m-k+4)``;
    * ``script_N(k)`` = ``C(T_m - k, 2)``.
    """

    T: int
    m: int
    T_m: int = field(init=False)
    N: int = field(init=False)
    N0: int = field(init=False)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise SeriesTooShort(f"m={self.m} must be >= 1")
        if self.T < 2 * self.m:
            raise SeriesTooShort(
                f"T={self.T} is too short for m={self.m}: need T >= 2m for at "
                "least one disjoint window pair"
            )
        T_m = self.T - self.m + 1
        object.__setattr__(self, "T_m", T_m)
        object.__setattr__(self, "N", T_m * (T_m - 1) // 2)
        n0_side = T_m - self.m + 1
        object.__setattr__(self, "N0", n0_side * (n0_side - 1) // 2)

    def c_ratio(self, x: int) -> float:
        """``1 / (T (T-1) ... (T-x))`` as a product of reciprocals."""
        if x < 0 or self.T - x <= 0:
            raise SeriesTooShort(f"c_ratio({x}) undefined for T={self.T}")
        out = 1.0
        for j in range(x + 1):
            out /= self.T - j
        return out

    def falling(self, x: int) -> float:
        """``(T-2m+2)(T-2m+1)...(T-2m+3-x)`` — x factors, the number of ways
        to place x extra distinct indices outside a disjoint window pair,
        divided out of the pair count 2*N0 one factor at a time."""
        if x < 0:
            raise SeriesTooShort(f"falling({x}) undefined")
        start = self.T - 2 * self.m + 2
        out = 1.0
        for j in range(x):
            out *= start - j
        return out

    def script_M(self, k: int) -> float:
        """``(T-4m-k+3)(T-4m-k+4)`` — the near/far placement count entering
        the near-window covariance sum; negative for tiny T (rejected by the
        statistic-level guards)."""
        base = self.T - 4 * self.m - k + 3
        return float(base) * float(base + 1)

    def script_N(self, k: int) -> int:
        """``C(T_m - k, 2)``."""
        side = self.T_m - k
        if side < 2:
            return 0
        return side * (side - 1) // 2

    def require_full_order(self) -> None:
        """Guard for the finite-sample variance: every ``script_M(k)`` with
        ``k <= m-1`` must be positive, i.e. ``T >= 4m + (m-1) - 3``."""
        k_max = max(1, self.m - 1)
        if self.T < 4 * self.m + k_max - 3:
            raise SeriesTooShort(
                f"T={self.T} too short for the order-complete variance at "
                f"m={self.m}: need T >= {4 * self.m + k_max - 3}"
            )


def combinatoric_factors(T: int, m: int) -> CombinatoricFactors:
    """Validated constructor for :class:`CombinatoricFactors`."""
    return CombinatoricFactors(T=int(T), m=int(m))


_WORD = 64


def _pack_bool_rows(bits: np.ndarray) -> np.ndarray:
    """Pack a (T, T) boolean matrix into (T, W) uint64 words, bit ``s`` of row
    ``t`` stored at word ``s // 64`` bit ``s % 64`` (little-endian bit order)."""
    T = bits.shape[0]
    words = (T + _WORD - 1) // _WORD
    packed_u8 = np.packbits(bits, axis=1, bitorder="little")
    pad_bytes = words * 8 - packed_u8.shape[1]
    if pad_bytes:
        packed_u8 = np.concatenate(
            [packed_u8, np.zeros((T, pad_bytes), dtype=np.uint8)], axis=1
        )
    return packed_u8.view(np.uint64)


def shift_packed_rows(packed: np.ndarray, rho: int, T: int) -> np.ndarray:
    """Shift every packed row's bit index down by ``rho``: output bit ``s``
    equals input bit ``s + rho`` (bits beyond ``T`` read as 0)."""
    if rho == 0:
        return packed
    word_off, bit_off = divmod(rho, _WORD)
    W = packed.shape[1]
    shifted = np.zeros_like(packed)
    if word_off < W:
        shifted[:, : W - word_off] = packed[:, word_off:]
    if bit_off:
        carry = np.zeros_like(shifted)
        carry[:, :-1] = shifted[:, 1:] << np.uint64(_WORD - bit_off)
        shifted = (shifted >> np.uint64(bit_off)) | carry
    return shifted


@dataclass(frozen=True)
class ProximityStructure:
    """Symmetric strict-closeness indicator matrix for one series and one
    threshold, stored both as packed 64-bit words (word-parallel kernels) and
    as a boolean matrix (vector kernels), plus per-row popcounts with the
    diagonal included."""

    T: int
    epsilon: float
    bits: np.ndarray          # (T, T) bool, diagonal True
    packed: np.ndarray        # (T, W) uint64, little-endian bit order
    row_counts: np.ndarray    # (T,) int64, diagonal included

    _float_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def float_matrix(self) -> np.ndarray:
        """Float64 view of the indicator matrix (cached; read-only)."""
        mat = self._float_cache.get("f64")
        if mat is None:
            mat = self.bits.astype(np.float64)
            mat.setflags(write=False)
            self._float_cache["f64"] = mat
        return mat

    @property
    def total_count(self) -> int:
        """Total number of 1 bits including the diagonal."""
        return int(self.row_counts.sum())


def build_proximity(series: TimeSeries, epsilon: float) -> ProximityStructure:
    """Build the strict indicator structure ``bits[t][s] = 1 iff
    |u_t - u_s| < epsilon``; symmetric with an all-ones diagonal."""
    if not isinstance(series, TimeSeries):
        series = TimeSeries(np.asarray(series, dtype=np.float64))
    if not (epsilon > 0.0) or not math.isfinite(epsilon):
        raise NonPositiveEpsilon(f"epsilon={epsilon} must be finite and > 0")
    u = series.values
    bits = np.abs(u[:, None] - u[None, :]) < epsilon
    packed = _pack_bool_rows(bits)
    row_counts = bits.sum(axis=1).astype(np.int64)
    bits.setflags(write=False)
    packed.setflags(write=False)
    row_counts.setflags(write=False)
    return ProximityStructure(
        T=series.T,
        epsilon=float(epsilon),
        bits=bits,
        packed=packed,
        row_counts=row_counts,
    )


def epsilon_from_fraction(series: TimeSeries, frac: float) -> float:
    """``frac`` times the sample standard deviation (T-1 denominator)."""
    if not isinstance(series, TimeSeries):
        series = TimeSeries(np.asarray(series, dtype=np.float64))
    if not (frac > 0.0) or not math.isfinite(frac):
        raise NonPositiveEpsilon(f"frac={frac} must be finite and > 0")
    sd = series.sample_sd()
    if not (sd > 0.0):
        raise ConstantSeries("sample variance is zero; scale-relative epsilon undefined")
    return frac * sd
