"""The classic z-statistic test of serial independence.

The statistic is ``sqrt(T) * (C_mT - w1^m) / V_mT`` where ``C_mT`` is the
full correlation integral of window length ``m``, ``w1`` is the exact
distinct-pair close rate, and ``V_mT^2`` is a plug-in estimate of the
asymptotic variance built from the pair rate ``w1`` and the common-neighbor
rate ``w2``.  Under independence it is asymptotically standard normal; in
finite samples it over-rejects, which is what the finite-sample-centered
variant in :mod:`.rbds` corrects.

Two algebraically different variance expressions are provided:

* ``"classic"`` (default): the standard form
  ``4 [ w2^m + 2 sum_j w2^(m-j) w1^(2j) + (m-1)^2 w1^(2m) - m^2 w2 w1^(2m-2) ]``,
  strictly positive whenever ``w2 > w1^2``;
* ``"reduced"``: an algebraically smaller variant equal to the classic form
  minus ``3 (w2^m - w1^(2m))``.  At ``m = 2`` it factors as
  ``(w2 - w1^2)(w2 - 7 w1^2)``, which is **negative** at typical values
  (e.g. Gaussian data with a half-sd threshold), so it cannot standardize the
  statistic there; it is kept only as an algebraic reference and is rejected
  by the positivity guard when it fails.

Both vanish when ``w2 == w1^2`` (degenerate kernel) and collapse when the
threshold saturates the indicator matrix; those cases surface as
``DegenerateScale`` at the statistic level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    TestConfig,
    TimeSeries,
    build_proximity,
    normal_cdf,
    normal_two_sided_p,
)
from .correlation import correlation_integral
from .errors import DegenerateScale, RbdsError, SeriesTooShort
from .patterns import omega12_hat

__all__ = ["TestResult", "bds_variance", "bds_statistic", "DEFAULT_VARIANCE_FORM"]

# The reduced form is negative at typical plug-in values (see module
# docstring), so the classic form is the only usable default; the Monte Carlo
# size calibration in docs/VALIDATION.md confirms it reproduces the reference
# size tables.
DEFAULT_VARIANCE_FORM = "classic"


@dataclass(frozen=True)
class TestResult:
    """Outcome of one test: the statistic, its two-sided normal p-value, the
    decision at level alpha, and the intermediates needed to audit it."""

    __test__ = False  # not a pytest class, despite the name

    method: str
    statistic: float
    p_value: float
    reject: bool
    m: int
    epsilon: float
    alpha: float
    T: int
    c_full: float
    omega1_hat: float
    omega2_hat: float
    variance_sq: float
    mu_hat: Optional[float] = None
    nu_sq: Optional[float] = None
    sigma_terms: Optional[dict] = None

    def to_json_dict(self) -> dict:
        """Stable wire format (schema 1); field order is part of the format."""
        out = {
            "method": self.method,
            "m": self.m,
            "epsilon": self.epsilon,
            "T": self.T,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
            "c_full": self.c_full,
            "omega1_hat": self.omega1_hat,
            "omega2_hat": self.omega2_hat,
        }
        if self.method == "rbds":
            out["mu_hat"] = self.mu_hat
            out["nu_sq"] = self.nu_sq
            out["sigma_terms"] = self.sigma_terms
        out["schema"] = 1
        return out


def bds_variance(
    w1: float,
    w2: float,
    m: int,
    T_scale: int | None = None,
    form: str = DEFAULT_VARIANCE_FORM,
) -> float:
    """Plug-in asymptotic variance of ``sqrt(T) * (C_mT - w1^m)``.

    ``T_scale`` is accepted for interface stability (the sample size enters
    the statistic through its ``sqrt(T)`` factor, not through this
    expression) and is only validated.
    """
    if m < 2:
        raise RbdsError(f"variance expression defined for m >= 2, got m={m}")
    if T_scale is not None and T_scale < 2 * m:
        raise SeriesTooShort(f"T={T_scale} too short for m={m}")
    if not (0.0 < w1 < 1.0):
        raise DegenerateScale(
            f"pair rate w1={w1} is degenerate; threshold saturates the indicator"
        )
    if not (0.0 <= w2 <= 1.0):
        raise RbdsError(f"w2={w2} outside [0, 1]")
    if form == "reduced":
        acc = 4.0 * m * (m - 2.0) * w1 ** (2 * m - 2) * (w2 - w1**2)
        acc += w2**m - w1 ** (2 * m)
        ksum = 0.0
        for k in range(1, m):
            ksum += w1 ** (2 * k) * (w2 ** (m - k) - w1 ** (2 * m - 2 * k))
            ksum -= m * w1 ** (2 * m - 2) * (w2 - w1**2)
        return acc + 8.0 * ksum
    if form == "classic":
        jsum = sum(w2 ** (m - j) * w1 ** (2 * j) for j in range(1, m))
        return 4.0 * (
            w2**m
            + 2.0 * jsum
            + (m - 1.0) ** 2 * w1 ** (2 * m)
            - m**2 * w2 * w1 ** (2 * m - 2)
        )
    raise RbdsError(f"unknown variance form {form!r}")


def bds_statistic(
    series: TimeSeries,
    config: TestConfig,
    variance_form: str = DEFAULT_VARIANCE_FORM,
) -> TestResult:
    """Run the z-test: statistic, two-sided p-value, decision at alpha.

    Raises ``DegenerateScale`` when the threshold saturates or empties the
    indicator matrix, or when the variance estimate is not strictly positive.
    """
    if not isinstance(series, TimeSeries):
        series = TimeSeries(np.asarray(series, dtype=np.float64))
    m = config.m
    if m < 2:
        raise RbdsError(f"test defined for m >= 2, got m={m}")
    if series.T < 2 * m:
        raise SeriesTooShort(f"T={series.T} too short for m={m}: need T >= 2m")
    P = build_proximity(series, config.epsilon)
    w1, w2 = omega12_hat(P)
    if not (0.0 < w1 < 1.0):
        raise DegenerateScale(
            f"threshold epsilon={config.epsilon} gives pair rate {w1}; "
            "no usable variation in the indicator matrix"
        )
    parts = correlation_integral(P, m)
    var_sq = bds_variance(w1, w2, m, T_scale=series.T, form=variance_form)
    if not (var_sq > 0.0) or not math.isfinite(var_sq):
        raise DegenerateScale(f"variance estimate {var_sq} is not strictly positive")
    z = math.sqrt(series.T) * (parts.c_full - w1**m) / math.sqrt(var_sq)
    p = normal_two_sided_p(z)
    return TestResult(
        method="bds",
        statistic=z,
        p_value=p,
        reject=bool(p < config.alpha),
        m=m,
        epsilon=config.epsilon,
        alpha=config.alpha,
        T=series.T,
        c_full=parts.c_full,
        omega1_hat=w1,
        omega2_hat=w2,
        variance_sq=var_sq,
    )


def critical_value(alpha: float) -> float:
    """Two-sided standard normal critical value ``z_{alpha/2}`` via bisection
    on the erfc-based CDF (no external dependencies; <= 1e-12 absolute)."""
    lo, hi = 0.0, 40.0
    target = 1.0 - alpha / 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
