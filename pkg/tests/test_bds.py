"""Unit tests for rbds.bds: variance forms, the z-statistic, result type."""

import json
import math

import numpy as np
import pytest

from rbds import (
    DegenerateScale,
    RbdsError,
    SeriesTooShort,
    TestConfig,
    TimeSeries,
    normal_cdf,
    normal_two_sided_p,
)
from rbds.bds import DEFAULT_VARIANCE_FORM, bds_statistic, bds_variance, critical_value

from oracles import naive_bds_components


def classic_transcription(w1, w2, m):
    """Independent textbook transcription of the classic variance."""
    s = 0.0
    for j in range(1, m):
        s += w2 ** (m - j) * w1 ** (2 * j)
    return 4.0 * (w2**m + 2.0 * s + (m - 1) ** 2 * w1 ** (2 * m) - m**2 * w2 * w1 ** (2 * m - 2))


GRID = [
    (0.2, 0.05),
    (0.2763, 0.10),
    (0.5, 0.30),
    (0.7, 0.52),
    (0.1, 0.011),
]


class TestVarianceForms:
    def test_default_is_classic(self):
        assert DEFAULT_VARIANCE_FORM == "classic"

    def test_m2_symbolic_expansion_golden(self):
        import sympy as sp

        w1, w2 = sp.symbols("w1 w2", positive=True)
        m = 2
        generic = (
            4 * m * (m - 2) * w1 ** (2 * m - 2) * (w2 - w1**2)
            + w2**m
            - w1 ** (2 * m)
            + 8
            * sp.Add(
                *[
                    w1 ** (2 * k) * (w2 ** (m - k) - w1 ** (2 * m - 2 * k))
                    - m * w1 ** (2 * m - 2) * (w2 - w1**2)
                    for k in range(1, m)
                ]
            )
        )
        displayed = (
            w2**2
            - w1**4
            + 8 * (w1**2 * (w2 - w1**2) - 2 * w1**2 * (w2 - w1**2))
        )
        assert sp.simplify(generic - displayed) == 0
        factored = (w2 - w1**2) * (w2 - 7 * w1**2)
        assert sp.simplify(generic - factored) == 0
        # the code's reduced branch evaluates the same polynomial
        f = sp.lambdify((w1, w2), generic)
        for a, b in GRID:
            assert bds_variance(a, b, 2, form="reduced") == pytest.approx(
                f(a, b), rel=1e-12
            )

    def test_classic_matches_independent_transcription(self):
        for m in (2, 3, 4, 6):
            for a, b in GRID:
                assert bds_variance(a, b, m, form="classic") == pytest.approx(
                    classic_transcription(a, b, m), rel=1e-12
                )

    def test_reduced_classic_offset_identity(self):
        for m in (2, 3, 4, 5):
            for a, b in GRID:
                red = bds_variance(a, b, m, form="reduced")
                cla = bds_variance(a, b, m, form="classic")
                assert cla - red == pytest.approx(
                    3.0 * (b**m - a ** (2 * m)), rel=1e-10, abs=1e-14
                )

    def test_degenerate_at_independence_consistent_values(self):
        # w2 == w1^2 makes the leading kernel degenerate: both forms vanish
        for w1 in (0.2, 0.4, 0.6):
            assert bds_variance(w1, w1**2, 2, form="classic") == pytest.approx(0.0, abs=1e-14)
            assert bds_variance(w1, w1**2, 2, form="reduced") == pytest.approx(0.0, abs=1e-14)

    def test_reduced_is_negative_at_typical_values(self):
        # why the classic form is the production default: at Gaussian-like
        # plug-ins the reduced polynomial (w2 - w1^2)(w2 - 7 w1^2) is negative
        w1, w2 = 0.2763, 0.10
        assert bds_variance(w1, w2, 2, form="reduced") < 0.0
        assert bds_variance(w1, w2, 2, form="classic") > 0.0

    def test_classic_positive_when_w2_exceeds_w1_squared(self):
        for a, b in GRID:
            if b > a**2:
                for m in (2, 3, 5):
                    assert bds_variance(a, b, m, form="classic") > 0.0

    def test_degenerate_w1_raises(self):
        for w1 in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(DegenerateScale):
                bds_variance(w1, 0.5, 2)

    def test_invalid_m_and_form(self):
        with pytest.raises(RbdsError):
            bds_variance(0.3, 0.1, 1)
        with pytest.raises(RbdsError):
            bds_variance(0.3, 0.1, 2, form="other")
        with pytest.raises(RbdsError):
            bds_variance(0.3, 1.2, 2)

    def test_t_scale_validated_but_inert(self):
        v1 = bds_variance(0.3, 0.12, 2, T_scale=100)
        v2 = bds_variance(0.3, 0.12, 2, T_scale=5000)
        assert v1 == v2
        with pytest.raises(SeriesTooShort):
            bds_variance(0.3, 0.12, 3, T_scale=5)


class TestCriticalValue:
    def test_against_known_quantiles(self):
        assert critical_value(0.05) == pytest.approx(1.959963984540054, abs=1e-9)
        assert critical_value(0.10) == pytest.approx(1.6448536269514722, abs=1e-9)
        assert critical_value(0.01) == pytest.approx(2.5758293035489004, abs=1e-9)


class TestStatistic:
    def test_matches_brute_force_seed42_T500(self):
        rng = np.random.default_rng(42)
        u = rng.normal(size=500)
        ts = TimeSeries(u)
        eps = 0.5 * ts.sample_sd()
        res = bds_statistic(ts, TestConfig(m=2, epsilon=eps))
        c_ref, w1_ref, w2_ref = naive_bds_components(u, 2, eps)
        assert res.c_full == pytest.approx(c_ref, abs=1e-12)
        assert res.omega1_hat == pytest.approx(w1_ref, abs=1e-12)
        assert res.omega2_hat == pytest.approx(w2_ref, abs=1e-12)
        z_ref = (
            math.sqrt(500)
            * (c_ref - w1_ref**2)
            / math.sqrt(classic_transcription(w1_ref, w2_ref, 2))
        )
        assert res.statistic == pytest.approx(z_ref, abs=1e-10)

    def test_brute_force_m3(self):
        rng = np.random.default_rng(7)
        u = rng.normal(size=160)
        ts = TimeSeries(u)
        eps = 0.75
        res = bds_statistic(ts, TestConfig(m=3, epsilon=eps))
        c_ref, w1_ref, w2_ref = naive_bds_components(u, 3, eps)
        z_ref = (
            math.sqrt(160)
            * (c_ref - w1_ref**3)
            / math.sqrt(classic_transcription(w1_ref, w2_ref, 3))
        )
        assert res.statistic == pytest.approx(z_ref, abs=1e-10)

    def test_affine_invariance_exact(self):
        rng = np.random.default_rng(11)
        u = rng.normal(size=120)
        eps = 0.6
        r1 = bds_statistic(TimeSeries(u), TestConfig(m=2, epsilon=eps))
        r2 = bds_statistic(
            TimeSeries(3.5 * u + 11.0), TestConfig(m=2, epsilon=3.5 * eps)
        )
        assert r1.statistic == r2.statistic  # bit-for-bit
        assert r1.p_value == r2.p_value

    def test_pvalue_and_reject_invariants(self):
        rng = np.random.default_rng(13)
        for seed in range(5):
            u = np.random.default_rng(seed).normal(size=150)
            res = bds_statistic(TimeSeries(u), TestConfig(m=2, epsilon=0.7, alpha=0.05))
            assert res.p_value == pytest.approx(
                normal_two_sided_p(res.statistic), abs=1e-15
            )
            assert res.p_value == pytest.approx(
                2.0 * (1.0 - normal_cdf(abs(res.statistic))), abs=1e-12
            )
            assert res.reject == (res.p_value < 0.05)
            assert res.reject == (abs(res.statistic) > critical_value(0.05))

    def test_degenerate_epsilon_raises(self):
        rng = np.random.default_rng(17)
        ts = TimeSeries(rng.normal(size=60))
        with pytest.raises(DegenerateScale):
            bds_statistic(ts, TestConfig(m=2, epsilon=1e308))
        with pytest.raises(DegenerateScale):
            bds_statistic(ts, TestConfig(m=2, epsilon=1e-12))

    def test_preconditions(self):
        ts = TimeSeries(np.arange(10.0))
        with pytest.raises(RbdsError):
            bds_statistic(ts, TestConfig(m=1, epsilon=0.5))
        with pytest.raises(SeriesTooShort):
            bds_statistic(TimeSeries(np.arange(5.0)), TestConfig(m=3, epsilon=0.5))

    def test_json_dict_shape(self):
        rng = np.random.default_rng(19)
        res = bds_statistic(
            TimeSeries(rng.normal(size=80)), TestConfig(m=2, epsilon=0.5)
        )
        d = res.to_json_dict()
        assert list(d.keys()) == [
            "method",
            "m",
            "epsilon",
            "T",
            "statistic",
            "p_value",
            "reject",
            "alpha",
            "c_full",
            "omega1_hat",
            "omega2_hat",
            "schema",
        ]
        assert d["method"] == "bds"
        assert d["schema"] == 1
        json.dumps(d)  # serializable

    def test_accepts_plain_array(self):
        rng = np.random.default_rng(23)
        res = bds_statistic(rng.normal(size=90), TestConfig(m=2, epsilon=0.5))
        assert res.T == 90


@pytest.mark.slow
class TestLargeSampleNormality:
    def test_ks_against_normal_T3000(self):
        # at T=3000 the finite-sample over-rejection is small enough that the
        # statistic's empirical distribution passes a 1% KS check
        n = 400
        zs = np.empty(n)
        for i in range(n):
            u = np.random.default_rng(1_000_000 + i).normal(size=3000)
            ts = TimeSeries(u)
            eps = 0.5 * ts.sample_sd()
            zs[i] = bds_statistic(ts, TestConfig(m=2, epsilon=eps)).statistic
        zs.sort()
        cdf = np.array([normal_cdf(z) for z in zs])
        i = np.arange(1, n + 1)
        D = max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n))
        assert D < 1.628 / math.sqrt(n)
