"""Approximating functions, radius functions, and the critical series."""

import math

import numpy as np
import pytest

from dirichlet_lab import (
    Constants,
    COverT,
    LogFamily,
    LogLogFamily,
    PsiFromR,
    RFunction,
    SeriesReport,
    TablePsi,
    constant_r,
    critical_terms,
    equivalent_series_terms,
    parse_psi,
    psi_to_r,
    r_to_psi,
    series_diagnostics,
    table_r,
)
from dirichlet_lab.dani import (
    VERDICT_FULL,
    VERDICT_NO_INFO,
    VERDICT_TREND,
    VERDICT_ZERO,
)
from dirichlet_lab.errors import PsiInvalid, RInvalid


class TestConstants:
    def test_exponents(self):
        assert Constants(2).kappa == 1.0 and Constants(2).lam == 1
        assert Constants(3).kappa == 4.0 and Constants(3).lam == 3
        assert Constants(4).kappa == 8.0 and Constants(4).lam == 6


class TestFamilies:
    def test_c_over_t(self):
        psi = COverT(0.5)
        assert psi(2.0) == 0.25
        assert psi.inverse(0.25) == pytest.approx(2.0)
        assert psi.inverse(0.0) == math.inf
        assert psi.inverse(10.0) == psi.t0  # clamped at the left endpoint

    def test_c_over_t_rejects_bad_c(self):
        for c in (0.0, 1.0, 1.2, -0.3):
            with pytest.raises(PsiInvalid):
                COverT(c)

    def test_log_family(self):
        psi = LogFamily(1.0, 2.0)
        t = 20.0
        assert psi(t) == pytest.approx((1.0 - math.log(t) ** -2.0) / t)
        with pytest.raises(PsiInvalid):
            LogFamily(5.0, 1.0, t0=8.0)  # positive part fails at t0
        with pytest.raises(PsiInvalid):
            LogFamily(1.0, -2.0)

    def test_loglog_family(self):
        psi = LogLogFamily(1.0, 1.5)
        t = 200.0
        assert psi(t) == pytest.approx(
            (1.0 - math.log(math.log(t)) ** -1.5) / t
        )
        with pytest.raises(PsiInvalid):
            LogLogFamily(1.0, 1.0, t0=2.0)  # needs t0 > e

    def test_table_psi(self):
        psi = TablePsi([1.0, 10.0, 100.0], [0.5, 0.09, 0.009])
        assert psi(10.0) == pytest.approx(0.09)
        assert psi(100.0) == pytest.approx(0.009)
        # beyond the last knot the final slope (-1) extends: t*psi frozen
        assert 1000.0 * psi(1000.0) == pytest.approx(100.0 * 0.009)

    def test_table_psi_validation(self):
        with pytest.raises(PsiInvalid):
            TablePsi([1.0, 10.0], [0.5, 0.6])  # increasing psi
        with pytest.raises(PsiInvalid):
            TablePsi([1.0, 10.0], [0.5, 0.01])  # slope below -1
        with pytest.raises(PsiInvalid):
            TablePsi([10.0, 1.0], [0.1, 0.5])  # abscissae not increasing
        with pytest.raises(PsiInvalid):
            TablePsi([1.0], [0.5])

    def test_generic_bisection_inverse(self):
        # LogFamily has no closed-form inverse; check psi(inverse(v)) = v
        psi = LogFamily(1.0, 2.0)
        for v in (1e-3, 1e-5, 1e-8):
            t = psi.inverse(v)
            assert psi(t) == pytest.approx(v, rel=1e-9)

    def test_parse_psi(self):
        psi = parse_psi("c_over_t:c=0.5")
        assert isinstance(psi, COverT) and psi.c == 0.5
        assert isinstance(parse_psi("linear:c=0.3"), COverT)
        log_psi = parse_psi("log:c=1,tau=2")
        assert isinstance(log_psi, LogFamily) and log_psi.tau == 2.0
        ll = parse_psi("loglog:c=1,tau=1.5,t0=200")
        assert isinstance(ll, LogLogFamily) and ll.t0 == 200.0
        for bad in ("powers:a=1", "log:c", "log:q=1", "c_over_t:c=2"):
            with pytest.raises(PsiInvalid):
                parse_psi(bad)


class TestCorrespondence:
    def test_c_over_t_gives_constant_radius(self):
        # t*psi(t) = c identically, so r(s) = -log(c)/d for all s
        psi = COverT(0.5)
        r = psi_to_r(psi, 1, 1)
        expected = -math.log(0.5) / 2.0
        assert r.s0 == pytest.approx(expected)  # s0 = -(n/d) log psi(t0)
        for s in (r.s0, r.s0 + 1.0, r.s0 + 5.0):
            assert r(s) == pytest.approx(expected, rel=1e-9)

    def test_constant_r_gives_scaled_c_over_t(self):
        # constant rho corresponds to psi(t) = e^(-d rho)/t
        rho = 0.3
        r = constant_r(rho, 1, 1)
        psi = r_to_psi(r)
        assert psi.t0 == pytest.approx(math.exp(-rho))
        for t in (psi.t0 * 1.5, psi.t0 * 40.0, psi.t0 * 1e4):
            assert t * psi(t) == pytest.approx(math.exp(-2.0 * rho), rel=1e-9)

    @pytest.mark.parametrize("m,n", [(1, 1), (2, 1), (1, 2)])
    def test_roundtrip_log_family(self, m, n):
        psi = LogFamily(1.0, 2.0)
        back = r_to_psi(psi_to_r(psi, m, n))
        ts = np.geomspace(psi.t0 * 1.0001, psi.t0 * 1e3, 60)
        rel = np.abs(back.value(ts) / psi.value(ts) - 1.0)
        assert float(rel.max()) < 1e-8

    def test_radius_function_domain_and_cache(self):
        calls = []

        def evaluator(s):
            s = np.atleast_1d(np.asarray(s, dtype=float))
            calls.append(len(s))
            return np.full_like(s, 0.25)

        r = RFunction(s0=1.0, m=1, n=1, evaluator=evaluator)
        with pytest.raises(RInvalid):
            r(0.5)
        assert r(2.0) == 0.25
        assert r(2.0) == 0.25  # served from cache
        assert sum(calls) == 1

    def test_table_r(self):
        r = table_r([0.0, 10.0], [0.5, 0.2], 1, 1)
        assert r(5.0) == pytest.approx(0.35)
        with pytest.raises(RInvalid):
            table_r([0.0, 10.0], [0.2, 0.5], 1, 1)  # increasing radius
        with pytest.raises(RInvalid):
            table_r([0.0, 10.0], [0.5, -0.1], 1, 1)
        with pytest.raises(RInvalid):
            table_r([0.0, 1.0], [2.0, 0.5], 1, 1)  # slope below -1/m

    def test_weight_validation(self):
        with pytest.raises(PsiInvalid):
            psi_to_r(COverT(0.5), 0, 2)
        r = constant_r(0.3, 2, 1)
        with pytest.raises(RInvalid):
            r_to_psi(r, m=1, n=2)
        with pytest.raises(RInvalid):
            constant_r(-0.1, 1, 1)
        with pytest.raises(RInvalid):
            PsiFromR(RFunction(s0=0.0, m=1, n=1, evaluator=lambda s: 0.0 * np.atleast_1d(s)))


class TestSeries:
    def test_critical_terms_closed_form(self):
        # c/t keeps F = 1 - c constant: terms are (1-c)^kappa log^lam(1/(1-c)) / k
        psi = COverT(0.5)
        ks = np.array([1.0, 10.0, 250.0])
        expected = 0.5 * math.log(2.0) / ks  # d=2: kappa=1, lam=1
        assert np.allclose(critical_terms(psi, 2, ks), expected, rtol=1e-12)

    def test_partial_sums_harmonic(self):
        rep = series_diagnostics(COverT(0.5), 2, t1_max=1e4)
        assert sorted(rep.partial_sums) == [100, 1000, 10000]
        h100 = float(np.sum(1.0 / np.arange(1, 101)))
        assert rep.partial_sums[100] == pytest.approx(
            0.5 * math.log(2.0) * h100, rel=1e-12
        )

    def test_quotient_harmonic(self):
        # Q = [f log^2(1/f) H] / [f log(1/f) H]^2 = 2/H at f = 1/2
        rep = series_diagnostics(COverT(0.5), 2, t1_max=1e4)
        h = float(np.sum(1.0 / np.arange(1, 10_001)))
        assert rep.quotient == pytest.approx(2.0 / h, rel=1e-9)

    def test_verdicts(self):
        assert series_diagnostics(COverT(0.5), 2).verdict == VERDICT_ZERO
        assert series_diagnostics(LogFamily(1.0, 2.0), 2).verdict == VERDICT_FULL
        assert series_diagnostics(LogFamily(1.0, 0.8), 2).verdict == VERDICT_ZERO
        assert series_diagnostics(LogLogFamily(1.0, 3.0), 2).verdict == VERDICT_FULL
        assert series_diagnostics(LogLogFamily(1.0, 0.5), 2).verdict == VERDICT_ZERO
        assert (
            series_diagnostics(LogLogFamily(1.0, 1.5), 2).verdict == VERDICT_NO_INFO
        )
        table = TablePsi([1.0, 10.0, 100.0], [0.5, 0.09, 0.009])
        assert series_diagnostics(table, 2).verdict == VERDICT_TREND

    def test_log_family_threshold_scales_with_dimension(self):
        # tau threshold is 1/kappa: 1 at d=2 but 1/4 at d=3
        rep = series_diagnostics(LogFamily(1.0, 0.5), 3)
        assert rep.thresholds["tau_full_above"] == pytest.approx(0.25)
        assert rep.verdict == VERDICT_FULL

    def test_boundary_loglog_flags_not_full(self):
        # tau exactly at lam/kappa: no zero-one information, but the
        # complement is known to carry positive measure
        rep = series_diagnostics(LogLogFamily(1.0, 1.0), 2)
        assert rep.verdict == VERDICT_NO_INFO
        assert rep.not_full_flag
        assert not series_diagnostics(LogLogFamily(1.0, 1.5), 2).not_full_flag

    def test_divergent_trend_label(self):
        rep = series_diagnostics(COverT(0.5), 2)
        assert "diverging" in rep.trend

    def test_equivalent_series_terms(self):
        r = constant_r(0.3, 1, 1)
        terms = equivalent_series_terms(r, np.array([1.0, 7.0]))
        expected = 0.3 * math.log(1.0 + 1.0 / 0.3)
        assert np.allclose(terms, expected, rtol=1e-12)

    def test_report_json_dict(self):
        rep = series_diagnostics(COverT(0.5), 2, t1_max=1e4)
        out = rep.to_json_dict()
        assert out["verdict"] == VERDICT_ZERO
        assert set(out) == {
            "d", "family", "S", "Q", "trend", "verdict", "thresholds", "not_full_flag",
        }
        assert out["S"]["10000"] == rep.partial_sums[10000]
