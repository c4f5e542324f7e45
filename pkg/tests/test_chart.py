"""Chart sampling and measure estimation around the identity coset."""

import math

import numpy as np
import pytest

from dirichlet_lab import (
    ChartBox,
    LatticeBasis,
    MeasureEstimate,
    WeightPair,
    derived_corner_range,
    estimate_K_measure,
    estimate_sublevel_measure,
    estimate_thickened_measure,
    injectivity_audit,
    in_thickened,
    sample_chart,
    shortest_sup_vector,
    sweep_sublevel_measures,
    zeta_product_inverse,
)
from dirichlet_lab.chart import _sample_batch
from dirichlet_lab.errors import ROutOfRange
from dirichlet_lab.lattice import Verdict
from dirichlet_lab.rng import worker_rng

# Independent semi-analytic oracle for the d=2 chart sublevel integral at
# (c, r) = (0.3, 0.1): only four candidate vectors can bind at this box
# size, so the g11 axis integrates in closed form (antiderivative of 1/x)
# and the two remaining axes use a 1600^2 midpoint rule; the 800 and 1600
# grids agree to 4e-10, and the interval logic behind the closed form was
# cross-checked against direct enumeration on 2e5 random points.
QUADRATURE_SUBLEVEL_C03_R01 = 3.4751750593e-02

# Product over k = 2..d of 1/zeta(k), computed independently via
# scipy.special.zeta; the d=2 value is 6/pi^2.
ZETA_PRODUCT_INVERSE = {
    2: 0.6079271018540267,
    3: 0.5057390380239875,
    4: 0.46727171908698434,
}


class TestChartBox:
    def test_default_boxes_valid(self):
        for d in (2, 3, 4, 5):
            box = ChartBox.default(d)
            assert box.corner_floor > (d - 1) * box.c

    def test_rejects_oversized_halfwidth(self):
        with pytest.raises(ValueError):
            ChartBox(3, 0.4)
        with pytest.raises(ValueError):
            ChartBox(2, 0.6)

    def test_volume(self):
        assert ChartBox(2, 0.25).volume == pytest.approx(0.5**3)

    def test_corner_range_encloses_samples(self):
        box = ChartBox.default(3)
        lo, hi = derived_corner_range(3, box.c)
        g, _ = _sample_batch(box, worker_rng(5, 0), 2000)
        corners = g[:, -1, -1]
        assert lo - 1e-12 <= corners.min() and corners.max() <= hi + 1e-12

    def test_candidate_bound_two_cases(self):
        # generic-row case: (M+1)(1 - dc) >= target
        # corner-row case: (M+1)(floor - (d-1)c) + (d-1)c >= target
        for d, c, target in [(2, 0.3, 1.0), (3, 0.2, 1.0), (3, 0.2, 2.0), (4, 0.1, 1.0)]:
            box = ChartBox(d, c)
            m_generic = math.ceil(target / (1.0 - d * c)) - 1
            gap = box.corner_floor - (d - 1) * c
            m_corner = math.ceil((target - (d - 1) * c) / gap) - 1
            assert box.candidate_bound_for(target) == max(m_generic, m_corner, 0)

    def test_candidate_bound_is_sound(self):
        # no box matrix may have a vector shorter than 1 whose coefficients
        # exceed the bound: check the contrapositive on random samples
        box = ChartBox.default(3)
        bound = box.candidate_bound
        g, _ = _sample_batch(box, worker_rng(6, 0), 200)
        for mat in g[:40]:
            vec, length = shortest_sup_vector(LatticeBasis(mat))
            coeffs = np.round(np.linalg.solve(mat, vec)).astype(int)
            assert np.max(np.abs(coeffs)) <= bound

    def test_injectivity_certified_defaults(self):
        assert ChartBox.default(2).injectivity_certified
        assert ChartBox.default(3).injectivity_certified


class TestSampling:
    def test_sample_batch_det_one(self):
        box = ChartBox.default(3)
        g, block_det = _sample_batch(box, worker_rng(1, 0), 500)
        dets = np.linalg.det(g)
        assert np.max(np.abs(dets - 1.0)) < 1e-10
        assert np.max(np.abs(block_det - np.linalg.det(g[:, :-1, :-1]))) < 1e-12

    def test_sample_chart_single(self):
        pt = sample_chart(ChartBox.default(2), 42)
        assert abs(np.linalg.det(pt.matrix) - 1.0) < 1e-12
        assert pt.density == pytest.approx(
            zeta_product_inverse(2) / np.linalg.det(pt.matrix[:-1, :-1])
        )

    def test_zeta_product_inverse_literals(self):
        for d, expected in ZETA_PRODUCT_INVERSE.items():
            assert zeta_product_inverse(d) == pytest.approx(expected, rel=1e-12)


class TestMeasures:
    def test_sublevel_matches_independent_quadrature(self):
        est = estimate_sublevel_measure(ChartBox(2, 0.3), 0.1, 200_000, 2026)
        # 4 sigma around a deterministic frozen-seed estimate
        assert abs(est.value - QUADRATURE_SUBLEVEL_C03_R01) <= 4.0 * est.std_error

    def test_sweep_monotone_in_r(self):
        box = ChartBox.default(2)
        rs = [0.05, 0.1, 0.2, 0.4]
        ests = sweep_sublevel_measures(box, rs, 50_000, 7)
        values = [e.value for e in ests]
        # shared samples make monotonicity exact, not just statistical
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_K_measure_equals_sublevel_at_matching_radius(self):
        # K_r = {length >= 1 - r} and sublevel(rho) = {length >= e^-rho}
        # coincide when e^-rho = 1 - r; with common seeds the Monte Carlo
        # values must agree exactly
        box = ChartBox.default(2)
        r = 0.2
        rho = -math.log(1.0 - r)
        a = estimate_K_measure(box, r, 50_000, 11)
        b = estimate_sublevel_measure(box, rho, 50_000, 11)
        assert a.value == b.value

    def test_rejects_bad_radius(self):
        box = ChartBox.default(2)
        with pytest.raises(ROutOfRange):
            estimate_sublevel_measure(box, 0.0, 10_000, 0)
        with pytest.raises(ROutOfRange):
            estimate_K_measure(box, 1.5, 10_000, 0)

    def test_estimate_json_roundtrip(self):
        est = estimate_sublevel_measure(ChartBox.default(2), 0.3, 10_000, 3)
        back = MeasureEstimate.from_json(est.to_json())
        assert back == est

    def test_determinism(self):
        box = ChartBox.default(3)
        a = estimate_sublevel_measure(box, 0.2, 20_000, 123)
        b = estimate_sublevel_measure(box, 0.2, 20_000, 123)
        assert a.value == b.value and a.std_error == b.std_error


class TestThickened:
    def test_thickened_contains_sublevel(self):
        # {Delta <= r} sits inside the s-union, so with common seeds the
        # thickened lower bracket must beat the plain sublevel estimate
        # minus undecided slack
        box = ChartBox.default(2)
        w = WeightPair.equal(1, 1)
        r = 0.3
        sub = estimate_sublevel_measure(box, r, 30_000, 5)
        thick = estimate_thickened_measure(box, w, r, 30_000, 5)
        assert thick.bracket is not None
        lo, hi = thick.bracket
        assert lo <= thick.value <= hi
        assert hi >= sub.value - 3.0 * (sub.std_error + thick.std_error)

    def test_membership_agrees_with_certificates(self):
        # spot-check the sampler's three-way decision against in_thickened
        box = ChartBox.default(2)
        w = WeightPair.equal(1, 1)
        r = 0.25
        g, _ = _sample_batch(box, worker_rng(8, 0), 40)
        for mat in g:
            cert = in_thickened(LatticeBasis(mat), w, r, h=r / 10.0)
            if cert.verdict is Verdict.YES:
                assert cert.witness_s is not None

    def test_bracket_narrows_with_step(self):
        box = ChartBox.default(2)
        w = WeightPair.equal(1, 1)
        coarse = estimate_thickened_measure(box, w, 0.3, 20_000, 9, h=0.06)
        fine = estimate_thickened_measure(box, w, 0.3, 20_000, 9, h=0.015)
        wc = coarse.bracket[1] - coarse.bracket[0]
        wf = fine.bracket[1] - fine.bracket[0]
        assert wf <= wc + 1e-12


class TestInjectivity:
    @pytest.mark.parametrize("d", [2, 3])
    def test_audit_finds_no_collisions(self, d):
        audit = injectivity_audit(ChartBox.default(d), 5_000, 17)
        assert audit.certified
        assert audit.collisions == 0
