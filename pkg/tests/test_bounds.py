import math

import numpy as np
import pytest

from sepbound.bounds import (
    BoundResult,
    ClassConfig,
    LossModel,
    b,
    b_A,
    b_c,
    ba_sweep,
    bc_sweep,
    ccdf_sweep,
    default_kappa,
    expected_accuracy,
    h1,
    h2,
    h3,
    inter_ccdf_lower,
    intra_ccdf,
    mu_from_loss,
)
from sepbound.numerics import DEFAULT_QUAD_1D, DEFAULT_QUAD_2D, QuadratureConfig

# frozen expected values come from an independent arbitrary-precision oracle;
# where the integrals have no closed form the Monte-Carlo estimators in
# test_oracle.py / test_acceptance.py provide the second route

MODEL_04 = LossModel(loss=0.4, beta=4.0)
TEN = ClassConfig(num_classes=10, kappa=9.0)

FAST_2D = QuadratureConfig(rel_tol=1e-5, abs_tol=1e-8, max_evals=10**6)


class TestLossModel:
    def test_mu_identity(self):
        assert mu_from_loss(0.5, 1.0) == pytest.approx(0.5, rel=1e-12)

    def test_mu_unit(self):
        assert mu_from_loss(24.0, 4.0) == pytest.approx(1.0, rel=1e-12)

    def test_mu_derived_value(self):
        assert mu_from_loss(0.4516, 4.0) == pytest.approx(0.3703698902768443, rel=1e-12)

    def test_model_carries_mu(self):
        model = LossModel(loss=0.4516, beta=4.0)
        assert model.mu == pytest.approx((model.loss / 24.0) ** 0.25, rel=1e-12)

    def test_mu_strictly_increasing_in_loss(self):
        for beta in (1.4, 4.0):
            mus = [mu_from_loss(L, beta) for L in np.linspace(0.05, 2.0, 20)]
            assert all(b > a for a, b in zip(mus, mus[1:]))

    def test_domain(self):
        with pytest.raises(ValueError):
            mu_from_loss(0.0, 1.0)
        with pytest.raises(ValueError):
            LossModel(loss=1.0, beta=0.0)


class TestClassConfig:
    def test_default_kappa(self):
        assert default_kappa(10) == 9.0
        assert default_kappa(2) == 1.0
        assert default_kappa(20) == 19.0
        assert ClassConfig(num_classes=10).kappa == 9.0

    def test_invariants(self):
        with pytest.raises(ValueError):
            ClassConfig(num_classes=1)
        with pytest.raises(ValueError):
            ClassConfig(num_classes=5, kappa=0.5)
        with pytest.raises(ValueError):
            default_kappa(1)


class TestHTransforms:
    # mu = 0.5 via loss = 0.5, beta = 2 (Gamma(3) = 2)
    M = LossModel(loss=0.5, beta=2.0)

    def test_h1_zero_offset_is_identity(self):
        assert h1(2.0, 0.0, self.M) == pytest.approx(2.0, rel=1e-12)
        assert h1(2.0, 0.0, MODEL_04) == pytest.approx(2.0, rel=1e-12)

    def test_h1_at_zero(self):
        assert h1(0.0, 3.0, self.M) == 0.0
        assert h1(0.0, -3.0, self.M) == 0.0

    def test_h1_value(self):
        assert h1(1.0, 1.0, self.M) == pytest.approx(1.5128031580715089, rel=1e-9)

    def test_h1_no_overflow(self):
        assert math.isfinite(h1(1000.0, 2.0, self.M))

    def test_h1_domain(self):
        with pytest.raises(ValueError):
            h1(-0.1, 0.0, self.M)

    def test_h2_value(self):
        assert h2(1.0, 0.0, self.M, 9.0) == pytest.approx(3.8501512317218146, rel=1e-9)

    def test_h2_vanishes_at_large_w(self):
        assert h2(100.0, 0.0, self.M, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_h2_monotone_in_kappa(self):
        assert h2(1.0, 0.0, self.M, 9.0) > h2(1.0, 0.0, self.M, 1.0)

    def test_h2_singular_at_zero(self):
        with pytest.raises(ValueError):
            h2(0.0, 0.0, self.M, 9.0)

    def test_h3_symmetric_exponents(self):
        # r = 1 blends both factors with exponent 1/2
        got = h3(1.0, 1.0, 1.0, self.M, 9.0)
        assert got == pytest.approx(2.4264194961880072, rel=1e-9)

    def test_h3_zero_first_factor(self):
        assert h3(0.0, 1.0, 2.0, self.M, 9.0) == 0.0

    def test_h3_domain(self):
        with pytest.raises(ValueError):
            h3(1.0, 1.0, 0.0, self.M, 9.0)
        with pytest.raises(ValueError):
            h3(1.0, 1.0, -1.0, self.M, 9.0)
        with pytest.raises(ValueError):
            h3(1.0, 0.0, 1.0, self.M, 9.0)


class TestIntraCcdf:
    def test_at_zero_exact(self):
        assert intra_ccdf(0.0, MODEL_04) == 1.0

    def test_far_tail(self):
        assert intra_ccdf(1e6, MODEL_04) < 1e-3

    def test_frozen_value(self):
        assert intra_ccdf(1.0, MODEL_04) == pytest.approx(0.8807352797, abs=1e-8)

    def test_nonincreasing_in_nu(self):
        curve = [intra_ccdf(nu, MODEL_04) for nu in (0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0)]
        tol = 2.0 * DEFAULT_QUAD_1D.rel_tol
        assert all(b <= a + tol for a, b in zip(curve, curve[1:]))

    def test_nondecreasing_in_loss(self):
        values = [intra_ccdf(1.0, LossModel(L, 4.0)) for L in (0.1, 0.4, 0.7, 1.0)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_raw_within_clamp_band(self):
        for nu in (1e-8, 1e-4, 1.0):
            raw = intra_ccdf(nu, MODEL_04, clamp=False)
            assert -10.0 * DEFAULT_QUAD_1D.rel_tol <= raw <= 1.0 + 10.0 * DEFAULT_QUAD_1D.rel_tol

    def test_domain(self):
        with pytest.raises(ValueError):
            intra_ccdf(-1.0, MODEL_04)


class TestInterCcdfLower:
    def test_at_zero_exact(self):
        assert inter_ccdf_lower(0.0, MODEL_04, TEN) == 1.0

    def test_frozen_value(self):
        assert inter_ccdf_lower(1.0, MODEL_04, TEN) == pytest.approx(0.9947072154, abs=1e-8)

    def test_nonincreasing_in_loss(self):
        values = [
            inter_ccdf_lower(1.0, LossModel(L, 4.0), TEN) for L in (0.1, 0.4, 0.7, 1.0)
        ]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_above_intra(self):
        for L in (0.1, 0.4, 0.7, 1.0):
            model = LossModel(L, 4.0)
            for nu in (0.1, 1.0, 10.0, 50.0):
                assert inter_ccdf_lower(nu, model, TEN) >= intra_ccdf(nu, model)

    def test_nonincreasing_in_nu(self):
        curve = [inter_ccdf_lower(nu, MODEL_04, TEN) for nu in (0.1, 1.0, 5.0, 20.0, 80.0)]
        tol = 2.0 * DEFAULT_QUAD_1D.rel_tol
        assert all(b <= a + tol for a, b in zip(curve, curve[1:]))


class TestBA:
    def test_frozen_value(self):
        # cross-checked against the event-form Monte Carlo at n = 4e7
        got = b_A(4.75, LossModel(0.0298, 4.0), TEN)
        assert got == pytest.approx(0.80498026, abs=2e-6)

    def test_decreasing_in_gamma(self):
        values = [b_A(g, MODEL_04, TEN, FAST_2D) for g in (1.1, 1.5, 2.0, 3.0, 5.0)]
        assert all(later <= earlier for earlier, later in zip(values, values[1:]))

    def test_decreasing_in_loss(self):
        lo = b_A(2.0, LossModel(0.1, 4.0), TEN, FAST_2D)
        hi = b_A(2.0, LossModel(1.0, 4.0), TEN, FAST_2D)
        assert lo > hi

    def test_increasing_in_classes(self):
        small = b_A(2.0, MODEL_04, ClassConfig(10, 9.0), FAST_2D)
        large = b_A(2.0, MODEL_04, ClassConfig(40, 39.0), FAST_2D)
        assert large > small

    def test_gamma_one_guarded(self):
        got = b_A(1.0, MODEL_04, TEN, FAST_2D)
        assert 0.0 < got <= 1.0

    def test_raw_within_clamp_band(self):
        raw = b_A(1.0, MODEL_04, TEN, clamp=False)
        assert -10.0 * DEFAULT_QUAD_2D.rel_tol <= raw <= 1.0 + 10.0 * DEFAULT_QUAD_2D.rel_tol

    def test_domain(self):
        with pytest.raises(ValueError):
            b_A(0.5, MODEL_04, TEN)


class TestBoundSearch:
    def test_result_structure(self):
        res = b(1.0, MODEL_04, TEN, grid_step=0.25, cfg=FAST_2D)
        assert isinstance(res, BoundResult)
        assert 0.0 < res.eps1 < 1.0 and 0.0 < res.eps2 < 1.0
        assert res.gamma == 1.0 and res.method == "chi2_cdf"
        assert 0.0 <= res.value <= 1.0

    def test_bc_delegates_to_gamma_one(self):
        res = b_c(MODEL_04, TEN, grid_step=0.25, cfg=FAST_2D)
        assert res.gamma == 1.0

    def test_value_bounded_by_ba_at_argmax(self):
        res = b(1.0, MODEL_04, TEN, grid_step=0.25, cfg=FAST_2D)
        cap = b_A(res.gamma * (1.0 + res.eps1) / (1.0 - res.eps2), MODEL_04, TEN, FAST_2D)
        assert res.value <= cap + 1e-9

    def test_concentration_below_chi2(self):
        for model, config in (
            (MODEL_04, TEN),
            (LossModel(0.5632, 2.0), ClassConfig(20, 3.8)),
        ):
            conc = b(1.0, model, config, grid_step=0.25, method="concentration", cfg=FAST_2D)
            chi2 = b(1.0, model, config, grid_step=0.25, method="chi2_cdf", cfg=FAST_2D)
            assert conc.value <= chi2.value + 1e-12

    def test_refine_does_not_regress(self):
        coarse = b(1.0, MODEL_04, TEN, grid_step=0.25, cfg=FAST_2D)
        fine = b(1.0, MODEL_04, TEN, grid_step=0.25, cfg=FAST_2D, refine=True)
        assert fine.value >= coarse.value - 1e-12

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            b(1.0, MODEL_04, TEN, grid_step=0.5, cfg=FAST_2D)
        with pytest.raises(ValueError):
            b(0.9, MODEL_04, TEN, cfg=FAST_2D)
        with pytest.raises(ValueError):
            b(1.0, MODEL_04, TEN, method="bogus", cfg=FAST_2D)


class TestExpectedAccuracy:
    def test_closed_form_collapse(self):
        assert expected_accuracy(math.log(2.0), 1.0, 1.0) == pytest.approx(
            1.0 - math.exp(-1.0), rel=1e-12
        )

    def test_vanishing_loss(self):
        assert expected_accuracy(1e-6, 4.0, 9.0) > 0.999

    def test_frozen_value(self):
        assert expected_accuracy(0.4516, 4.0, 9.0) == pytest.approx(
            0.9640623361198568, rel=1e-12
        )

    def test_strictly_monotone(self):
        losses = np.linspace(0.05, 2.0, 10)
        kappas = np.linspace(1.0, 40.0, 10)
        for k in kappas:
            vals = [expected_accuracy(L, 4.0, k) for L in losses]
            assert all(later < earlier for earlier, later in zip(vals, vals[1:]))
        for L in losses:
            vals = [expected_accuracy(L, 4.0, k) for k in kappas]
            assert all(later > earlier for earlier, later in zip(vals, vals[1:]))

    def test_domain(self):
        with pytest.raises(ValueError):
            expected_accuracy(-0.1, 4.0, 9.0)
        with pytest.raises(ValueError):
            expected_accuracy(0.4, 4.0, 0.5)


class TestSweeps:
    def test_single_point_equals_scalar(self):
        curve = ccdf_sweep("intra", [1.0], MODEL_04)
        assert curve.probabilities[0] == intra_ccdf(1.0, MODEL_04)
        rows = ba_sweep([2.0], MODEL_04, TEN, FAST_2D)
        assert rows == [(2.0, b_A(2.0, MODEL_04, TEN, FAST_2D))]

    def test_ccdf_sweep_kinds(self):
        grid = [0.1, 1.0, 5.0, 20.0]
        intra = ccdf_sweep("intra", grid, MODEL_04)
        inter = ccdf_sweep("inter_lower", grid, MODEL_04, TEN)
        assert intra.kind == "intra" and inter.kind == "inter_lower"
        tol = 2.0 * DEFAULT_QUAD_1D.rel_tol
        for curve in (intra, inter):
            probs = curve.probabilities
            assert all(0.0 <= p <= 1.0 for p in probs)
            assert all(later <= earlier + tol for earlier, later in zip(probs, probs[1:]))
        assert all(i >= j for i, j in zip(inter.probabilities, intra.probabilities))

    def test_ccdf_sweep_validation(self):
        with pytest.raises(ValueError):
            ccdf_sweep("intra", [], MODEL_04)
        with pytest.raises(ValueError):
            ccdf_sweep("inter_lower", [1.0], MODEL_04)  # missing config
        with pytest.raises(ValueError):
            ccdf_sweep("sideways", [1.0], MODEL_04)

    def test_threads_match_sequential(self):
        grid = [0.5, 1.0, 2.0, 4.0]
        seq = ccdf_sweep("intra", grid, MODEL_04, threads=1)
        par = ccdf_sweep("intra", grid, MODEL_04, threads=3)
        assert seq.probabilities == par.probabilities

    def test_bc_sweep_rows(self):
        rows = bc_sweep([0.2, 0.8], 4.0, [10], grid_step=0.25, cfg=FAST_2D)
        assert [(r[0], r[1]) for r in rows] == [(0.2, 10), (0.8, 10)]
        assert rows[0][2] >= rows[1][2]  # b_c falls as loss grows

    def test_bc_sweep_validation(self):
        with pytest.raises(ValueError):
            bc_sweep([], 4.0, [10], cfg=FAST_2D)
