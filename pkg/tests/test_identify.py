import math

import numpy as np
import pytest

from exposure_lens import (
    bounds,
    monotonicity_report,
    plim,
    plim_from_values,
    projection_stats,
    span_decomposition,
)
from exposure_lens.errors import ValidationError
from exposure_lens.identify import ProjectionStats, demeaned_ols_slope, plim_with_adoption
from exposure_lens.simulate import DGPConfig, LognormalPsi, gen_occ_cross_section


class TestPlim:
    def test_classical_attenuation(self):
        stats = ProjectionStats(lambda_=1.0, var_e=3.0, sigma2_v=1.0, kappa=3.0)
        assert plim(1.0, stats) == pytest.approx(0.75)

    def test_no_noise_limit(self):
        assert plim_from_values(1.0, 2.0, math.inf) == pytest.approx(0.5)

    def test_pure_noise(self):
        assert plim_from_values(1.0, 1.0, 0.0) == 0.0

    def test_reduces_to_attenuation_as_lambda_to_one(self):
        kappa = 5.0
        for lam in (1.0, 1.0001, 0.9999):
            value = plim_from_values(2.0, lam, kappa)
            assert value == pytest.approx(2.0 * kappa / (kappa + 1.0), rel=1e-3)

    def test_amplification_with_small_lambda_large_kappa(self):
        beta = 1.0
        value = plim_from_values(beta, 0.5, 100.0)
        assert abs(value) > abs(beta)

    def test_continuity_in_kappa(self):
        v1 = plim_from_values(1.0, 2.0, 1e9)
        v2 = plim_from_values(1.0, 2.0, math.inf)
        assert v1 == pytest.approx(v2, abs=1e-8)


class TestProjectionStats:
    def test_identity_proxy(self, rng):
        e = rng.normal(size=500)
        s = projection_stats(e, e)
        assert s.lambda_ == pytest.approx(1.0, abs=1e-12)
        assert s.sigma2_v == pytest.approx(0.0, abs=1e-12)
        assert math.isinf(s.kappa)

    def test_scaled_proxy(self, rng):
        e = rng.normal(size=500)
        s = projection_stats(e, 2.0 * e)
        assert s.lambda_ == pytest.approx(2.0, abs=1e-12)
        assert s.sigma2_v == pytest.approx(0.0, abs=1e-10)

    def test_variance_identity(self, rng):
        e = rng.normal(size=2000)
        p = 1.3 * e + rng.normal(0, 0.7, 2000)
        s = projection_stats(e, p)
        lhs = float(np.var(p))
        rhs = s.lambda_**2 * s.var_e + s.sigma2_v
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_plim_matches_simulated_ols(self):
        cfg = DGPConfig(n_occ=100_000, beta=1.0, psi_dist=LognormalPsi(0.0, 0.5),
                        noise_sd_u=0.05, noise_sd_eps=0.0, seed=123)
        d = gen_occ_cross_section(cfg)
        s = projection_stats(d.e, d.proxy)
        simulated = demeaned_ols_slope(d.proxy, d.y)
        assert plim(1.0, s) == pytest.approx(simulated, abs=0.01)

    def test_constant_exposure_rejected(self):
        with pytest.raises(ValidationError):
            projection_stats(np.ones(10), np.arange(10.0))


class TestAdoptionChannel:
    def test_formula_matches_simulated_ols(self):
        cfg = DGPConfig(n_occ=200_000, beta=0.5, rho_adoption=0.3,
                        psi_dist=LognormalPsi(0.0, 0.6), noise_sd_u=0.02, seed=9)
        d = gen_occ_cross_section(cfg)
        simulated = demeaned_ols_slope(d.proxy, d.y)
        cov_e = float(np.mean(d.e * d.proxy))
        cov_a = float(np.mean((d.adoption - d.adoption.mean()) * d.proxy))
        var_p = float(np.mean(d.proxy**2))
        formula = plim_with_adoption(0.5, 0.3, cov_e, cov_a, var_p)
        assert simulated == pytest.approx(formula, abs=1e-10)

    def test_adoption_shifts_coefficient(self):
        base = DGPConfig(n_occ=50_000, beta=0.5, rho_adoption=0.0,
                         psi_dist=LognormalPsi(0.0, 0.6), seed=5)
        confounded = DGPConfig(n_occ=50_000, beta=0.5, rho_adoption=0.3,
                               psi_dist=LognormalPsi(0.0, 0.6), seed=5)
        b0 = demeaned_ols_slope(gen_occ_cross_section(base).proxy, gen_occ_cross_section(base).y)
        b1 = demeaned_ols_slope(gen_occ_cross_section(confounded).proxy, gen_occ_cross_section(confounded).y)
        assert abs(b1 - b0) > 0.01


class TestBounds:
    def test_interval_over_magnitudes(self):
        s = bounds(-0.70, -0.38)
        assert s.low == pytest.approx(0.38)
        assert s.high == pytest.approx(0.70)
        assert s.width == pytest.approx(0.32)
        assert s.signed_low == pytest.approx(-0.70)
        assert s.signed_high == pytest.approx(-0.38)

    def test_attenuation_share(self):
        s = bounds(-0.70, -0.38)
        assert s.attenuation_share == pytest.approx((0.70 - 0.38) / 0.70)

    def test_equal_endpoints(self):
        s = bounds(-0.5, -0.5)
        assert s.width == 0.0
        assert s.attenuation_share == 0.0

    def test_contains(self):
        s = bounds(-0.70, -0.38)
        assert s.contains(-0.5)
        assert not s.contains(-0.9)
        assert s.contains(0.5, signed=False)


class TestSpanDecomposition:
    def test_degenerate_zero_span(self):
        d = span_decomposition([1.0, 1.0], [1.0, 1.0])
        assert d.degenerate
        assert d.span_ratio == 1.0

    def test_identical_lists_ratio_one(self):
        base = [-0.11, -0.08, -0.12]
        d = span_decomposition(base, list(base))
        assert d.span_ratio == pytest.approx(1.0)
        assert d.closure == pytest.approx(0.0)

    def test_halved_span(self):
        d = span_decomposition([0.0, 0.10], [0.02, 0.07])
        assert d.span_base == pytest.approx(0.10)
        assert d.span_rw == pytest.approx(0.05)
        assert d.closure == pytest.approx(0.5)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            span_decomposition([1.0, 2.0], [1.0])


class TestMonotonicityReport:
    def test_perfect_monotone_sweep(self):
        runs = [(0.1, 0.05), (0.5, 0.20), (1.0, 0.45), (1.5, 0.70)]
        r = monotonicity_report(runs)
        assert r.spearman_rho == pytest.approx(1.0)
        assert r.passed

    def test_constant_skew_flagged(self):
        r = monotonicity_report([(0.5, 0.1), (0.5, 0.2), (0.5, 0.3)])
        assert r.degenerate
        assert not r.passed

    def test_reversed_not_passed(self):
        r = monotonicity_report([(0.1, 0.7), (0.5, 0.4), (1.0, 0.2), (1.5, 0.1)])
        assert r.spearman_rho == pytest.approx(-1.0)
        assert not r.passed

    def test_needs_three(self):
        with pytest.raises(ValidationError):
            monotonicity_report([(0.1, 0.1), (0.2, 0.2)])
