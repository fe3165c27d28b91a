"""Tests for Wald-type prediction intervals and bootstrap calibration."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import norm

from hclimits import (
    BootstrapDegenerate,
    CalibrationNotConverged,
    FutureDesign,
    HistoricalData,
    InvalidParameter,
    Method,
    RngStream,
    bb_pi_calibrated,
    bb_pi_uncalibrated,
    bootstrap_future,
    bootstrap_hcd,
    calibrate_tails,
    estimate_betabinomial,
    estimate_quasibinomial,
    qb_pi_calibrated,
    qb_pi_uncalibrated,
)
from hclimits.prediction import _solve_min_q

Z975 = float(norm.ppf(0.975))


class TestUncalibrated:
    def test_quasibinomial_mortality(self, mortality, design):
        est = estimate_quasibinomial(mortality)
        result = qb_pi_uncalibrated(est, design, mortality.sum_n)
        assert result.lower == pytest.approx(6.369, abs=1e-3)
        assert result.upper == pytest.approx(21.231, abs=1e-3)
        assert result.method is Method.QB

    def test_betabinomial_mortality(self, mortality, design):
        est = estimate_betabinomial(mortality)
        result = bb_pi_uncalibrated(est, design, mortality.sum_n)
        assert result.lower == pytest.approx(5.688, abs=1e-3)
        assert result.upper == pytest.approx(21.912, abs=1e-3)
        assert result.method is Method.BB

    def test_quasibinomial_wald_structure(self, mortality, design):
        est = estimate_quasibinomial(mortality)
        result = qb_pi_uncalibrated(est, design, mortality.sum_n)
        g = est.pi_hat * (1.0 - est.pi_hat)
        var = est.phi_hat * (50.0**2 * g / 500.0 + 50.0 * g)
        center = 50.0 * est.pi_hat
        assert result.lower == pytest.approx(center - Z975 * np.sqrt(var))
        assert result.upper == pytest.approx(center + Z975 * np.sqrt(var))

    def test_betabinomial_wald_structure(self, mortality, design):
        est = estimate_betabinomial(mortality)
        result = bb_pi_uncalibrated(est, design, mortality.sum_n)
        g = est.pi_hat * (1.0 - est.pi_hat)
        rho = est.rho_hat
        var = (
            50.0**2 * g / 500.0
            + (499.0 / 500.0) * 50.0**2 * g * rho
            + 50.0 * g * (1.0 + 49.0 * rho)
        )
        center = 50.0 * est.pi_hat
        assert result.lower == pytest.approx(center - Z975 * np.sqrt(var))
        assert result.upper == pytest.approx(center + Z975 * np.sqrt(var))

    def test_wrong_family_rejected(self, mortality, design):
        with pytest.raises(InvalidParameter):
            qb_pi_uncalibrated(estimate_betabinomial(mortality), design, 500.0)
        with pytest.raises(InvalidParameter):
            bb_pi_uncalibrated(estimate_quasibinomial(mortality), design, 500.0)

    def test_alpha_controls_width(self, mortality):
        est = estimate_quasibinomial(mortality)
        wide = qb_pi_uncalibrated(est, FutureDesign(50, alpha=0.01), 500.0)
        narrow = qb_pi_uncalibrated(est, FutureDesign(50, alpha=0.20), 500.0)
        assert wide.upper - wide.lower > narrow.upper - narrow.lower


class TestSolveMinQ:
    def test_recovers_normal_quantile(self):
        crossings = RngStream(3).generator().standard_normal(200_000)
        q, achieved, _ = _solve_min_q(crossings, 0.975, 0.001)
        assert q == pytest.approx(Z975, abs=0.02)
        assert abs(achieved - 0.975) <= 0.001 + 1e-12

    def test_larger_target_needs_larger_factor(self):
        crossings = RngStream(4).generator().standard_normal(100_000)
        q_low, _, _ = _solve_min_q(crossings, 0.95, 0.001)
        q_high, _, _ = _solve_min_q(crossings, 0.99, 0.001)
        assert q_high > q_low

    def test_zero_when_target_already_met(self):
        crossings = np.concatenate([-np.ones(9750), np.full(250, 5.0)])
        q, achieved, iterations = _solve_min_q(crossings, 0.975, 0.001)
        assert q == 0.0
        assert achieved == pytest.approx(0.975)
        assert iterations == 0

    def test_tie_mass_wider_than_band_rejected(self):
        crossings = np.full(1000, 5.0)
        with pytest.raises(CalibrationNotConverged):
            _solve_min_q(crossings, 0.975, 0.001)

    def test_overshoot_at_zero_rejected(self):
        crossings = -np.ones(1000)
        with pytest.raises(CalibrationNotConverged):
            _solve_min_q(crossings, 0.975, 0.001)

    def test_unreachable_target_rejected(self):
        crossings = np.concatenate([np.zeros(900), np.full(100, np.inf)])
        with pytest.raises(CalibrationNotConverged):
            _solve_min_q(crossings, 0.975, 0.001)


class TestCalibrateTails:
    def test_report_hits_tolerance_band(self, mortality, design):
        est = estimate_quasibinomial(mortality)
        report = calibrate_tails(est, design, mortality.ns, B=2000, rng=RngStream(1))
        assert abs(report.achieved_psi_lower - 0.975) <= report.tolerance + 1e-12
        assert abs(report.achieved_psi_upper - 0.975) <= report.tolerance + 1e-12
        assert report.q_lower > 0 and report.q_upper > 0
        assert report.bootstrap_B == 2000

    def test_deterministic_given_stream(self, mortality, design):
        est = estimate_betabinomial(mortality)
        a = calibrate_tails(est, design, mortality.ns, B=2000, rng=RngStream(9))
        b = calibrate_tails(est, design, mortality.ns, B=2000, rng=RngStream(9))
        assert a == b

    def test_small_bootstrap_rejected(self, mortality, design):
        est = estimate_quasibinomial(mortality)
        with pytest.raises(InvalidParameter):
            calibrate_tails(est, design, mortality.ns, B=500)

    @pytest.mark.parametrize("t", [0.0, 0.025, 0.5])
    def test_bad_tolerance_rejected(self, mortality, design, t):
        est = estimate_quasibinomial(mortality)
        with pytest.raises(InvalidParameter):
            calibrate_tails(est, design, mortality.ns, B=2000, t=t)

    def test_degenerate_bootstrap_detected(self):
        hcd = HistoricalData(studies=((1.0, 2.0), (1.0, 2.0)))
        est = estimate_quasibinomial(hcd)
        with pytest.raises(BootstrapDegenerate):
            calibrate_tails(est, FutureDesign(2), hcd.ns, B=1000, rng=RngStream(0))


class TestCalibratedIntervals:
    def test_quasibinomial_mortality_range(self, mortality, design):
        result = qb_pi_calibrated(mortality, design, B=10000, rng=RngStream(0))
        assert result.covered_range == (6, 22)
        assert result.calibration is not None

    def test_betabinomial_mortality_range(self, mortality, design):
        result = bb_pi_calibrated(mortality, design, B=10000, rng=RngStream(0))
        assert result.covered_range == (7, 22)

    def test_limits_use_original_estimates(self, mortality, design):
        result = qb_pi_calibrated(mortality, design, B=2000, rng=RngStream(2))
        est = estimate_quasibinomial(mortality)
        g = est.pi_hat * (1.0 - est.pi_hat)
        se = np.sqrt(est.phi_hat * (50.0**2 * g / 500.0 + 50.0 * g))
        center = 50.0 * est.pi_hat
        assert result.lower == pytest.approx(center - result.calibration.q_lower * se)
        assert result.upper == pytest.approx(center + result.calibration.q_upper * se)

    def test_deterministic_given_stream(self, mortality, design):
        a = qb_pi_calibrated(mortality, design, B=2000, rng=RngStream(5))
        b = qb_pi_calibrated(mortality, design, B=2000, rng=RngStream(5))
        assert a == b

    def test_tails_calibrated_independently(self, mortality, design):
        result = qb_pi_calibrated(mortality, design, B=10000, rng=RngStream(3))
        report = result.calibration
        assert report.q_lower != report.q_upper
        assert report.q_upper > report.q_lower


class TestBootstrapDraws:
    def test_bootstrap_hcd_keeps_design_sizes(self, mortality):
        est = estimate_betabinomial(mortality)
        synthetic = bootstrap_hcd(est, mortality.ns, RngStream(7))
        np.testing.assert_array_equal(synthetic.ns, mortality.ns)
        assert np.all(synthetic.ys <= synthetic.ns)

    def test_bootstrap_future_moments(self, mortality):
        est = estimate_betabinomial(mortality)
        draws = bootstrap_future(est, 50, 100_000, RngStream(8))
        mean = 50 * est.pi_hat
        var = 50 * est.pi_hat * (1 - est.pi_hat) * (1 + 49 * est.rho_hat)
        assert draws.mean() == pytest.approx(mean, abs=4 * np.sqrt(var / 100_000))

    def test_quasibinomial_draws_use_matched_icc(self, mortality):
        est = estimate_quasibinomial(mortality)
        draws = bootstrap_future(est, 50, 100_000, RngStream(12))
        rho = (est.phi_hat - 1.0) / 49.0
        var = 50 * est.pi_hat * (1 - est.pi_hat) * (1 + 49 * rho)
        assert draws.var() == pytest.approx(var, rel=0.05)
