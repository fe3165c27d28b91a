"""Tests for the range, np-chart, and mean-sd heuristic limits."""

from __future__ import annotations

import math

import numpy as np
import pytest

from hclimits import (
    DegenerateAllZero,
    HistoricalData,
    InvalidParameter,
    Method,
    TooFewStudies,
    UnequalClusterSizes,
    historical_range,
    mean_k_sd,
    np_chart,
)


class TestHistoricalRange:
    def test_mortality_range(self, mortality):
        result = historical_range(mortality)
        assert result.lower == 10.0
        assert result.upper == 21.0
        assert result.covered_range == (10, 21)
        assert result.method is Method.HIST_RANGE

    def test_single_study_collapses(self):
        result = historical_range(HistoricalData(studies=((5.0, 50.0),)))
        assert result.lower == result.upper == 5.0

    def test_unequal_cluster_sizes_rejected(self):
        hcd = HistoricalData(studies=((5.0, 50.0), (9.0, 40.0)))
        with pytest.raises(UnequalClusterSizes):
            historical_range(hcd)


class TestNpChart:
    def test_mortality_limits(self, mortality):
        result = np_chart(mortality, n_star=50)
        assert result.lower == pytest.approx(7.478, abs=1e-3)
        assert result.upper == pytest.approx(20.122, abs=1e-3)
        assert result.covered_range == (8, 20)

    def test_limits_by_hand(self, mortality):
        pi = mortality.ys.sum() / mortality.ns.sum()
        center = 50 * pi
        spread = 2.0 * math.sqrt(50 * pi * (1.0 - pi))
        result = np_chart(mortality, n_star=50)
        assert result.lower == pytest.approx(center - spread)
        assert result.upper == pytest.approx(center + spread)

    def test_wider_multiplier_widens_limits(self, mortality):
        narrow = np_chart(mortality, n_star=50, k=2.0)
        wide = np_chart(mortality, n_star=50, k=3.0)
        assert wide.lower < narrow.lower
        assert wide.upper > narrow.upper

    def test_uses_requested_future_size(self, mortality):
        result = np_chart(mortality, n_star=100)
        pi = 0.276
        assert result.lower == pytest.approx(100 * pi - 2 * math.sqrt(100 * pi * (1 - pi)))

    def test_all_zero_data_rejected(self):
        zeros = HistoricalData(studies=((0.0, 50.0), (0.0, 50.0)))
        with pytest.raises(DegenerateAllZero):
            np_chart(zeros, n_star=50)

    def test_negative_multiplier_rejected(self, mortality):
        with pytest.raises(InvalidParameter):
            np_chart(mortality, n_star=50, k=-1.0)

    def test_zero_multiplier_collapses_to_center(self, mortality):
        result = np_chart(mortality, n_star=50, k=0.0)
        assert result.lower == result.upper == pytest.approx(50 * 0.276)


class TestMeanKSd:
    def test_mortality_limits(self, mortality):
        result = mean_k_sd(mortality)
        assert result.lower == pytest.approx(6.570, abs=1e-3)
        assert result.upper == pytest.approx(21.030, abs=1e-3)
        assert result.covered_range == (7, 21)

    def test_limits_by_hand(self, mortality):
        ys = mortality.ys
        sd = float(np.std(ys, ddof=1))
        result = mean_k_sd(mortality)
        assert result.lower == pytest.approx(ys.mean() - 2.0 * sd)
        assert result.upper == pytest.approx(ys.mean() + 2.0 * sd)

    def test_single_study_rejected(self):
        with pytest.raises(TooFewStudies):
            mean_k_sd(HistoricalData(studies=((5.0, 50.0),)))
