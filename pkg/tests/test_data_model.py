"""Tests for the core data containers, validation, and CSV round-trips."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hclimits import (
    EmptyData,
    FutureDesign,
    HistoricalData,
    InvalidParameter,
    NegativeCount,
    SuccessExceedsTotal,
    covered_count_range,
    mortality_csv_path,
    mortality_hcd,
    read_hcd_csv,
    validate_hcd,
    write_hcd_csv,
)


class TestHistoricalData:
    def test_mortality_fixture_shape(self, mortality):
        assert mortality.h == 10
        assert mortality.sum_n == 500.0
        np.testing.assert_array_equal(mortality.ns, np.full(10, 50.0))
        assert mortality.ys.min() == 10.0
        assert mortality.ys.max() == 21.0
        assert mortality.ys.mean() == pytest.approx(13.8)

    def test_arrays_are_copies(self, mortality):
        ys = mortality.ys
        ys[0] = -999.0
        assert mortality.ys[0] == 15.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyData):
            HistoricalData(studies=())

    def test_negative_count_rejected(self):
        with pytest.raises(NegativeCount):
            HistoricalData(studies=((-1.0, 50.0),))

    def test_success_exceeding_total_rejected(self):
        with pytest.raises(SuccessExceedsTotal):
            HistoricalData(studies=((51.0, 50.0),))

    def test_validate_hcd_coerces_rows(self):
        hcd = validate_hcd([(5, 50), (3, 50)])
        assert hcd.studies == ((5.0, 50.0), (3.0, 50.0))


class TestFutureDesign:
    def test_defaults(self):
        design = FutureDesign(n_star=50)
        assert design.alpha == 0.05

    @pytest.mark.parametrize("n_star", [0, -3])
    def test_nonpositive_size_rejected(self, n_star):
        with pytest.raises(InvalidParameter):
            FutureDesign(n_star=n_star)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.2, -0.1])
    def test_alpha_outside_unit_interval_rejected(self, alpha):
        with pytest.raises(InvalidParameter):
            FutureDesign(n_star=50, alpha=alpha)


class TestCoveredCountRange:
    def test_open_interval_excludes_borders(self):
        assert covered_count_range(7.478, 20.122, 50) == (8, 20)

    def test_clipped_to_support(self):
        assert covered_count_range(-3.0, 75.0, 50) == (0, 50)

    def test_empty_range_is_none(self):
        assert covered_count_range(50.2, 61.0, 50) is None

    def test_near_integer_borders_snap_inward(self):
        assert covered_count_range(6.9999999999, 21.0000000001, 50) == (7, 21)

    def test_integer_borders_included(self):
        assert covered_count_range(7.0, 21.0, 50) == (7, 21)

    @given(
        lower=st.floats(-10.0, 60.0, allow_nan=False),
        upper=st.floats(-10.0, 60.0, allow_nan=False),
    )
    def test_result_is_ordered_and_in_support(self, lower, upper):
        out = covered_count_range(lower, upper, 50)
        if out is not None:
            lo, hi = out
            assert 0 <= lo <= hi <= 50
            assert lo >= lower - 1.0 and hi <= upper + 1.0


class TestCsvRoundTrip:
    def test_round_trip(self, tmp_path, mortality):
        path = tmp_path / "hcd.csv"
        write_hcd_csv(mortality, path)
        back = read_hcd_csv(path)
        assert back == mortality

    def test_custom_study_ids(self, tmp_path, small_hcd):
        path = tmp_path / "hcd.csv"
        write_hcd_csv(small_hcd, path, study_ids=["a", "b", "c", "d"])
        text = path.read_text()
        assert text.splitlines()[0] == "study_id,y,n"
        assert text.splitlines()[1].startswith("a,")
        assert read_hcd_csv(path) == small_hcd

    def test_packaged_dataset_matches_constructor(self):
        assert read_hcd_csv(mortality_csv_path()) == mortality_hcd()

    def test_malformed_rows_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("study_id,y,n\ns1,5,fifty\n")
        with pytest.raises(InvalidParameter):
            read_hcd_csv(path)
