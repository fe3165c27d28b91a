"""Heuristic historical control limits: range, np-chart, mean +/- k SD."""
from __future__ import annotations

import math

from .data_model import FutureDesign, HistoricalData, IntervalResult, Method
from .errors import InvalidParameter, TooFewStudies, UnequalClusterSizes
from .estimators import estimate_pi


def _require_constant_n(hcd: HistoricalData, what: str) -> int:
    if not hcd.constant_n:
        raise UnequalClusterSizes(
            f"{what} is only interpretable when every historical cluster has "
            "the same size; sizes differ across studies"
        )
    return int(hcd.ns[0])


def _require_k(k: float) -> float:
    if k < 0 or math.isnan(k):
        raise InvalidParameter(f"k must be >= 0, got {k}")
    return float(k)


def historical_range(hcd: HistoricalData) -> IntervalResult:
    """[min y_h, max y_h]: aims to cover every historical realization.

    Requires a constant cluster size; otherwise the counts live on
    different scales and the range has no sensible reading.
    """
    n = _require_constant_n(hcd, "the historical range")
    ys = hcd.ys
    return IntervalResult.from_limits(
        float(ys.min()), float(ys.max()), method=Method.HIST_RANGE, n_star=n
    )


def np_chart(hcd: HistoricalData, n_star: int, k: float = 2.0) -> IntervalResult:
    """Shewhart np-chart limits n* pi_bar +/- k sqrt(n* pi_bar (1 - pi_bar))."""
    k = _require_k(k)
    n_star = FutureDesign(n_star).n_star
    pi_bar = estimate_pi(hcd)
    center = n_star * pi_bar
    half = k * math.sqrt(n_star * pi_bar * (1 - pi_bar))
    return IntervalResult.from_limits(
        center - half, center + half, method=Method.NP_CHART, n_star=n_star
    )


def mean_k_sd(hcd: HistoricalData, k: float = 2.0) -> IntervalResult:
    """ybar +/- k SD with the sample standard deviation over studies.

    No mean-variance relationship is assumed, so the spread estimate
    rests entirely on the H historical counts; requires H >= 2 and a
    constant cluster size.
    """
    k = _require_k(k)
    n = _require_constant_n(hcd, "mean +/- k SD")
    if hcd.h < 2:
        raise TooFewStudies(f"standard deviation needs H >= 2 studies, got {hcd.h}")
    ys = hcd.ys
    ybar = float(ys.mean())
    sd = math.sqrt(float(((ys - ybar) ** 2).sum()) / (hcd.h - 1))
    return IntervalResult.from_limits(
        ybar - k * sd, ybar + k * sd, method=Method.MEAN_SD, n_star=n
    )
