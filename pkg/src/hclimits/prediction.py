"""Wald-type prediction intervals and their bootstrap calibration.

The uncalibrated intervals take the form

    n* pi_hat +/- z_{1-alpha/2} * SE

with SE covering both the estimation uncertainty of n* pi_hat and the
sampling variance of the future count.  Calibration replaces the normal
quantile with per-tail factors q_l, q_u tuned so that each tail's
bootstrap-simulated coverage hits 1 - alpha/2: B synthetic historical
datasets and B future counts are drawn from the fitted process, the
parameters are re-estimated on every synthetic dataset (with the same
degenerate-data adjustment as the original fit), and the factor of each
tail is found by monotone bisection on the step function

    psi(q) = (1/B) * #{b : the q-scaled limit covers y*_b}.

The final interval always uses the original-data estimates; only the
quantile factors come from the bootstrap.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import norm

from .data_model import (
    CalibrationReport,
    FutureDesign,
    HistoricalData,
    IntervalResult,
    Method,
)
from .errors import BootstrapDegenerate, CalibrationNotConverged, InvalidParameter
from .estimators import (
    RHO_FLOOR,
    ParameterEstimates,
    _anova_rho_rows,
    _pearson_phi_rows,
    _pooled_pi_rows,
    _zero_adjust_rows,
    estimate_betabinomial,
    estimate_quasibinomial,
)
from .samplers import RngStream, bootstrap_future, bootstrap_hcd_matrix

#: Bisection bracket: start at this upper bound ...
BRACKET_START = 10.0
#: ... and double it up to this cap while the tail coverage is short.
BRACKET_MAX = 80.0
#: Hard cap on bisection iterations per tail.
MAX_BISECT_ITERATIONS = 60
#: Give up when more than this fraction of bootstrap replicates cannot
#: be estimated even after redraws.
MAX_BOOTSTRAP_FAILURE = 0.10


def _z(alpha: float) -> float:
    return float(norm.ppf(1.0 - alpha / 2.0))


def _qb_radicand(pi: np.ndarray, phi: np.ndarray, n_star: int, sum_n: np.ndarray) -> np.ndarray:
    g = pi * (1.0 - pi)
    return phi * (n_star**2 * g / sum_n) + phi * (n_star * g)


def _bb_radicand(pi: np.ndarray, rho: np.ndarray, n_star: int, sum_n: np.ndarray) -> np.ndarray:
    g = pi * (1.0 - pi)
    var_center = n_star**2 * g / sum_n + ((sum_n - 1.0) / sum_n) * n_star**2 * g * rho
    var_future = n_star * g * (1.0 + (n_star - 1.0) * rho)
    return var_center + var_future


def _uncalibrated(
    estimates: ParameterEstimates,
    design: FutureDesign,
    sum_n: float,
    method: Method,
) -> IntervalResult:
    if sum_n <= 0:
        raise InvalidParameter(f"sum of historical cluster sizes must be positive, got {sum_n}")
    pi = np.asarray(estimates.pi_hat)
    if method is Method.QB:
        rad = _qb_radicand(pi, np.asarray(estimates.phi_hat), design.n_star, np.asarray(sum_n))
    else:
        rad = _bb_radicand(pi, np.asarray(estimates.rho_hat), design.n_star, np.asarray(sum_n))
    center = design.n_star * estimates.pi_hat
    half = _z(design.alpha) * float(np.sqrt(rad))
    return IntervalResult.from_limits(
        center - half,
        center + half,
        method=method,
        n_star=design.n_star,
        alpha=design.alpha,
    )


def qb_pi_uncalibrated(
    estimates: ParameterEstimates, design: FutureDesign, sum_n: float
) -> IntervalResult:
    """Uncalibrated quasi-binomial interval from (pi_hat, phi_hat)."""
    if estimates.phi_hat is None:
        raise InvalidParameter("quasi-binomial interval needs phi_hat estimates")
    return _uncalibrated(estimates, design, sum_n, Method.QB)


def bb_pi_uncalibrated(
    estimates: ParameterEstimates, design: FutureDesign, sum_n: float
) -> IntervalResult:
    """Uncalibrated beta-binomial interval from (pi_hat, rho_hat)."""
    if estimates.rho_hat is None:
        raise InvalidParameter("beta-binomial interval needs rho_hat estimates")
    return _uncalibrated(estimates, design, sum_n, Method.BB)


def _solve_min_q(
    crossings: np.ndarray, target: float, tolerance: float
) -> tuple[float, float, int]:
    """Smallest q placing psi(q) = mean(crossings <= q) in target +/- tolerance.

    psi is a nondecreasing step function, so the infimum of
    {q : psi(q) >= target - tolerance} is well defined and found by
    monotone bisection; the achieved psi there must not overshoot
    target + tolerance (a tie mass larger than the band would).
    """
    lo_band = target - tolerance
    hi_band = target + tolerance

    def psi(q: float) -> float:
        return float(np.mean(crossings <= q))

    iterations = 0
    psi_zero = psi(0.0)
    if psi_zero >= lo_band:
        if psi_zero <= hi_band:
            return 0.0, psi_zero, iterations
        raise CalibrationNotConverged(
            f"tail coverage at q=0 is already {psi_zero:.4f} > {hi_band:.4f}"
        )
    hi = BRACKET_START
    while psi(hi) < lo_band and hi < BRACKET_MAX:
        hi *= 2.0
    if psi(hi) < lo_band:
        raise CalibrationNotConverged(
            f"tail coverage only reaches {psi(hi):.4f} at q={hi}; "
            f"needs at least {lo_band:.4f}"
        )
    lo = 0.0
    while hi - lo > 1e-12 * max(1.0, hi):
        iterations += 1
        if iterations > MAX_BISECT_ITERATIONS:
            raise CalibrationNotConverged(
                f"bisection exceeded {MAX_BISECT_ITERATIONS} iterations"
            )
        mid = 0.5 * (lo + hi)
        if psi(mid) < lo_band:
            lo = mid
        else:
            hi = mid
    achieved = psi(hi)
    if achieved > hi_band:
        raise CalibrationNotConverged(
            f"coverage jumps from below {lo_band:.4f} straight to "
            f"{achieved:.4f}; tie mass exceeds the tolerance band"
        )
    return hi, achieved, iterations


def _reestimate_rows(
    Y: np.ndarray, sizes: np.ndarray, family: str, n_star: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (center_b, radicand_b) after degenerate-data adjustment.

    The refitted quasi-binomial dispersion is taken as-is, exactly as a
    refitted GLM would report it: synthetic datasets that happen to look
    underdispersed keep their Pearson estimate below 1, which widens the
    crossing distribution accordingly.  The intra-class correlation has
    no beta-binomial interpretation below its floor, so it stays
    clamped like the original fit.
    """
    Yadj, Nadj, _ = _zero_adjust_rows(Y, sizes)
    pi = _pooled_pi_rows(Yadj, Nadj)
    sum_n = Nadj.sum(axis=1)
    if family == "quasi-binomial":
        disp = _pearson_phi_rows(Yadj, Nadj, pi)
        rad = _qb_radicand(pi, disp, n_star, sum_n)
    else:
        disp = np.maximum(_anova_rho_rows(Yadj, Nadj, pi), RHO_FLOOR)
        rad = _bb_radicand(pi, disp, n_star, sum_n)
    return n_star * pi, rad


def calibrate_tails(
    estimates: ParameterEstimates,
    design: FutureDesign,
    design_ns: "np.typing.ArrayLike",
    B: int = 10000,
    t: float = 0.001,
    rng: RngStream = RngStream(0),
) -> CalibrationReport:
    """Per-tail bootstrap calibration of the quantile factors.

    Draws B synthetic historical datasets plus B future counts from the
    process fitted to the original data, re-estimates the parameters on
    each synthetic dataset, and bisects each tail's factor until the
    bootstrap coverage of that tail lands within ``t`` of 1 - alpha/2.
    Both tails share the same B draws.
    """
    if B < 1000:
        raise InvalidParameter(f"calibration needs B >= 1000 bootstrap draws, got {B}")
    if not 0 < t < design.alpha / 2:
        raise InvalidParameter(
            f"tolerance must lie in (0, alpha/2) = (0, {design.alpha / 2}), got {t}"
        )
    sizes = np.asarray(design_ns, dtype=float)
    family = estimates.family

    Y = bootstrap_hcd_matrix(estimates, sizes, B, rng.child(0)).astype(float)
    future = bootstrap_future(estimates, design.n_star, B, rng.child(1)).astype(float)

    def unestimable(centers: np.ndarray, rad: np.ndarray) -> np.ndarray:
        return ~(np.isfinite(centers) & np.isfinite(rad) & (rad > 0))

    centers, rad = _reestimate_rows(Y, sizes, family, design.n_star)
    bad = unestimable(centers, rad)
    if bad.mean() > MAX_BOOTSTRAP_FAILURE:
        raise BootstrapDegenerate(
            f"{bad.sum()} of {B} bootstrap replicates were unestimable"
        )
    redraw_round = 0
    while bad.any():
        redraw_round += 1
        if redraw_round > 5:
            raise BootstrapDegenerate(
                f"{bad.sum()} bootstrap replicates still unestimable after redraws"
            )
        Y[bad] = bootstrap_hcd_matrix(
            estimates, sizes, int(bad.sum()), rng.child(2, redraw_round)
        ).astype(float)
        centers, rad = _reestimate_rows(Y, sizes, family, design.n_star)
        bad = unestimable(centers, rad)

    se = np.sqrt(rad)

    target = 1.0 - design.alpha / 2.0
    q_lower, psi_lower, it_lower = _solve_min_q((centers - future) / se, target, t)
    q_upper, psi_upper, it_upper = _solve_min_q((future - centers) / se, target, t)
    return CalibrationReport(
        q_lower=q_lower,
        q_upper=q_upper,
        achieved_psi_lower=psi_lower,
        achieved_psi_upper=psi_upper,
        bootstrap_B=int(B),
        iterations_lower=it_lower,
        iterations_upper=it_upper,
        tolerance=t,
    )


def _calibrated(
    hcd: HistoricalData,
    design: FutureDesign,
    B: int,
    t: float,
    rng: RngStream,
    method: Method,
) -> IntervalResult:
    if method is Method.QB_CAL:
        estimates = estimate_quasibinomial(hcd)
    else:
        estimates = estimate_betabinomial(hcd)
    report = calibrate_tails(estimates, design, hcd.ns, B=B, t=t, rng=rng)
    sum_n = hcd.sum_n - 0.5 if estimates.zero_adjusted else hcd.sum_n
    pi = np.asarray(estimates.pi_hat)
    if method is Method.QB_CAL:
        rad = _qb_radicand(pi, np.asarray(estimates.phi_hat), design.n_star, np.asarray(sum_n))
    else:
        rad = _bb_radicand(pi, np.asarray(estimates.rho_hat), design.n_star, np.asarray(sum_n))
    se = float(np.sqrt(rad))
    center = design.n_star * estimates.pi_hat
    return IntervalResult.from_limits(
        center - report.q_lower * se,
        center + report.q_upper * se,
        method=method,
        n_star=design.n_star,
        alpha=design.alpha,
        calibration=report,
    )


def qb_pi_calibrated(
    hcd: HistoricalData,
    design: FutureDesign,
    B: int = 10000,
    t: float = 0.001,
    rng: RngStream = RngStream(0),
) -> IntervalResult:
    """Bootstrap-calibrated quasi-binomial prediction interval."""
    return _calibrated(hcd, design, B, t, rng, Method.QB_CAL)


def bb_pi_calibrated(
    hcd: HistoricalData,
    design: FutureDesign,
    B: int = 10000,
    t: float = 0.001,
    rng: RngStream = RngStream(0),
) -> IntervalResult:
    """Bootstrap-calibrated beta-binomial prediction interval."""
    return _calibrated(hcd, design, B, t, rng, Method.BB_CAL)
