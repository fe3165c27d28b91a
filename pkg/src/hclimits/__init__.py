"""Historical control limits for overdispersed binomial endpoints.

Given counts from historical control groups, this package estimates the
pooled event proportion together with an overdispersion parameter
(a quasi-binomial dispersion factor or a beta-binomial intra-class
correlation), and turns them into an interval expected to cover the
control count of a future study.  Simple heuristics (historical range,
np-chart, mean plus or minus k standard deviations), Wald-type
prediction intervals with parametric-bootstrap tail calibration, and
two Bayesian posterior-predictive models are provided, along with a
Monte-Carlo harness that measures coverage of all of them.
"""
from .bayes import (
    McmcConfig,
    effective_sample_size,
    empirical_quantile_interval,
    fit_glmm,
    fit_hierarchical_bb,
    split_rhat,
)
from .data_model import (
    CalibrationReport,
    FutureDesign,
    HistoricalData,
    IntervalResult,
    Method,
    ParameterEstimates,
    covered_count_range,
    read_hcd_csv,
    validate_hcd,
    write_hcd_csv,
)
from .datasets import MORTALITY_N, MORTALITY_Y, mortality_csv_path, mortality_hcd
from .errors import (
    BootstrapDegenerate,
    CalibrationNotConverged,
    DegenerateAllOne,
    DegenerateAllZero,
    DegenerateProportion,
    EmptyData,
    EmptyDraws,
    HclError,
    InvalidParameter,
    NegativeCount,
    NonConvergence,
    NotDegenerate,
    SuccessExceedsTotal,
    TooFewStudies,
    UnequalClusterSizes,
)
from .estimators import (
    apply_zero_adjustment,
    ensure_estimable,
    estimate_betabinomial,
    estimate_pi,
    estimate_quasibinomial,
)
from .heuristics import historical_range, mean_k_sd, np_chart
from .prediction import (
    bb_pi_calibrated,
    bb_pi_uncalibrated,
    calibrate_tails,
    qb_pi_calibrated,
    qb_pi_uncalibrated,
)
from .samplers import (
    RngStream,
    bootstrap_future,
    bootstrap_hcd,
    rho_from_phi,
    sample_betabinomial,
)
from .simulation import (
    CoverageSummary,
    SimulationSetting,
    grid_ltc,
    grid_mnt,
    run_setting,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapDegenerate",
    "CalibrationNotConverged",
    "CalibrationReport",
    "CoverageSummary",
    "DegenerateAllOne",
    "DegenerateAllZero",
    "DegenerateProportion",
    "EmptyData",
    "EmptyDraws",
    "FutureDesign",
    "HclError",
    "HistoricalData",
    "IntervalResult",
    "InvalidParameter",
    "McmcConfig",
    "Method",
    "MORTALITY_N",
    "MORTALITY_Y",
    "NegativeCount",
    "NonConvergence",
    "NotDegenerate",
    "ParameterEstimates",
    "RngStream",
    "SimulationSetting",
    "SuccessExceedsTotal",
    "TooFewStudies",
    "UnequalClusterSizes",
    "apply_zero_adjustment",
    "bb_pi_calibrated",
    "bb_pi_uncalibrated",
    "bootstrap_future",
    "bootstrap_hcd",
    "calibrate_tails",
    "covered_count_range",
    "effective_sample_size",
    "empirical_quantile_interval",
    "ensure_estimable",
    "estimate_betabinomial",
    "estimate_pi",
    "estimate_quasibinomial",
    "fit_glmm",
    "fit_hierarchical_bb",
    "grid_ltc",
    "grid_mnt",
    "historical_range",
    "mean_k_sd",
    "mortality_csv_path",
    "mortality_hcd",
    "np_chart",
    "qb_pi_calibrated",
    "qb_pi_uncalibrated",
    "read_hcd_csv",
    "rho_from_phi",
    "run_setting",
    "sample_betabinomial",
    "split_rhat",
    "validate_hcd",
    "write_hcd_csv",
]
