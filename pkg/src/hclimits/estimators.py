"""Point estimation of pi, phi and rho from historical data.

Provides the pooled proportion, the Pearson dispersion of an
intercept-only quasi-binomial GLM, the ANOVA-type moment estimator of
the intra-class correlation for clustered binary data, the floors both
dispersion estimates are clamped to, and the adjustment that makes
degenerate (all-zero or all-events) data estimable.

Row-wise vectorized variants operating on (B, H) matrices back the
bootstrap calibration, which has to re-estimate parameters for every
bootstrap replicate.
"""
from __future__ import annotations

import numpy as np

from .data_model import HistoricalData, ParameterEstimates
from .errors import DegenerateAllOne, DegenerateAllZero, NotDegenerate, TooFewStudies

#: Dispersion floor: phi_hat below this is clamped up.
PHI_FLOOR = 1.001

#: Intra-class correlation floor: rho_hat below this is clamped up.
RHO_FLOOR = 0.00001


def estimate_pi(hcd: HistoricalData) -> float:
    """Pooled proportion sum(y) / sum(n).

    Raises
    ------
    DegenerateAllZero, DegenerateAllOne
        When the pooled proportion is 0 or 1.  Callers may apply
        :func:`apply_zero_adjustment` first.
    """
    sum_y, sum_n = hcd.sum_y, hcd.sum_n
    if sum_y == 0:
        raise DegenerateAllZero("every study has zero events; pooled proportion is 0")
    if sum_y == sum_n:
        raise DegenerateAllOne("every unit has an event; pooled proportion is 1")
    return sum_y / sum_n


def apply_zero_adjustment(hcd: HistoricalData) -> HistoricalData:
    """Make degenerate data estimable by moving half an observation.

    All-zero data: the first study becomes (0.5, n_1 - 0.5), i.e. half
    a success in a cluster shrunk by half a unit.  All-events data gets
    the mirrored treatment, half a failure: the first study becomes
    (n_1 - 1, n_1 - 0.5).  The mirrored rule is this package's
    extension; it is untested territory in the source method, which
    only documents the all-zero case.
    """
    y0, n0 = hcd.studies[0]
    if hcd.all_zero:
        first = (0.5, n0 - 0.5)
    elif hcd.all_one:
        n_new = n0 - 0.5
        first = (n_new - 0.5, n_new)
    else:
        raise NotDegenerate("data has at least one non-extreme study")
    return HistoricalData((first,) + hcd.studies[1:])


def ensure_estimable(hcd: HistoricalData) -> tuple[HistoricalData, bool]:
    """Return (possibly adjusted data, whether adjustment was applied)."""
    if hcd.all_zero or hcd.all_one:
        return apply_zero_adjustment(hcd), True
    return hcd, False


def estimate_quasibinomial(
    hcd: HistoricalData, zero_adjust: bool = True
) -> ParameterEstimates:
    """Pooled pi and Pearson dispersion phi of an intercept-only model.

    phi_raw = (1/(H-1)) * sum_h (y_h - n_h pi)^2 / (n_h pi (1-pi)),
    clamped to at least ``PHI_FLOOR``.

    Parameters
    ----------
    zero_adjust : bool
        Apply :func:`apply_zero_adjustment` automatically when the data
        is degenerate (default).  With False, degenerate data raises.
    """
    if hcd.h < 2:
        raise TooFewStudies(f"dispersion needs H >= 2 studies, got {hcd.h}")
    data, adjusted = ensure_estimable(hcd) if zero_adjust else (hcd, False)
    pi = estimate_pi(data)
    ys, ns = data.ys, data.ns
    phi_raw = float((((ys - ns * pi) ** 2) / (ns * pi * (1 - pi))).sum() / (data.h - 1))
    return ParameterEstimates(
        pi_hat=pi,
        phi_hat=max(phi_raw, PHI_FLOOR),
        clamped_phi=phi_raw < PHI_FLOOR,
        zero_adjusted=adjusted,
    )


def estimate_betabinomial(
    hcd: HistoricalData, zero_adjust: bool = True
) -> ParameterEstimates:
    """Pooled pi and ANOVA-type moment estimate of the intra-class
    correlation rho, clamped to at least ``RHO_FLOOR``.

    With p_h = y_h / n_h:

    - BMS = sum_h n_h (p_h - pi)^2 / (H - 1)
    - WMS = sum_h n_h p_h (1 - p_h) / sum_h (n_h - 1)
    - n_A = (sum n_h - sum n_h^2 / sum n_h) / (H - 1)
    - rho_raw = (BMS - WMS) / (BMS + (n_A - 1) WMS)
    """
    if hcd.h < 2:
        raise TooFewStudies(f"intra-class correlation needs H >= 2 studies, got {hcd.h}")
    data, adjusted = ensure_estimable(hcd) if zero_adjust else (hcd, False)
    pi = estimate_pi(data)
    rho_raw = float(_anova_rho_rows(data.ys[None, :], data.ns[None, :], np.array([pi]))[0])
    if not np.isfinite(rho_raw):
        raise TooFewStudies(
            "no usable between- or within-study variance (all single-unit "
            "studies with identical outcomes)"
        )
    return ParameterEstimates(
        pi_hat=pi,
        rho_hat=max(rho_raw, RHO_FLOOR),
        clamped_rho=rho_raw < RHO_FLOOR,
        zero_adjusted=adjusted,
    )


# ---------------------------------------------------------------------------
# Row-wise vectorized versions for bootstrap matrices.  Each row of the
# (B, H) matrices Y and N is one synthetic historical dataset; the scalar
# estimators above must stay consistent with these (see tests).


def _zero_adjust_rows(Y: np.ndarray, N: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise degenerate-data adjustment.

    Returns adjusted copies of (Y, N) plus the mask of rows touched.
    """
    Y = Y.astype(float, copy=True)
    N = np.broadcast_to(np.asarray(N, dtype=float), Y.shape).copy()
    all_zero = (Y == 0).all(axis=1)
    all_one = (Y == N).all(axis=1) & ~all_zero
    Y[all_zero, 0] = 0.5
    N[all_zero, 0] -= 0.5
    N[all_one, 0] -= 0.5
    Y[all_one, 0] = N[all_one, 0] - 0.5
    return Y, N, all_zero | all_one


def _pooled_pi_rows(Y: np.ndarray, N: np.ndarray) -> np.ndarray:
    return Y.sum(axis=1) / N.sum(axis=1)


def _pearson_phi_rows(Y: np.ndarray, N: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Raw Pearson dispersion per row; caller applies the floor."""
    h = Y.shape[1]
    p = pi[:, None]
    return (((Y - N * p) ** 2) / (N * p * (1 - p))).sum(axis=1) / (h - 1)


def _anova_rho_rows(Y: np.ndarray, N: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Raw ANOVA intra-class correlation per row; caller applies the floor."""
    h = Y.shape[1]
    P = Y / N
    bms = (N * (P - pi[:, None]) ** 2).sum(axis=1) / (h - 1)
    wms = (N * P * (1 - P)).sum(axis=1) / (N - 1).sum(axis=1)
    sum_n = N.sum(axis=1)
    n_a = (sum_n - (N**2).sum(axis=1) / sum_n) / (h - 1)
    denom = bms + (n_a - 1) * wms
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = (bms - wms) / denom
    return np.where(denom > 0, rho, np.nan)
