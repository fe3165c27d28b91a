"""Core value types: historical data, future designs, estimates, intervals.

All types are immutable value objects and safe to share between threads
or processes.  Interval limits are kept as raw reals and additionally
reported as the covered integer range, because a future control group
can only realize integer event counts.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyData,
    InvalidParameter,
    NegativeCount,
    SuccessExceedsTotal,
)

#: Limits closer than this to an integer are treated as hitting it when
#: the covered integer range is derived, so a lower limit of exactly
#: 10.0 covers the count 10 despite floating-point noise.
INTEGER_SNAP = 1e-9

#: Column order of the historical-data CSV schema.
CSV_HEADER = ("study_id", "y", "n")


class Method(str, Enum):
    """Tags for the interval constructions offered by the package."""

    HIST_RANGE = "hist-range"
    NP_CHART = "np-chart"
    MEAN_SD = "mean-sd"
    QB = "qb"
    BB = "bb"
    QB_CAL = "qb-cal"
    BB_CAL = "bb-cal"
    BAYES_HBB = "bayes-hbb"
    BAYES_GLMM = "bayes-glmm"

    def __str__(self) -> str:  # argparse/reporting friendliness
        return self.value


@dataclass(frozen=True)
class HistoricalData:
    """Event counts ``y_h`` out of ``n_h`` experimental units per study.

    Parameters
    ----------
    studies : tuple of (y, n) pairs
        One entry per historical control group, in input order.

    Notes
    -----
    Fractional values are permitted only as the output of the
    degenerate-data adjustment (see :mod:`hclimits.estimators`); user
    input goes through :func:`validate_hcd`, which enforces integers.
    """

    studies: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        studies = tuple((float(y), float(n)) for y, n in self.studies)
        if not studies:
            raise EmptyData("need at least one historical study")
        for i, (y, n) in enumerate(studies):
            if y < 0 or n < 0:
                raise NegativeCount(f"study {i}: y={y}, n={n}")
            if n < 0.5:
                raise InvalidParameter(f"study {i}: cluster size {n} < 0.5")
            if y > n:
                raise SuccessExceedsTotal(f"study {i}: y={y} > n={n}")
        object.__setattr__(self, "studies", studies)

    @property
    def h(self) -> int:
        """Number of historical studies H."""
        return len(self.studies)

    @property
    def ys(self) -> np.ndarray:
        return np.array([y for y, _ in self.studies], dtype=float)

    @property
    def ns(self) -> np.ndarray:
        return np.array([n for _, n in self.studies], dtype=float)

    @property
    def sum_y(self) -> float:
        return float(self.ys.sum())

    @property
    def sum_n(self) -> float:
        return float(self.ns.sum())

    @property
    def constant_n(self) -> bool:
        """True when all cluster sizes are identical."""
        ns = self.ns
        return bool((ns == ns[0]).all())

    @property
    def all_zero(self) -> bool:
        return all(y == 0 for y, _ in self.studies)

    @property
    def all_one(self) -> bool:
        return all(y == n for y, n in self.studies)

    def to_rows(self) -> list[tuple[float, float]]:
        """Plain-row form; exact inverse of :meth:`from_rows`."""
        return [tuple(pair) for pair in self.studies]

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> "HistoricalData":
        return cls(tuple((float(y), float(n)) for y, n in rows))


@dataclass(frozen=True)
class FutureDesign:
    """Known design of the future control group.

    Parameters
    ----------
    n_star : int
        Number of experimental units in the future control group.
    alpha : float
        Nominal error level in (0, 1).
    """

    n_star: int
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if int(self.n_star) != self.n_star or self.n_star < 1:
            raise InvalidParameter(f"n_star must be a positive integer, got {self.n_star}")
        object.__setattr__(self, "n_star", int(self.n_star))
        if not 0 < self.alpha < 1:
            raise InvalidParameter(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class ParameterEstimates:
    """Point estimates with clamping and adjustment provenance.

    Exactly one of ``phi_hat`` (quasi-binomial dispersion) and
    ``rho_hat`` (beta-binomial intra-class correlation) is present,
    identifying the model family.
    """

    pi_hat: float
    phi_hat: float | None = None
    rho_hat: float | None = None
    clamped_phi: bool = False
    clamped_rho: bool = False
    zero_adjusted: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.pi_hat < 1:
            raise InvalidParameter(f"pi_hat must lie in (0, 1), got {self.pi_hat}")
        if (self.phi_hat is None) == (self.rho_hat is None):
            raise InvalidParameter("exactly one of phi_hat / rho_hat must be set")

    @property
    def family(self) -> str:
        return "quasi-binomial" if self.phi_hat is not None else "beta-binomial"


@dataclass(frozen=True)
class CalibrationReport:
    """Outcome of the per-tail bootstrap calibration."""

    q_lower: float
    q_upper: float
    achieved_psi_lower: float
    achieved_psi_upper: float
    bootstrap_B: int
    iterations_lower: int
    iterations_upper: int
    tolerance: float

    def __post_init__(self) -> None:
        if self.q_lower < 0 or self.q_upper < 0:
            raise InvalidParameter("calibrated quantile factors must be >= 0")
        for psi in (self.achieved_psi_lower, self.achieved_psi_upper):
            if not 0 <= psi <= 1:
                raise InvalidParameter(f"achieved coverage {psi} outside [0, 1]")
        if self.bootstrap_B < 1:
            raise InvalidParameter("bootstrap_B must be positive")
        if self.tolerance <= 0:
            raise InvalidParameter("tolerance must be positive")


def covered_count_range(
    lower: float, upper: float, n_star: int
) -> tuple[int, int] | None:
    """Integer counts in [0, n_star] covered by the real limits.

    Returns the inclusive pair (smallest integer >= max(lower, 0),
    largest integer <= min(upper, n_star)), or None when no integer
    falls between the limits.
    """
    lo = max(float(lower), 0.0)
    hi = min(float(upper), float(n_star))
    lo_int = math.ceil(lo - INTEGER_SNAP)
    hi_int = math.floor(hi + INTEGER_SNAP)
    if lo_int > hi_int:
        return None
    return (lo_int, hi_int)


@dataclass(frozen=True)
class IntervalResult:
    """Historical control limits [lower, upper] for one method."""

    lower: float
    upper: float
    covered_range: tuple[int, int] | None
    method: Method
    n_star: int
    alpha: float | None = None
    calibration: CalibrationReport | None = None

    def __post_init__(self) -> None:
        if self.lower > self.upper + INTEGER_SNAP:
            raise InvalidParameter(
                f"lower limit {self.lower} exceeds upper limit {self.upper}"
            )
        if self.covered_range is not None:
            lo, hi = self.covered_range
            if lo > hi or lo < 0 or hi > self.n_star:
                raise InvalidParameter(f"covered range {self.covered_range} invalid")

    @classmethod
    def from_limits(
        cls,
        lower: float,
        upper: float,
        *,
        method: Method,
        n_star: int,
        alpha: float | None = None,
        calibration: CalibrationReport | None = None,
    ) -> "IntervalResult":
        """Build a result, deriving the covered integer range."""
        return cls(
            lower=float(lower),
            upper=float(upper),
            covered_range=covered_count_range(lower, upper, n_star),
            method=method,
            n_star=int(n_star),
            alpha=alpha,
            calibration=calibration,
        )

    @property
    def width(self) -> float:
        return self.upper - self.lower


def validate_hcd(rows: Iterable[Sequence[float]]) -> HistoricalData:
    """Validate raw (y, n) rows from user input.

    Enforces the external schema: non-negative integer counts with
    y <= n and n >= 1.  Fractional counts are reserved for the internal
    degenerate-data adjustment and rejected here.
    """
    rows = list(rows)
    if not rows:
        raise EmptyData("no historical studies supplied")
    clean: list[tuple[float, float]] = []
    for i, row in enumerate(rows):
        try:
            y, n = float(row[0]), float(row[1])
        except (TypeError, ValueError, IndexError) as exc:
            raise InvalidParameter(f"row {i}: expected numeric (y, n), got {row!r}") from exc
        if math.isnan(y) or math.isnan(n):
            raise InvalidParameter(f"row {i}: NaN count")
        if y < 0 or n < 0:
            raise NegativeCount(f"row {i}: y={y}, n={n}")
        if not (float(y).is_integer() and float(n).is_integer()):
            raise InvalidParameter(
                f"row {i}: counts must be integers, got y={y}, n={n}"
            )
        if n < 1:
            raise InvalidParameter(f"row {i}: cluster size must be >= 1, got {n}")
        if y > n:
            raise SuccessExceedsTotal(f"row {i}: y={y} > n={n}")
        clean.append((y, n))
    return HistoricalData(tuple(clean))


def read_hcd_csv(path: str | Path) -> HistoricalData:
    """Read a historical-control CSV with header ``study_id,y,n``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyData(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise InvalidParameter(
                f"{path}: expected header {','.join(CSV_HEADER)}, got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not field.strip() for field in row):
                continue
            if len(row) != 3:
                raise InvalidParameter(f"{path}:{lineno}: expected 3 columns")
            try:
                rows.append((int(row[1]), int(row[2])))
            except ValueError as exc:
                raise InvalidParameter(
                    f"{path}:{lineno}: y and n must be integers, got {row[1]!r}, {row[2]!r}"
                ) from exc
    return validate_hcd(rows)


def write_hcd_csv(
    hcd: HistoricalData, path: str | Path, study_ids: Sequence[str] | None = None
) -> None:
    """Write historical data in the CSV schema (integer data only)."""
    if study_ids is None:
        study_ids = [f"s{i + 1}" for i in range(hcd.h)]
    if len(study_ids) != hcd.h:
        raise InvalidParameter("study_ids length does not match study count")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for sid, (y, n) in zip(study_ids, hcd.studies):
            if not (y.is_integer() and n.is_integer()):
                raise InvalidParameter(
                    "CSV schema carries integer counts only; "
                    f"got fractional study ({y}, {n})"
                )
            writer.writerow([sid, int(y), int(n)])
