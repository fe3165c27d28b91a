"""Monte-Carlo coverage harness for historical-control limit methods.

For each parameter setting the harness simulates S historical datasets
together with S future counts from the same beta-binomial process,
computes limits with every requested method, and summarizes how often
the future count falls inside (total and per tail).  Replicates where a
method raises are counted as failures and excluded from that method's
denominators, so a fragile method shows up as both low support and, when
it does run, its honest coverage.

Two ready-made grids mirror common use: a rare-event regime with very
large clusters (72 settings) and a moderate-proportion regime with
clusters of 50 (96 settings).
"""
from __future__ import annotations

import csv
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .bayes import McmcConfig, fit_glmm, fit_hierarchical_bb
from .data_model import FutureDesign, HistoricalData, Method
from .errors import HclError, InvalidParameter
from .estimators import (
    ensure_estimable,
    estimate_betabinomial,
    estimate_quasibinomial,
)
from .heuristics import historical_range, mean_k_sd, np_chart
from .prediction import (
    bb_pi_calibrated,
    bb_pi_uncalibrated,
    qb_pi_calibrated,
    qb_pi_uncalibrated,
)
from .samplers import RngStream, rho_from_phi, sample_betabinomial

#: Canonical emission order for per-method rows.
METHOD_ORDER = (
    Method.HIST_RANGE,
    Method.NP_CHART,
    Method.MEAN_SD,
    Method.QB,
    Method.BB,
    Method.QB_CAL,
    Method.BB_CAL,
    Method.BAYES_HBB,
    Method.BAYES_GLMM,
)

DEFAULT_METHODS = frozenset(
    {
        Method.HIST_RANGE,
        Method.NP_CHART,
        Method.MEAN_SD,
        Method.QB,
        Method.BB,
        Method.QB_CAL,
        Method.BB_CAL,
    }
)

SIMULATION_CSV_HEADER = (
    "setting_id",
    "method",
    "H",
    "pi",
    "phi",
    "n_h",
    "n_star",
    "S",
    "psi_cp",
    "psi_l",
    "psi_u",
    "mean_l",
    "mean_u",
    "failures",
)


@dataclass(frozen=True)
class SimulationSetting:
    """One cell of a coverage experiment."""

    setting_id: str
    h: int
    pi: float
    phi: float
    n_h: int
    n_star: int
    replicates: int = 1000
    alpha: float = 0.05
    methods: frozenset[Method] = DEFAULT_METHODS
    bootstrap_b: int = 2000
    tolerance: float = 0.001
    seed: int = 0
    kappa_prior: tuple[float, float] = (2.0, 5e-5)

    def __post_init__(self) -> None:
        if self.h < 1 or self.n_h < 1 or self.n_star < 1 or self.replicates < 1:
            raise InvalidParameter("counts in a simulation setting must be positive")
        if not 0.0 < self.pi < 1.0:
            raise InvalidParameter(f"pi must lie in (0, 1), got {self.pi}")
        if self.phi < 1.0:
            raise InvalidParameter(f"phi must be >= 1, got {self.phi}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParameter(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.bootstrap_b < 1000:
            raise InvalidParameter(
                f"calibration needs B >= 1000 bootstrap draws, got {self.bootstrap_b}"
            )
        if not 0.0 < self.tolerance < self.alpha / 2.0:
            raise InvalidParameter(
                f"tolerance must lie in (0, alpha/2), got {self.tolerance}"
            )
        object.__setattr__(self, "methods", frozenset(Method(m) for m in self.methods))

    @property
    def rho(self) -> float:
        """Intra-class correlation implied by phi at this cluster size."""
        if self.phi <= 1.0:
            return 0.0
        return rho_from_phi(self.phi, self.n_h)


@dataclass(frozen=True)
class CoverageSummary:
    """Coverage of one method over the estimable replicates of a setting."""

    psi_cp: float
    psi_l: float
    psi_u: float
    mean_lower: float
    mean_upper: float
    failures: int


def _replicate_stream(setting: SimulationSetting) -> RngStream:
    # key streams off a stable digest of the id so that re-running one
    # setting of a grid reproduces exactly the rows of the full run
    return RngStream(setting.seed).child(zlib.crc32(setting.setting_id.encode()))


def _limits_for_method(
    method: Method,
    hcd: HistoricalData,
    setting: SimulationSetting,
    rng: RngStream,
) -> tuple[float, float]:
    design = FutureDesign(n_star=setting.n_star, alpha=setting.alpha)
    if method is Method.HIST_RANGE:
        result = historical_range(hcd)
    elif method is Method.MEAN_SD:
        result = mean_k_sd(hcd, k=2.0)
    elif method is Method.NP_CHART:
        data, _ = ensure_estimable(hcd)
        result = np_chart(data, setting.n_star, k=2.0)
    elif method in (Method.QB, Method.BB):
        if method is Method.QB:
            estimates = estimate_quasibinomial(hcd)
        else:
            estimates = estimate_betabinomial(hcd)
        sum_n = hcd.sum_n - 0.5 if estimates.zero_adjusted else hcd.sum_n
        if method is Method.QB:
            result = qb_pi_uncalibrated(estimates, design, sum_n)
        else:
            result = bb_pi_uncalibrated(estimates, design, sum_n)
    elif method is Method.QB_CAL:
        result = qb_pi_calibrated(
            hcd, design, B=setting.bootstrap_b, t=setting.tolerance, rng=rng
        )
    elif method is Method.BB_CAL:
        result = bb_pi_calibrated(
            hcd, design, B=setting.bootstrap_b, t=setting.tolerance, rng=rng
        )
    elif method in (Method.BAYES_HBB, Method.BAYES_GLMM):
        config = McmcConfig(seed=rng.to_seed(), kappa_prior=setting.kappa_prior)
        fit = fit_hierarchical_bb if method is Method.BAYES_HBB else fit_glmm
        result = fit(hcd, design, config)
    else:  # pragma: no cover - Method is exhaustive
        raise InvalidParameter(f"unknown method {method}")
    return result.lower, result.upper


def _run_replicate(
    setting: SimulationSetting, s: int
) -> tuple[int, dict[Method, tuple[float, float] | None]]:
    """Simulate one replicate: (future count, per-method limits or None)."""
    stream = _replicate_stream(setting).child(s)
    ys = sample_betabinomial(
        setting.pi, setting.rho, setting.n_h, setting.h, stream.child(0)
    )
    hcd = HistoricalData.from_rows((int(y), setting.n_h) for y in ys)
    y_star = int(
        sample_betabinomial(
            setting.pi, setting.rho, setting.n_star, 1, stream.child(1)
        )[0]
    )
    limits: dict[Method, tuple[float, float] | None] = {}
    for k, method in enumerate(METHOD_ORDER):
        if method not in setting.methods:
            continue
        try:
            limits[method] = _limits_for_method(
                method, hcd, setting, stream.child(2, k)
            )
        except HclError:
            limits[method] = None
    return y_star, limits


def _default_jobs() -> int:
    raw = os.environ.get("HCLIMITS_JOBS", "")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def run_setting(
    setting: SimulationSetting, jobs: int | None = None
) -> dict[Method, CoverageSummary]:
    """Coverage summary per requested method.

    Deterministic in (setting, seed) regardless of ``jobs``: every
    replicate derives its own random stream from the setting identity.
    """
    jobs = _default_jobs() if jobs is None else max(int(jobs), 1)
    indices = range(setting.replicates)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(
                pool.map(
                    _run_replicate,
                    [setting] * setting.replicates,
                    indices,
                    chunksize=max(setting.replicates // (8 * jobs), 1),
                )
            )
    else:
        outcomes = [_run_replicate(setting, s) for s in indices]

    y_star = np.array([o[0] for o in outcomes], dtype=float)
    summaries: dict[Method, CoverageSummary] = {}
    for method in METHOD_ORDER:
        if method not in setting.methods:
            continue
        pairs = [o[1][method] for o in outcomes]
        ok = np.array([p is not None for p in pairs])
        failures = int((~ok).sum())
        if not ok.any():
            summaries[method] = CoverageSummary(
                float("nan"), float("nan"), float("nan"),
                float("nan"), float("nan"), failures,
            )
            continue
        lower = np.array([p[0] for p in pairs if p is not None])
        upper = np.array([p[1] for p in pairs if p is not None])
        ys = y_star[ok]
        in_lower = lower <= ys
        in_upper = ys <= upper
        summaries[method] = CoverageSummary(
            psi_cp=float((in_lower & in_upper).mean()),
            psi_l=float(in_lower.mean()),
            psi_u=float(in_upper.mean()),
            mean_lower=float(lower.mean()),
            mean_upper=float(upper.mean()),
            failures=failures,
        )
    return summaries


# ---------------------------------------------------------------------------
# Ready-made grids

MNT_H = (5, 10, 20, 100)
MNT_PI = (0.001, 0.01, 0.1)
MNT_PHI = (1.001, 3.0, 5.0, 10.0, 50.0, 500.0)
MNT_N = 18000

LTC_H = (5, 10, 20, 100)
LTC_PI = (0.01, 0.1, 0.2, 0.3, 0.4, 0.5)
LTC_PHI = (1.001, 1.5, 3.0, 5.0)
LTC_N = 50


def _grid(
    prefix: str,
    hs: Sequence[int],
    pis: Sequence[float],
    phis: Sequence[float],
    n: int,
    **overrides,
) -> list[SimulationSetting]:
    settings = []
    i = 0
    for h in hs:
        for pi in pis:
            for phi in phis:
                i += 1
                settings.append(
                    SimulationSetting(
                        setting_id=f"{prefix}-{i:03d}",
                        h=h,
                        pi=pi,
                        phi=phi,
                        n_h=n,
                        n_star=n,
                        **overrides,
                    )
                )
    return settings


def grid_mnt(**overrides) -> list[SimulationSetting]:
    """Rare-event grid: 72 settings with clusters of 18000."""
    return _grid("mnt", MNT_H, MNT_PI, MNT_PHI, MNT_N, **overrides)


def grid_ltc(**overrides) -> list[SimulationSetting]:
    """Moderate-proportion grid: 96 settings with clusters of 50."""
    return _grid("ltc", LTC_H, LTC_PI, LTC_PHI, LTC_N, **overrides)


def filter_settings(
    settings: Iterable[SimulationSetting], spec: str
) -> list[SimulationSetting]:
    """Keep settings matching comma-separated field=value clauses.

    Example: ``"H=100,phi=500"``.  Fields: H, pi, phi, n_h, n_star.
    """
    fields = {"h": "h", "pi": "pi", "phi": "phi", "n_h": "n_h", "n_star": "n_star"}
    clauses = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise InvalidParameter(f"filter clause {part!r} is not field=value")
        key, _, value = part.partition("=")
        key = key.strip().lower()
        if key not in fields:
            raise InvalidParameter(f"unknown filter field {key!r}")
        clauses.append((fields[key], float(value)))
    return [
        s
        for s in settings
        if all(np.isclose(getattr(s, attr), v) for attr, v in clauses)
    ]


def with_methods(
    settings: Iterable[SimulationSetting], methods: Iterable[Method]
) -> list[SimulationSetting]:
    wanted = frozenset(Method(m) for m in methods)
    return [replace(s, methods=wanted) for s in settings]


def rows_for_csv(
    setting: SimulationSetting, summaries: dict[Method, CoverageSummary]
) -> list[dict[str, object]]:
    rows = []
    for method in METHOD_ORDER:
        if method not in summaries:
            continue
        summary = summaries[method]
        rows.append(
            {
                "setting_id": setting.setting_id,
                "method": method.value,
                "H": setting.h,
                "pi": setting.pi,
                "phi": setting.phi,
                "n_h": setting.n_h,
                "n_star": setting.n_star,
                "S": setting.replicates,
                "psi_cp": f"{summary.psi_cp:.6g}",
                "psi_l": f"{summary.psi_l:.6g}",
                "psi_u": f"{summary.psi_u:.6g}",
                "mean_l": f"{summary.mean_lower:.6g}",
                "mean_u": f"{summary.mean_upper:.6g}",
                "failures": summary.failures,
            }
        )
    return rows


def write_simulation_csv(path, rows: Iterable[dict[str, object]]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=SIMULATION_CSV_HEADER)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_simulation_csv(path) -> list[dict[str, object]]:
    """Read rows written by :func:`write_simulation_csv`, numbers parsed."""
    numeric = ("H", "pi", "phi", "n_h", "n_star", "S",
               "psi_cp", "psi_l", "psi_u", "mean_l", "mean_u", "failures")
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SIMULATION_CSV_HEADER:
            raise InvalidParameter(f"unexpected simulation CSV header in {path}")
        rows: list[dict[str, object]] = []
        for raw in reader:
            row: dict[str, object] = dict(raw)
            for key in numeric:
                row[key] = float(raw[key])
            rows.append(row)
    return rows
