"""Command line interface.

Three subcommands:

``compute``
    Read a historical-control CSV, compute limits with the selected
    method(s), and emit a human table and optionally a versioned JSON
    report and a rendered figure.

``simulate``
    Run the Monte-Carlo coverage harness over a named grid, a filtered
    subset, or a custom TOML grid file, emitting the delimited summary
    (and optionally coverage figures).

``plot``
    Render coverage figures from a previously written simulation CSV.

Every run logs the input digest, the full flag set, the seed, and the
package version to stderr, which is enough to reproduce any output
byte for byte.  Failures from library code exit with status 1 and a
machine-readable ``error[Category]: message`` line on stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .bayes import McmcConfig, fit_glmm, fit_hierarchical_bb
from .data_model import FutureDesign, HistoricalData, IntervalResult, Method, read_hcd_csv
from .errors import HclError, InvalidParameter, UnequalClusterSizes
from .estimators import ensure_estimable, estimate_betabinomial, estimate_quasibinomial
from .heuristics import historical_range, mean_k_sd, np_chart
from .prediction import (
    bb_pi_calibrated,
    bb_pi_uncalibrated,
    qb_pi_calibrated,
    qb_pi_uncalibrated,
)
from .samplers import RngStream
from .simulation import (
    METHOD_ORDER,
    SimulationSetting,
    filter_settings,
    grid_ltc,
    grid_mnt,
    read_simulation_csv,
    rows_for_csv,
    run_setting,
    with_methods,
    write_simulation_csv,
)

logger = logging.getLogger("hclimits")

#: JSON report schema version; bump on any breaking change to the layout.
SCHEMA_VERSION = 1

#: The report methods behind ``--method all``.
ALL_METHODS = (
    Method.HIST_RANGE,
    Method.NP_CHART,
    Method.MEAN_SD,
    Method.QB_CAL,
    Method.BB_CAL,
    Method.BAYES_HBB,
    Method.BAYES_GLMM,
)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _log_run(args: argparse.Namespace, digest: str | None) -> None:
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    logger.info("version %s", __version__)
    if digest is not None:
        logger.info("input sha256 %s", digest)
    logger.info("flags %s", json.dumps(flags, sort_keys=True, default=str))
    if "seed" in flags:
        logger.info("seed %s", flags["seed"])


def _parse_methods(raw: str) -> list[Method]:
    if raw.strip().lower() == "all":
        return list(ALL_METHODS)
    methods = []
    for tag in raw.split(","):
        tag = tag.strip()
        if not tag:
            continue
        try:
            methods.append(Method(tag))
        except ValueError:
            valid = ", ".join(m.value for m in Method)
            raise InvalidParameter(f"unknown method {tag!r}; valid: {valid}")
    if not methods:
        raise InvalidParameter("no methods selected")
    return [m for m in METHOD_ORDER if m in set(methods)]


def _mcmc_config(args: argparse.Namespace, seed: int) -> McmcConfig:
    return McmcConfig(
        chains=args.chains,
        warmup=args.warmup,
        samples_per_chain=args.samples,
        kappa_prior=(args.kappa_shape, args.kappa_rate),
        seed=seed,
    )


def _compute_one(
    method: Method,
    hcd: HistoricalData,
    design: FutureDesign,
    args: argparse.Namespace,
    rng: RngStream,
) -> tuple[IntervalResult, object | None]:
    """Interval plus the parameter estimates used, when meaningful."""
    if method is Method.HIST_RANGE:
        return historical_range(hcd), None
    if method is Method.MEAN_SD:
        return mean_k_sd(hcd, k=args.k), None
    if method is Method.NP_CHART:
        data, _ = ensure_estimable(hcd)
        return np_chart(data, design.n_star, k=args.k), None
    if method in (Method.QB, Method.QB_CAL):
        estimates = estimate_quasibinomial(hcd)
    elif method in (Method.BB, Method.BB_CAL):
        estimates = estimate_betabinomial(hcd)
    else:
        config = _mcmc_config(args, rng.to_seed())
        fit = fit_hierarchical_bb if method is Method.BAYES_HBB else fit_glmm
        return fit(hcd, design, config), None
    if method in (Method.QB, Method.BB):
        sum_n = hcd.sum_n - 0.5 if estimates.zero_adjusted else hcd.sum_n
        compute = qb_pi_uncalibrated if method is Method.QB else bb_pi_uncalibrated
        return compute(estimates, design, sum_n), estimates
    compute = qb_pi_calibrated if method is Method.QB_CAL else bb_pi_calibrated
    result = compute(hcd, design, B=args.B, t=args.tolerance, rng=rng)
    return result, estimates


def _estimates_payload(estimates) -> dict | None:
    if estimates is None:
        return None
    return {
        "pi_hat": estimates.pi_hat,
        "phi_hat": estimates.phi_hat,
        "rho_hat": estimates.rho_hat,
        "clamped_phi": estimates.clamped_phi,
        "clamped_rho": estimates.clamped_rho,
        "zero_adjusted": estimates.zero_adjusted,
    }


def _calibration_payload(report) -> dict | None:
    if report is None:
        return None
    return {
        "q_lower": report.q_lower,
        "q_upper": report.q_upper,
        "achieved_psi_lower": report.achieved_psi_lower,
        "achieved_psi_upper": report.achieved_psi_upper,
        "bootstrap_B": report.bootstrap_B,
        "iterations_lower": report.iterations_lower,
        "iterations_upper": report.iterations_upper,
        "tolerance": report.tolerance,
    }


def _covered_text(result: IntervalResult) -> str:
    if result.covered_range is None:
        return "empty"
    lo, hi = result.covered_range
    return f"[{lo}, {hi}]"


def cmd_compute(args: argparse.Namespace) -> int:
    path = Path(args.input)
    hcd = read_hcd_csv(path)
    _log_run(args, _sha256(path))

    if args.n_future is not None:
        n_star = args.n_future
    elif hcd.constant_n:
        n_star = int(hcd.ns[0])
    else:
        raise UnequalClusterSizes(
            "--n-future is required when historical cluster sizes differ"
        )
    design = FutureDesign(n_star=n_star, alpha=args.alpha)
    methods = _parse_methods(args.method)
    root = RngStream(args.seed)

    records = []
    for method in methods:
        stream = root.child(list(METHOD_ORDER).index(method))
        result, estimates = _compute_one(method, hcd, design, args, stream)
        records.append(
            {
                "method": method.value,
                "lower": result.lower,
                "upper": result.upper,
                "covered_range": list(result.covered_range)
                if result.covered_range
                else None,
                "n_star": result.n_star,
                "alpha": result.alpha,
                "estimates": _estimates_payload(estimates),
                "calibration": _calibration_payload(result.calibration),
            }
        )

    lines = [f"{'method':<12} {'lower':>9} {'upper':>9}  covered"]
    for rec in records:
        covered = (
            f"[{rec['covered_range'][0]}, {rec['covered_range'][1]}]"
            if rec["covered_range"]
            else "empty"
        )
        lines.append(
            f"{rec['method']:<12} {rec['lower']:>9.3f} {rec['upper']:>9.3f}  {covered}"
        )
    table = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(table)
    else:
        sys.stdout.write(table)

    if args.json:
        report = {
            "schema_version": SCHEMA_VERSION,
            "input": {"path": str(path), "sha256": _sha256(path), "studies": hcd.h},
            "n_star": n_star,
            "alpha": args.alpha,
            "seed": args.seed,
            "results": records,
        }
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n")

    if args.figures:
        from .figures import limits_figure

        out_dir = Path(args.figures)
        out_dir.mkdir(parents=True, exist_ok=True)
        intervals = {
            rec["method"]: IntervalResult.from_limits(
                rec["lower"],
                rec["upper"],
                method=Method(rec["method"]),
                n_star=n_star,
                alpha=args.alpha,
            )
            for rec in records
        }
        written = limits_figure(intervals, hcd, out_dir / "limits.png")
        logger.info("figure %s", written)
    return 0


def _settings_from_toml(path: Path) -> list[SimulationSetting]:
    with open(path, "rb") as handle:
        doc = tomllib.load(handle)
    entries = doc.get("setting")
    if not entries:
        raise InvalidParameter(f"{path} defines no [[setting]] tables")
    settings = []
    for i, entry in enumerate(entries, start=1):
        entry = dict(entry)
        kappa = (
            float(entry.pop("kappa_shape", 2.0)),
            float(entry.pop("kappa_rate", 5e-5)),
        )
        methods = entry.pop("methods", None)
        kwargs = {
            "setting_id": str(entry.pop("id", f"custom-{i:03d}")),
            "h": int(entry.pop("H")),
            "pi": float(entry.pop("pi")),
            "phi": float(entry.pop("phi")),
            "n_h": int(entry.pop("n_h")),
            "n_star": int(entry.pop("n_star")),
            "kappa_prior": kappa,
        }
        for key, cast in (
            ("S", int),
            ("alpha", float),
            ("B", int),
            ("tolerance", float),
            ("seed", int),
        ):
            if key in entry:
                value = cast(entry.pop(key))
                field = {"S": "replicates", "B": "bootstrap_b"}.get(key, key)
                kwargs[field] = value
        if entry:
            raise InvalidParameter(
                f"unknown keys in [[setting]] table: {sorted(entry)}"
            )
        if methods is not None:
            kwargs["methods"] = frozenset(Method(m) for m in methods)
        settings.append(SimulationSetting(**kwargs))
    return settings


def cmd_simulate(args: argparse.Namespace) -> int:
    _log_run(args, _sha256(Path(args.grid_file)) if args.grid_file else None)
    if args.grid_file:
        settings = _settings_from_toml(Path(args.grid_file))
    elif args.grid == "mnt":
        settings = grid_mnt()
    elif args.grid == "ltc":
        settings = grid_ltc()
    else:
        raise InvalidParameter("either --grid mnt|ltc or --grid-file is required")

    if args.filter:
        settings = filter_settings(settings, args.filter)
        if not settings:
            raise InvalidParameter(f"filter {args.filter!r} matched no settings")
    if args.methods:
        settings = with_methods(settings, _parse_methods(args.methods))
    overrides = {}
    if args.S is not None:
        overrides["replicates"] = args.S
    if args.B is not None:
        overrides["bootstrap_b"] = args.B
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.tolerance is not None:
        overrides["tolerance"] = args.tolerance
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.kappa_shape is not None or args.kappa_rate is not None:
        shape = args.kappa_shape if args.kappa_shape is not None else 2.0
        rate = args.kappa_rate if args.kappa_rate is not None else 5e-5
        overrides["kappa_prior"] = (shape, rate)
    if overrides:
        settings = [replace(s, **overrides) for s in settings]

    rows = []
    for setting in settings:
        logger.info("running %s", setting.setting_id)
        summaries = run_setting(setting, jobs=args.jobs)
        rows.extend(rows_for_csv(setting, summaries))

    if args.out and args.out != "-":
        write_simulation_csv(args.out, rows)
        logger.info("wrote %d rows to %s", len(rows), args.out)
    else:
        import csv as _csv

        writer = _csv.DictWriter(
            sys.stdout, fieldnames=list(rows[0].keys()) if rows else []
        )
        if rows:
            writer.writeheader()
            for row in rows:
                writer.writerow(row)

    if args.figures:
        from .figures import coverage_figures

        written = coverage_figures(rows, args.figures)
        for path in written:
            logger.info("figure %s", path)
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    path = Path(args.results)
    _log_run(args, _sha256(path))
    rows = read_simulation_csv(path)
    from .figures import coverage_figures

    written = coverage_figures(
        rows, args.out_dir, metric=args.metric, nominal=args.nominal
    )
    for out in written:
        logger.info("figure %s", out)
    sys.stdout.write("\n".join(str(p) for p in written) + "\n")
    return 0


def _add_mcmc_flags(parser: argparse.ArgumentParser, kappa_rate_default: float) -> None:
    parser.add_argument("--chains", type=int, default=4, help="MCMC chains")
    parser.add_argument("--warmup", type=int, default=1000, help="burn-in per chain")
    parser.add_argument(
        "--samples", type=int, default=1250, help="retained draws per chain"
    )
    parser.add_argument(
        "--kappa-shape", type=float, default=2.0, help="precision prior shape"
    )
    parser.add_argument(
        "--kappa-rate",
        type=float,
        default=kappa_rate_default,
        help="precision prior rate (flatter values suit small clusters)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hclimits",
        description="Historical control limits for overdispersed binomial counts.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    compute = sub.add_parser("compute", help="limits for one dataset")
    compute.add_argument("--input", required=True, help="historical data CSV")
    compute.add_argument(
        "--method",
        default="all",
        help="comma list of methods, or 'all' for the report set",
    )
    compute.add_argument("--alpha", type=float, default=0.05)
    compute.add_argument(
        "--n-future", type=int, default=None, help="future cluster size"
    )
    compute.add_argument("--B", type=int, default=10000, help="bootstrap replicates")
    compute.add_argument(
        "--tolerance", type=float, default=0.001, help="calibration tail tolerance"
    )
    compute.add_argument("--k", type=float, default=2.0, help="heuristic multiplier")
    compute.add_argument("--seed", type=int, default=0)
    compute.add_argument("--out", default=None, help="write the table here")
    compute.add_argument("--json", default=None, help="write a JSON report here")
    compute.add_argument("--figures", default=None, help="render figures into DIR")
    _add_mcmc_flags(compute, kappa_rate_default=5e-3)
    compute.set_defaults(func=cmd_compute)

    simulate = sub.add_parser("simulate", help="coverage experiments")
    simulate.add_argument("--grid", choices=("mnt", "ltc"), default=None)
    simulate.add_argument("--grid-file", default=None, help="custom TOML grid")
    simulate.add_argument(
        "--filter", default=None, help="e.g. H=100,phi=500 to subset the grid"
    )
    simulate.add_argument("--methods", default=None, help="comma list of methods")
    simulate.add_argument("--S", type=int, default=None, help="replicates per setting")
    simulate.add_argument("--B", type=int, default=None, help="bootstrap replicates")
    simulate.add_argument("--alpha", type=float, default=None)
    simulate.add_argument("--tolerance", type=float, default=None)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument(
        "--jobs", type=int, default=None, help="parallel workers (env HCLIMITS_JOBS)"
    )
    simulate.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    simulate.add_argument("--figures", default=None, help="render figures into DIR")
    simulate.add_argument("--kappa-shape", type=float, default=None)
    simulate.add_argument("--kappa-rate", type=float, default=None)
    simulate.set_defaults(func=cmd_simulate)

    plot = sub.add_parser("plot", help="figures from a simulation CSV")
    plot.add_argument("--results", required=True, help="simulation CSV path")
    plot.add_argument("--out-dir", required=True)
    plot.add_argument(
        "--metric", default="psi_cp", choices=("psi_cp", "psi_l", "psi_u")
    )
    plot.add_argument("--nominal", type=float, default=0.95)
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HclError as err:
        sys.stderr.write(f"error[{err.category}]: {err}\n")
        return 1
    except FileNotFoundError as err:
        sys.stderr.write(f"error[FileNotFound]: {err}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
