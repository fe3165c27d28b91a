"""Optional figure rendering for reports.

Everything here is presentation only: the numeric modules never import
matplotlib, and these helpers are reached solely through the command
line ``--figures`` options and the ``plot`` subcommand.  Files are
rendered headlessly (Agg) next to the delimited output they illustrate.
"""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping

from .data_model import HistoricalData, IntervalResult


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def limits_figure(
    results: Mapping[str, IntervalResult],
    hcd: HistoricalData,
    out_path: str | Path,
) -> Path:
    """Horizontal interval plot of every computed limit pair.

    The historical counts are overlaid as dots so the limits can be read
    against the data that produced them.
    """
    plt = _pyplot()
    out_path = Path(out_path)
    names = list(results)
    fig, ax = plt.subplots(figsize=(7.0, 0.6 * len(names) + 1.6))
    for i, name in enumerate(names):
        interval = results[name]
        ax.plot([interval.lower, interval.upper], [i, i], lw=2.5, color="C0")
        ax.plot(
            [interval.lower, interval.upper], [i, i], "|", ms=12, color="C0"
        )
    ax.plot(
        hcd.ys,
        [-1.0] * hcd.h,
        "o",
        color="C3",
        alpha=0.6,
        label="historical counts",
    )
    ax.set_yticks([-1.0] + list(range(len(names))))
    ax.set_yticklabels(["data"] + names)
    ax.set_xlabel("count")
    ax.set_title("Historical control limits")
    ax.legend(loc="lower right", frameon=False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def coverage_figures(
    rows: Iterable[Mapping[str, object]],
    out_dir: str | Path,
    metric: str = "psi_cp",
    nominal: float = 0.95,
) -> list[Path]:
    """One coverage figure per method: panels by pi, lines by phi.

    ``rows`` is the parsed simulation CSV; returns the written paths.
    """
    plt = _pyplot()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_method: dict[str, list[Mapping[str, object]]] = defaultdict(list)
    for row in rows:
        by_method[str(row["method"])].append(row)

    written: list[Path] = []
    for method, method_rows in sorted(by_method.items()):
        pis = sorted({float(r["pi"]) for r in method_rows})
        phis = sorted({float(r["phi"]) for r in method_rows})
        fig, axes = plt.subplots(
            1, len(pis), figsize=(3.2 * len(pis), 3.2), sharey=True, squeeze=False
        )
        for ax, pi in zip(axes[0], pis):
            for phi in phis:
                pts = sorted(
                    (
                        (float(r["H"]), float(r[metric]))
                        for r in method_rows
                        if float(r["pi"]) == pi and float(r["phi"]) == phi
                    ),
                )
                if not pts:
                    continue
                ax.plot(*zip(*pts), marker="o", ms=3, label=f"phi={phi:g}")
            ax.axhline(nominal, color="grey", lw=0.8, ls="--")
            ax.set_title(f"pi={pi:g}")
            ax.set_xlabel("historical studies")
            ax.set_xscale("log")
        axes[0][0].set_ylabel(metric)
        axes[0][-1].legend(fontsize=7, frameon=False)
        fig.suptitle(f"{method}: {metric}")
        fig.tight_layout()
        path = out_dir / f"coverage_{method.replace('-', '_')}_{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
