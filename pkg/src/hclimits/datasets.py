"""Bundled example data: ten historical control groups of 50 animals each.

Deaths per group in a rodent bioassay control series; the pooled death
proportion is 0.276.  The same rows ship as an installed CSV so the
command line interface has a ready-made input file.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

from .data_model import HistoricalData

MORTALITY_Y = (15, 10, 12, 12, 13, 11, 19, 11, 14, 21)
MORTALITY_N = 50


def mortality_hcd() -> HistoricalData:
    """The bundled mortality series as a validated dataset."""
    return HistoricalData.from_rows((y, MORTALITY_N) for y in MORTALITY_Y)


def mortality_csv_path() -> Path:
    """Filesystem path of the installed copy of the mortality CSV."""
    return Path(resources.files("hclimits").joinpath("data", "mortality.csv"))
