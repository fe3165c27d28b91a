"""Exception taxonomy shared across the package.

Every error raised by this package derives from :class:`HclError`, so
callers (and the CLI) can map any failure to a stable category name.
"""


class HclError(Exception):
    """Base class for all domain errors raised by this package."""

    @property
    def category(self) -> str:
        """Stable machine-readable category label."""
        return type(self).__name__


class NegativeCount(HclError):
    """A count or cluster size is negative."""


class SuccessExceedsTotal(HclError):
    """An event count exceeds its cluster size."""


class EmptyData(HclError):
    """No historical studies were supplied."""


class TooFewStudies(HclError):
    """The operation needs more studies than the data provides."""


class DegenerateProportion(HclError):
    """The pooled proportion is 0 or 1, so variance formulas collapse."""


class DegenerateAllZero(DegenerateProportion):
    """Every study has zero events."""


class DegenerateAllOne(DegenerateProportion):
    """Every study has events in all units."""


class NotDegenerate(HclError):
    """The degenerate-data adjustment was requested for regular data."""


class UnequalClusterSizes(HclError):
    """The method is only interpretable for a constant cluster size."""


class InvalidParameter(HclError):
    """A parameter lies outside its documented domain."""


class CalibrationNotConverged(HclError):
    """Bisection could not place the bootstrap tail coverage inside the
    tolerance band within the bracket and iteration caps."""


class BootstrapDegenerate(HclError):
    """Too many bootstrap replicates were unestimable to trust the
    calibration."""


class NonConvergence(HclError):
    """MCMC diagnostics (split R-hat, effective sample size) failed."""


class EmptyDraws(HclError):
    """An empirical quantile was requested from zero draws."""
