"""Reproducible random generation for beta-binomial processes.

The bootstrap calibration and the coverage harness both draw from the
two-stage process: a per-cluster success probability from a Beta
distribution, then a conditionally binomial count.  Quasi-binomial data
is realized through the same process with a per-cluster intra-class
correlation rho_h = (phi - 1)/(n_h - 1), which reproduces the target
variance n pi (1-pi) phi exactly for each cluster.

Randomness flows through :class:`RngStream`, a counter-based splittable
stream keyed by (seed, stream path).  Identical keys give identical
draws on every platform and under any parallel schedule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import HistoricalData, ParameterEstimates
from .errors import InvalidParameter

#: Beta shapes below this fall back to the two-point Bernoulli(pi)
#: mixture, the distributional limit of Beta(a, b) as a + b -> 0 with
#: a/(a+b) = pi held fixed.
EXTREME_SHAPE = 1e-6
#: Combined beta shape a + b above this (sd of the mixing draw under
#: 3e-8) collapses to the point mass at pi, i.e. a plain binomial.
MAX_SHAPE_TOTAL = 1e15


@dataclass(frozen=True)
class RngStream:
    """Splittable random stream keyed by a seed and a stream path.

    ``child(*ids)`` derives an independent substream; ``generator()``
    returns a fresh counter-based generator positioned at the start of
    the stream, so repeated calls replay the same sequence.
    """

    seed: int
    stream: tuple[int, ...] = ()

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(seq))

    def to_seed(self) -> int:
        """Collapse this stream into one integer (to seed nested components)."""
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return int(seq.generate_state(1, dtype=np.uint64)[0])


def _beta_binomial_counts(
    gen: np.random.Generator,
    pi: float,
    rho: np.ndarray | float,
    sizes: np.ndarray,
) -> np.ndarray:
    """Core two-stage draw with per-entry rho and cluster sizes.

    ``rho`` broadcasts against ``sizes``.  Shapes a = pi (1/rho - 1) and
    b = (1-pi) (1/rho - 1); entries with min(a, b) below the extreme
    threshold use the Bernoulli(pi) limit instead.
    """
    sizes = np.asarray(sizes)
    rho = np.broadcast_to(np.asarray(rho, dtype=float), sizes.shape)
    with np.errstate(divide="ignore", over="ignore"):
        total = np.where(rho > 0.0, 1.0 / rho - 1.0, np.inf)
    # rho = 0, or so small that the mixing distribution is narrower than
    # float resolution around pi: use the plain-binomial limit directly
    binom = (rho <= 0.0) | ~np.isfinite(total) | (total > MAX_SHAPE_TOTAL)
    p = np.empty(sizes.shape, dtype=float)
    p[binom] = pi
    a = pi * total
    b = (1.0 - pi) * total
    extreme = ~binom & (np.minimum(a, b) < EXTREME_SHAPE)
    mid = ~binom & ~extreme
    if extreme.any():
        p[extreme] = (gen.random(int(extreme.sum())) < pi).astype(float)
    if mid.any():
        p[mid] = gen.beta(a[mid], b[mid])
    return gen.binomial(sizes.astype(np.int64), p)


def sample_betabinomial(
    pi: float, rho: float, n: int, count: int, rng: RngStream
) -> np.ndarray:
    """Draw ``count`` beta-binomial counts for clusters of size ``n``.

    The draws have mean n pi and variance n pi (1-pi) [1 + (n-1) rho];
    rho = 0 degenerates to the plain binomial.
    """
    if not 0 < pi < 1:
        raise InvalidParameter(f"pi must lie in (0, 1), got {pi}")
    if not 0 <= rho < 1:
        raise InvalidParameter(f"rho must lie in [0, 1), got {rho}")
    if n < 1 or int(n) != n:
        raise InvalidParameter(f"cluster size must be a positive integer, got {n}")
    if count < 1:
        raise InvalidParameter(f"count must be positive, got {count}")
    gen = rng.generator()
    return _beta_binomial_counts(gen, pi, rho, np.full(count, int(n), dtype=np.int64))


def rho_from_phi(phi: float, n: int) -> float:
    """Intra-class correlation equivalent to dispersion phi at size n:
    rho = (phi - 1) / (n - 1)."""
    if n < 2:
        raise InvalidParameter(f"need cluster size n >= 2, got {n}")
    if phi <= 1:
        raise InvalidParameter(f"need dispersion phi > 1, got {phi}")
    return (phi - 1.0) / (n - 1.0)


def _design_sizes(design: "np.typing.ArrayLike") -> np.ndarray:
    sizes = np.asarray(design, dtype=float)
    if sizes.ndim != 1 or sizes.size == 0:
        raise InvalidParameter("design must be a non-empty list of cluster sizes")
    if (sizes < 1).any() or (sizes != np.round(sizes)).any():
        raise InvalidParameter("design cluster sizes must be positive integers")
    return sizes.astype(np.int64)


def _family_rho(estimates: ParameterEstimates, sizes: np.ndarray) -> np.ndarray:
    """Per-cluster rho implied by the estimates' model family."""
    if estimates.rho_hat is not None:
        rho = np.full(sizes.shape, estimates.rho_hat)
    else:
        if (sizes < 2).any():
            raise InvalidParameter(
                "quasi-binomial sampling needs cluster sizes >= 2 to map phi to rho"
            )
        rho = (estimates.phi_hat - 1.0) / (sizes - 1.0)
    if (rho <= 0).any() or (rho >= 1).any():
        raise InvalidParameter("implied rho left (0, 1); cannot sample")
    return rho


def bootstrap_hcd(
    estimates: ParameterEstimates, design: "np.typing.ArrayLike", rng: RngStream
) -> HistoricalData:
    """One synthetic historical dataset with the design's cluster sizes."""
    sizes = _design_sizes(design)
    counts = bootstrap_hcd_matrix(estimates, sizes, 1, rng)[0]
    return HistoricalData(tuple((float(y), float(n)) for y, n in zip(counts, sizes)))


def bootstrap_hcd_matrix(
    estimates: ParameterEstimates,
    design: "np.typing.ArrayLike",
    count: int,
    rng: RngStream,
) -> np.ndarray:
    """``count`` synthetic historical datasets as a (count, H) matrix."""
    if count < 1:
        raise InvalidParameter(f"count must be positive, got {count}")
    sizes = _design_sizes(design)
    rho_row = _family_rho(estimates, sizes)
    gen = rng.generator()
    sizes_mat = np.broadcast_to(sizes, (int(count), sizes.size))
    rho_mat = np.broadcast_to(rho_row, sizes_mat.shape)
    return _beta_binomial_counts(gen, estimates.pi_hat, rho_mat, sizes_mat)


def bootstrap_future(
    estimates: ParameterEstimates, n_star: int, count: int, rng: RngStream
) -> np.ndarray:
    """``count`` future-group counts from the same fitted process."""
    if count < 1:
        raise InvalidParameter(f"count must be positive, got {count}")
    sizes = _design_sizes([n_star])
    rho = _family_rho(estimates, sizes)[0]
    gen = rng.generator()
    return _beta_binomial_counts(
        gen, estimates.pi_hat, rho, np.full(int(count), sizes[0], dtype=np.int64)
    )
