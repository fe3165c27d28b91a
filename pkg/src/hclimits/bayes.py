"""Posterior-predictive intervals from two Bayesian models.

Hierarchical beta-binomial: per-study probabilities pi_h follow a Beta
prior in mean-precision form (shape1 = mu kappa, shape2 = (1-mu) kappa)
with mu ~ Uniform(0, 1) and kappa ~ Gamma(shape, rate).  The sampler
alternates exact conjugate Gibbs draws of every pi_h with adaptive
random-walk Metropolis updates of (logit mu, log kappa).

Logit-normal GLMM: counts are binomial with logit probabilities
eta_h = nu + beta_h, beta_h ~ N(0, sigma), nu ~ N(0, 10^2) and
sigma ~ Half-N(0, 5^2); sampled by adaptive random-walk
Metropolis-within-Gibbs over (nu, log sigma, beta_1..beta_H).

Both fits draw one future count per retained MCMC sample and report the
nearest-rank quantile interval of those draws.  Convergence is policed
with split-chain R-hat and effective sample size on the hyperparameters;
failures raise :class:`~hclimits.errors.NonConvergence`, never pass
silently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, expit, logit

from .data_model import FutureDesign, HistoricalData, IntervalResult, Method
from .errors import EmptyDraws, InvalidParameter, NonConvergence, TooFewStudies
from .estimators import estimate_betabinomial

#: Effective-sample-size floor below which a fit is not trusted.
MIN_ESS = 100.0

#: Acceptance-rate band targeted by step-size adaptation during warmup.
TARGET_ACCEPTANCE = (0.3, 0.5)

#: Iterations per adaptation window during warmup.
ADAPT_WINDOW = 50


@dataclass(frozen=True)
class McmcConfig:
    """Sampler configuration.

    Total retained draws C = chains * samples_per_chain (default 5000).
    The kappa prior is a mandatory knob: the default Ga(2, 5e-5) suits
    the large-cluster simulation regime, while small-cluster data such
    as the bundled mortality fixture needs the flatter Ga(2, 5e-3) to
    converge.
    """

    chains: int = 4
    warmup: int = 1000
    samples_per_chain: int = 1250
    kappa_prior: tuple[float, float] = (2.0, 5e-5)
    rhat_threshold: float = 1.05
    seed: int = 0
    thin: int = 8
    mh_sweeps: int = 2

    def __post_init__(self) -> None:
        if self.chains < 2:
            raise InvalidParameter("R-hat needs at least 2 chains")
        if self.warmup < 1 or self.samples_per_chain < 1:
            raise InvalidParameter("warmup and samples_per_chain must be >= 1")
        if self.thin < 1 or self.mh_sweeps < 1:
            raise InvalidParameter("thin and mh_sweeps must be >= 1")
        shape, rate = self.kappa_prior
        if shape <= 0 or rate <= 0:
            raise InvalidParameter("kappa prior shape and rate must be positive")
        if self.rhat_threshold <= 0:
            raise InvalidParameter("rhat_threshold must be positive")

    @property
    def total_samples(self) -> int:
        return self.chains * self.samples_per_chain


class _StepSize:
    """Scalar random-walk step with windowed warmup adaptation."""

    def __init__(self, scale: float = 0.5):
        self.scale = scale
        self._accepted = 0
        self._tried = 0

    def track(self, accepted: float) -> None:
        self._accepted += accepted
        self._tried += 1
        if self._tried >= ADAPT_WINDOW:
            rate = self._accepted / self._tried
            if rate < TARGET_ACCEPTANCE[0]:
                self.scale = max(self.scale * 0.7, 1e-3)
            elif rate > TARGET_ACCEPTANCE[1]:
                self.scale = min(self.scale * 1.4, 50.0)
            self._accepted = 0
            self._tried = 0


def split_rhat(chains: np.ndarray) -> float:
    """Split-chain potential scale reduction factor.

    Parameters
    ----------
    chains : (M, N) array
        One row per chain of retained draws.
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InvalidParameter("split_rhat needs a (chains, draws) array with >= 2 chains")
    n = x.shape[1]
    half = n // 2
    if half < 2:
        raise InvalidParameter("chains too short to split")
    parts = np.concatenate([x[:, :half], x[:, n - half:]], axis=0)
    w = parts.var(axis=1, ddof=1).mean()
    b = half * parts.mean(axis=1).var(ddof=1)
    if w <= 0:
        return 1.0
    var_plus = (half - 1) / half * w + b / half
    return float(np.sqrt(var_plus / w))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    n = x.size
    xc = x - x.mean()
    f = np.fft.rfft(xc, 2 * n)
    return np.fft.irfft(f * np.conj(f))[:n] / n


def effective_sample_size(chains: np.ndarray) -> float:
    """Autocorrelation-based ESS with Geyer initial-monotone truncation."""
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2:
        raise InvalidParameter("effective_sample_size needs a (chains, draws) array")
    m, n = x.shape
    if n < 4:
        raise InvalidParameter("chains too short for autocorrelation estimates")
    acov = np.stack([_autocovariance(row) for row in x])
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    var_plus = w * (n - 1) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return float(m * n)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer: sum consecutive pairs, stop at the first non-positive pair,
    # and force the pair sums to be non-increasing.
    tau = -1.0
    prev_pair = np.inf
    for k in range(0, n - 1, 2):
        pair = rho[k] + (rho[k + 1] if k + 1 < n else 0.0)
        if pair <= 0:
            break
        pair = min(pair, prev_pair)
        tau += 2.0 * pair
        prev_pair = pair
    tau = max(tau, 1.0 / np.log10(n + 10))
    return float(m * n / tau)


def empirical_quantile_interval(
    draws: "np.typing.ArrayLike",
    alpha: float,
    *,
    method: Method = Method.BAYES_HBB,
    n_star: int | None = None,
) -> IntervalResult:
    """Nearest-rank quantile interval of predictive count draws.

    Uses the order statistics at ranks ceil(C alpha/2) and
    ceil(C (1 - alpha/2)); no interpolation, so the limits are always
    realized draws.
    """
    draws = np.sort(np.asarray(draws, dtype=float))
    c = draws.size
    if c == 0:
        raise EmptyDraws("cannot take quantiles of zero predictive draws")
    if not 0 < alpha < 1:
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha}")
    lo_rank = min(max(math.ceil(c * alpha / 2.0), 1), c)
    hi_rank = min(max(math.ceil(c * (1.0 - alpha / 2.0)), 1), c)
    lower, upper = float(draws[lo_rank - 1]), float(draws[hi_rank - 1])
    if n_star is None:
        n_star = int(math.ceil(draws[-1]))
    return IntervalResult.from_limits(
        lower, upper, method=method, n_star=n_star, alpha=alpha
    )


# ---------------------------------------------------------------------------
# Hierarchical beta-binomial


def _gibbs_beta_params(
    mu: float, kappa: float, ys: np.ndarray, ns: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Conjugate conditional of each pi_h given (mu, kappa) and the data."""
    return mu * kappa + ys, (1.0 - mu) * kappa + (ns - ys)


def _sample_pis(
    gen: np.random.Generator, mu: float, kappa: float, ys: np.ndarray, ns: np.ndarray
) -> np.ndarray:
    a, b = _gibbs_beta_params(mu, kappa, ys, ns)
    return np.clip(gen.beta(a, b), 1e-290, 1.0 - 1e-16)


def _bb_predictive(
    mu: np.ndarray, kappa: np.ndarray, n_star: int, gen: np.random.Generator
) -> np.ndarray:
    p = gen.beta(mu * kappa, (1.0 - mu) * kappa)
    return gen.binomial(n_star, p)


def _run_chain_bb(
    rng_gen: np.random.Generator,
    ys: np.ndarray,
    ns: np.ndarray,
    config: McmcConfig,
    mu0: float,
    kappa0: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One chain; returns retained (mu, kappa) draws."""
    shape_k, rate_k = config.kappa_prior
    h = ys.size
    u = float(np.clip(logit(mu0), -30.0, 30.0))
    v = float(np.log(kappa0))
    step_u, step_v = _StepSize(), _StepSize()
    keep = config.samples_per_chain
    mu_out = np.empty(keep)
    kappa_out = np.empty(keep)

    def logpost(u_: float, v_: float, slp: float, slq: float) -> float:
        # expit saturates for |u_| > ~37; the -inf log prior rejects those
        mu_ = float(expit(u_))
        if mu_ <= 0.0 or mu_ >= 1.0:
            return -np.inf
        kappa_ = math.exp(v_)
        if not math.isfinite(kappa_):
            return -np.inf
        am, bm = mu_ * kappa_, (1.0 - mu_) * kappa_
        ll = (am - 1.0) * slp + (bm - 1.0) * slq - h * betaln(am, bm)
        prior = shape_k * v_ - rate_k * kappa_ + math.log(mu_) + math.log1p(-mu_)
        return float(ll + prior)

    for it in range(config.warmup + keep * config.thin):
        mu = float(expit(u))
        kappa = math.exp(v)
        pis = _sample_pis(rng_gen, mu, kappa, ys, ns)
        slp = float(np.log(pis).sum())
        slq = float(np.log1p(-pis).sum())

        current = logpost(u, v, slp, slq)
        for _ in range(config.mh_sweeps):
            prop = u + step_u.scale * rng_gen.standard_normal()
            cand = logpost(prop, v, slp, slq)
            accept = math.log(rng_gen.random()) < cand - current
            if accept:
                u, current = prop, cand
            prop = v + step_v.scale * rng_gen.standard_normal()
            cand = logpost(u, prop, slp, slq)
            accept_v = math.log(rng_gen.random()) < cand - current
            if accept_v:
                v, current = prop, cand
            if it < config.warmup:
                step_u.track(float(accept))
                step_v.track(float(accept_v))
        kept = it - config.warmup
        if kept >= 0 and kept % config.thin == config.thin - 1:
            idx = kept // config.thin
            mu_out[idx] = expit(u)
            kappa_out[idx] = math.exp(v)
    return mu_out, kappa_out


def _initial_rho(hcd: HistoricalData) -> float:
    try:
        return float(estimate_betabinomial(hcd).rho_hat)
    except TooFewStudies:
        return 0.01


def _check_convergence(config: McmcConfig, **monitored: np.ndarray) -> dict[str, float]:
    diagnostics: dict[str, float] = {}
    problems = []
    for name, chains in monitored.items():
        rhat = split_rhat(chains)
        ess = effective_sample_size(chains)
        diagnostics[f"rhat_{name}"] = rhat
        diagnostics[f"ess_{name}"] = ess
        if rhat > config.rhat_threshold:
            problems.append(f"{name}: R-hat {rhat:.4f} > {config.rhat_threshold}")
        if ess < MIN_ESS:
            problems.append(f"{name}: ESS {ess:.1f} < {MIN_ESS:.0f}")
    if problems:
        raise NonConvergence("; ".join(problems))
    return diagnostics


def fit_hierarchical_bb(
    hcd: HistoricalData, design: FutureDesign, config: McmcConfig = McmcConfig()
) -> IntervalResult:
    """Posterior-predictive interval under the hierarchical beta-binomial."""
    from .samplers import RngStream

    ys, ns = hcd.ys, hcd.ns
    pooled = (hcd.sum_y + 0.5) / (hcd.sum_n + 1.0)
    rho0 = min(max(_initial_rho(hcd), 1e-4), 0.5)
    root = RngStream(config.seed).child(1)

    mu_chains = np.empty((config.chains, config.samples_per_chain))
    kappa_chains = np.empty_like(mu_chains)
    for c in range(config.chains):
        gen = root.child(c).generator()
        mu0 = float(expit(logit(pooled) + 0.5 * gen.standard_normal()))
        kappa0 = float(np.clip((1.0 / rho0 - 1.0) * math.exp(0.5 * gen.standard_normal()), 2.0, 1e6))
        mu_chains[c], kappa_chains[c] = _run_chain_bb(gen, ys, ns, config, mu0, kappa0)

    _check_convergence(config, mu=mu_chains, kappa=kappa_chains)
    pred_gen = root.child(10_000).generator()
    draws = _bb_predictive(
        mu_chains.ravel(), kappa_chains.ravel(), design.n_star, pred_gen
    )
    return empirical_quantile_interval(
        draws, design.alpha, method=Method.BAYES_HBB, n_star=design.n_star
    )


# ---------------------------------------------------------------------------
# Logit-normal GLMM

#: Prior scales: nu ~ N(0, NU_PRIOR_SD^2), sigma ~ Half-N(0, SIGMA_PRIOR_SD^2).
NU_PRIOR_SD = 10.0
SIGMA_PRIOR_SD = 5.0


def _binomial_loglik(eta: np.ndarray, ys: np.ndarray, ns: np.ndarray) -> np.ndarray:
    return ys * eta - ns * np.logaddexp(0.0, eta)


def _glmm_predictive(
    nu: np.ndarray, sigma: np.ndarray, n_star: int, gen: np.random.Generator
) -> np.ndarray:
    beta_star = sigma * gen.standard_normal(nu.size)
    p = expit(nu + beta_star)
    return gen.binomial(n_star, p)


def _run_chain_glmm(
    rng_gen: np.random.Generator,
    ys: np.ndarray,
    ns: np.ndarray,
    config: McmcConfig,
    nu0: float,
    log_sigma0: float,
) -> tuple[np.ndarray, np.ndarray]:
    """One chain; returns retained (nu, sigma) draws."""
    h = ys.size
    nu = nu0
    v = log_sigma0
    betas = 0.1 * rng_gen.standard_normal(h)
    step_nu, step_v, step_b = _StepSize(0.3), _StepSize(0.5), _StepSize(0.3)
    step_shift = _StepSize(0.3)
    keep = config.samples_per_chain
    nu_out = np.empty(keep)
    sigma_out = np.empty(keep)

    for it in range(config.warmup + keep * config.thin):
        for _ in range(config.mh_sweeps):
            sigma2 = math.exp(2.0 * v)
            # conditionally independent random effects: vectorized per-site MH
            prop_b = betas + step_b.scale * rng_gen.standard_normal(h)
            delta = (
                _binomial_loglik(nu + prop_b, ys, ns)
                - _binomial_loglik(nu + betas, ys, ns)
                + (betas**2 - prop_b**2) / (2.0 * sigma2)
            )
            accept_b = np.log(rng_gen.random(h)) < delta
            betas = np.where(accept_b, prop_b, betas)

            prop = nu + step_nu.scale * rng_gen.standard_normal()
            delta_nu = float(
                _binomial_loglik(prop + betas, ys, ns).sum()
                - _binomial_loglik(nu + betas, ys, ns).sum()
                + (nu**2 - prop**2) / (2.0 * NU_PRIOR_SD**2)
            )
            accept_nu = math.log(rng_gen.random()) < delta_nu
            if accept_nu:
                nu = prop

            sum_b2 = float((betas**2).sum())

            def log_target_v(v_: float) -> float:
                # -H v - sum b^2 / (2 e^{2v}) - e^{2v} / (2 SD^2) + v (Jacobian)
                return (
                    -h * v_
                    - 0.5 * sum_b2 * math.exp(-2.0 * v_)
                    - math.exp(2.0 * v_) / (2.0 * SIGMA_PRIOR_SD**2)
                    + v_
                )

            prop = v + step_v.scale * rng_gen.standard_normal()
            accept_val = log_target_v(prop) - log_target_v(v)
            accept_v = math.log(rng_gen.random()) < accept_val
            if accept_v:
                v = prop
            if it < config.warmup:
                step_b.track(float(accept_b.mean()))
                step_nu.track(float(accept_nu))
                step_v.track(float(accept_v))

        # joint recentering: nu + d, betas - d leaves the likelihood
        # unchanged, so only the priors enter the ratio; this breaks the
        # random walk along the nu-plus-mean(beta) ridge
        d = step_shift.scale * rng_gen.standard_normal()
        sigma2 = math.exp(2.0 * v)
        shifted = betas - d
        delta_shift = (
            (nu**2 - (nu + d) ** 2) / (2.0 * NU_PRIOR_SD**2)
            + float((betas**2).sum() - (shifted**2).sum()) / (2.0 * sigma2)
        )
        accept_shift = math.log(rng_gen.random()) < delta_shift
        if accept_shift:
            nu += d
            betas = shifted

        if it < config.warmup:
            step_shift.track(float(accept_shift))
        kept = it - config.warmup
        if kept >= 0 and kept % config.thin == config.thin - 1:
            idx = kept // config.thin
            nu_out[idx] = nu
            sigma_out[idx] = math.exp(v)
    return nu_out, sigma_out


def fit_glmm(
    hcd: HistoricalData, design: FutureDesign, config: McmcConfig = McmcConfig()
) -> IntervalResult:
    """Posterior-predictive interval under the logit-normal GLMM."""
    from .samplers import RngStream

    ys, ns = hcd.ys, hcd.ns
    pooled = (hcd.sum_y + 0.5) / (hcd.sum_n + 1.0)
    root = RngStream(config.seed).child(2)

    nu_chains = np.empty((config.chains, config.samples_per_chain))
    sigma_chains = np.empty_like(nu_chains)
    for c in range(config.chains):
        gen = root.child(c).generator()
        nu0 = float(logit(pooled) + 0.3 * gen.standard_normal())
        log_sigma0 = float(math.log(0.3) + 0.5 * gen.standard_normal())
        nu_chains[c], sigma_chains[c] = _run_chain_glmm(
            gen, ys, ns, config, nu0, log_sigma0
        )

    _check_convergence(config, nu=nu_chains, sigma=sigma_chains)
    pred_gen = root.child(10_000).generator()
    draws = _glmm_predictive(
        nu_chains.ravel(), sigma_chains.ravel(), design.n_star, pred_gen
    )
    return empirical_quantile_interval(
        draws, design.alpha, method=Method.BAYES_GLMM, n_star=design.n_star
    )
