"""Monte Carlo cross-check of the stable log-price dynamics.

Everything here is deliberately independent of the density table and the
transform pricer: terminal draws come from the classical two-uniform
trigonometric transform for skewed stable laws, so agreement between a
simulated put price and the closed form is evidence for both sides.

The simulated variate M follows the same convention as
:func:`fmlslab.density.density`: characteristic data exp((ik)^alpha),
heavy right tail, all exponential moments E[exp(-theta*M)] finite and
equal to exp(theta^alpha).  Terminal log-prices are

    x_T = ln S + (r - nu) * T - (nu * T)^(1/alpha) * M

which makes the discounted underlying a martingale exactly (the
exponential-moment identity cancels the convexity adjustment nu * T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DomainError
from .model import ModelParams, OptionSpec, _check_alpha, convexity_adjustment

__all__ = [
    "MCConfig",
    "MCEstimate",
    "MartingaleReport",
    "sample_stable",
    "mc_european_put",
    "martingale_check",
]

# Paths generated per seed-derived substream.  Blocks are independent
# given the block index, so a draw stream's prefix does not depend on the
# total path count and memory stays bounded for large runs.
_BLOCK = 1 << 19

# Uniforms are clipped one half-ulp away from {0, 1} before the
# trigonometric transform; both endpoints map to non-finite draws
# (log(0), division by an exact zero) and each occurs with probability
# 2^-53 per draw, so the clip is bias-free at double precision.
_U_EPS = 2.0 ** -53


@dataclass(frozen=True)
class MCConfig:
    """Simulation settings: path count, seed, and optional antithetics."""

    n_paths: int
    seed: int
    antithetic: bool = False

    def __post_init__(self):
        if not isinstance(self.n_paths, int) or isinstance(self.n_paths, bool):
            raise ConfigurationError(
                f"n_paths must be an integer, got {self.n_paths!r}")
        if self.n_paths < 1:
            raise ConfigurationError(
                f"n_paths must be at least 1, got {self.n_paths}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigurationError(f"seed must be an integer, got {self.seed!r}")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigurationError(
                f"seed must fit in 64 bits, got {self.seed}")
        if self.antithetic and self.n_paths % 2:
            raise ConfigurationError(
                "antithetic sampling pairs the draws; n_paths must be even, "
                f"got {self.n_paths}")


class MCEstimate(NamedTuple):
    """A simulated price with its sample standard error."""

    price: float
    std_error: float


class MartingaleReport(NamedTuple):
    """Outcome of the discounted-martingale check.

    ``relative_error`` is |e^(-rT) * mean(S_T) / S_0 - 1|; the check
    passes when it is below three standard errors of the estimator.
    """

    relative_error: float
    std_error: float
    passed: bool


def _stable_from_uniforms(alpha: float, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Map uniform pairs to stable draws in the exp((ik)^alpha) convention.

    The angle variable is V = pi * (u1 - 1/2) and the exponential clock is
    W = -log(1 - u2).  At alpha = 2 the transform collapses to the exact
    Box-Muller-like form 2 sin(V) sqrt(W), a Gaussian with variance 2.
    """
    u1 = np.clip(u1, _U_EPS, 1.0 - _U_EPS)
    u2 = np.clip(u2, _U_EPS, 1.0 - _U_EPS)
    v = np.pi * (u1 - 0.5)
    w = -np.log1p(-u2)
    if alpha == 2.0:
        return 2.0 * np.sin(v) * np.sqrt(w)
    # Totally skewed case.  tan(pi*alpha/2) < 0 on (1,2); the shift b and
    # the prefactor come from the standard one-parameter form, and the
    # final scale (-cos(pi*alpha/2))^(1/alpha) converts unit scale to the
    # exp((ik)^alpha) convention (heavy tail on the right).
    half = 0.5 * math.pi * alpha
    t = math.tan(half)
    b = math.atan(t) / alpha
    prefactor = (1.0 + t * t) ** (0.5 / alpha)
    arg = alpha * (v + b)
    draws = (prefactor * np.sin(arg)
             * np.cos(v) ** (-1.0 / alpha)
             * (np.cos(v - arg) / w) ** ((1.0 - alpha) / alpha))
    return (-math.cos(half)) ** (1.0 / alpha) * draws


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng([seed, block])


def _iter_draw_blocks(alpha, config: MCConfig):
    """Yield stable-draw blocks; with antithetics, arrays of mirrored pairs.

    Yields ``(draws, anti)`` where ``anti`` is None for plain sampling and
    the mirrored-uniform partner array otherwise.  Block boundaries depend
    only on the seed and block index, never on the total path count.
    """
    n = config.n_paths
    per_block = _BLOCK
    if config.antithetic:
        n //= 2  # uniform pairs, each yielding two paths
        per_block //= 2
    done = 0
    block = 0
    while done < n:
        nb = min(per_block, n - done)
        rng = _block_rng(config.seed, block)
        # Interleaved pairs: each path consumes two consecutive generator
        # outputs, so a short stream is a prefix of a longer one.
        u = rng.random(2 * nb)
        u1 = u[0::2]
        u2 = u[1::2]
        draws = _stable_from_uniforms(alpha, u1, u2)
        if config.antithetic:
            anti = _stable_from_uniforms(alpha, 1.0 - u1, 1.0 - u2)
            yield draws, anti
        else:
            yield draws, None
        done += nb
        block += 1


def sample_stable(alpha: float, n: int, seed: int) -> np.ndarray:
    """Return ``n`` i.i.d. draws from the stable law f(., alpha).

    The output convention matches the density table: heavy right tail
    ~ m^(-alpha-1), thin left tail, E[exp(-theta*M)] = exp(theta^alpha).
    At alpha = 2 the draws are exactly Gaussian with mean 0, variance 2.
    Identical (n, seed) reproduce the stream bit for bit, and a stream is
    a prefix of any longer stream with the same seed.
    """
    _check_alpha(alpha)
    config = MCConfig(n_paths=n, seed=seed)
    parts = [draws for draws, _ in _iter_draw_blocks(alpha, config)]
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def _mean_and_stderr(block_stats: list[tuple[float, float, int]]) -> tuple[float, float]:
    """Combine per-block (sum, sum of squares, count) into mean and stderr.

    Cross-block reduction uses exactly rounded summation, so the result
    does not depend on block evaluation order.
    """
    count = sum(nb for _, _, nb in block_stats)
    total = math.fsum(s for s, _, _ in block_stats)
    total_sq = math.fsum(q for _, q, _ in block_stats)
    mean = total / count
    if count < 2:
        return mean, math.inf
    var = max(total_sq - count * mean * mean, 0.0) / (count - 1)
    return mean, math.sqrt(var / count)


def _simulate_mean(alpha: float, config: MCConfig, func) -> tuple[float, float]:
    """Mean and standard error of ``func(draws)`` over the configured paths.

    With antithetics the per-pair averages are treated as the i.i.d.
    samples, which keeps the standard error honest in the presence of
    pair correlation.
    """
    stats = []
    for draws, anti in _iter_draw_blocks(alpha, config):
        vals = func(draws)
        if anti is not None:
            vals = 0.5 * (vals + func(anti))
        stats.append((float(np.sum(vals)), float(np.sum(vals * vals)), vals.size))
    return _mean_and_stderr(stats)


def mc_european_put(S: float, params: ModelParams, spec: OptionSpec,
                    config: MCConfig) -> MCEstimate:
    """Simulated European put price at spot ``S`` with its standard error.

    Terminal log-prices are x_T = ln S + (r - nu) T - (nu T)^(1/alpha) M;
    the estimate is the discounted mean payoff.  The payoff is bounded by
    the strike, so the heavy tail costs variance but not validity.
    """
    if S <= 0.0:
        raise DomainError(f"spot must be positive, got {S}")
    horizon = spec.expiry
    nu = convexity_adjustment(params.alpha, params.sigma)
    drift = (params.rate - nu) * horizon
    theta = (nu * horizon) ** (1.0 / params.alpha)
    log_spot = math.log(S)
    strike = spec.strike
    discount = math.exp(-params.rate * horizon)

    def discounted_payoff(draws):
        s_T = np.exp(log_spot + drift - theta * draws)
        return discount * np.maximum(strike - s_T, 0.0)

    mean, stderr = _simulate_mean(params.alpha, config, discounted_payoff)
    return MCEstimate(price=mean, std_error=stderr)


def martingale_check(params: ModelParams, config: MCConfig,
                     horizon: float = 1.0, *,
                     drop_adjustment: bool = False) -> MartingaleReport:
    """Verify e^(-rT) E[S_T] = S_0 by simulation.

    The estimand is scale-free, so S_0 = 1 without loss of generality.
    ``drop_adjustment`` runs the negative control: the convexity
    adjustment nu is left out of the drift, which biases the discounted
    mean to exp(nu * T) and must make the check fail loudly.
    """
    if horizon <= 0.0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    nu = convexity_adjustment(params.alpha, params.sigma)
    theta = (nu * horizon) ** (1.0 / params.alpha)
    # Discounted growth e^{-rT} S_T / S_0; the r terms cancel up front.
    drift = 0.0 if drop_adjustment else -nu * horizon

    def discounted_growth(draws):
        return np.exp(drift - theta * draws)

    mean, stderr = _simulate_mean(params.alpha, config, discounted_growth)
    rel = abs(mean - 1.0)
    return MartingaleReport(relative_error=rel, std_error=stderr,
                            passed=rel < 3.0 * stderr)
