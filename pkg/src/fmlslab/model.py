"""Model parameters and coordinate transforms for the log-stable put market.

The asset's log-price is driven by a maximally skewed stable process with
tail index ``alpha`` in (1, 2].  All pricing formulas in this package work
in reduced coordinates: the convexity adjustment ``nu`` (the drift
correction that keeps the discounted asset a martingale), the relative
rate ``gamma = r / nu``, and the reduced time ``tau = nu * (T - t)``.
At ``alpha = 2`` the model degenerates to the usual lognormal market with
volatility ``sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# Below this gap from the singular point alpha = 1 the secant factor
# overflows any sensible scale; treat it as out of domain.
_ALPHA_FLOOR = 1.0 + 1e-9


def _check_alpha(alpha: float) -> None:
    if not (1.0 < alpha <= 2.0):
        raise DomainError(f"tail index must lie in (1, 2], got {alpha}")
    if alpha < _ALPHA_FLOOR:
        raise DomainError(
            f"tail index {alpha} is too close to the singular point 1 "
            "(secant factor overflows)"
        )


@dataclass(frozen=True)
class ModelParams:
    """Market/model inputs: tail index, scale, rate, and the fixed skew."""

    alpha: float
    sigma: float
    rate: float
    skew: int = -1

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.sigma <= 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.rate < 0.0:
            raise DomainError(f"rate must be non-negative, got {self.rate}")
        if self.skew != -1:
            raise DomainError("only the maximally skewed case skew = -1 is supported")


@dataclass(frozen=True)
class OptionSpec:
    """Contract terms for a vanilla put: strike, expiry, payoff kind."""

    strike: float
    expiry: float
    payoff_kind: str = "put"

    def __post_init__(self):
        if self.strike <= 0.0:
            raise DomainError(f"strike must be positive, got {self.strike}")
        if self.expiry <= 0.0:
            raise DomainError(f"expiry must be positive, got {self.expiry}")
        if self.payoff_kind != "put":
            raise DomainError(f"unsupported payoff kind {self.payoff_kind!r}")


@dataclass(frozen=True)
class ReducedCoords:
    """Reduced pricing coordinates (nu, gamma, tau) for one valuation date.

    Also remembers the tail index so the scale theta = tau^(1/alpha) used
    by the integral formulas is available without re-deriving it.
    """

    nu: float
    gamma: float
    tau: float
    alpha: float

    @property
    def theta(self) -> float:
        return self.tau ** (1.0 / self.alpha) if self.tau > 0.0 else 0.0


def convexity_adjustment(alpha: float, sigma: float) -> float:
    """Drift correction nu = -sigma^alpha * sec(alpha*pi/2) / 2 (> 0).

    At alpha = 2 this is exactly sigma^2 / 2.
    """
    _check_alpha(alpha)
    if sigma <= 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if alpha == 2.0:
        return 0.5 * sigma * sigma
    return -0.5 * sigma**alpha / math.cos(0.5 * math.pi * alpha)


def drift_adjustment(alpha: float, sigma: float) -> float:
    """The raw (negative) drift quantity sigma^alpha * sec(alpha*pi/2).

    Equal to -2 * convexity_adjustment; exposed for callers that want the
    log-price drift written as rate minus this adjustment's half, etc.
    """
    return -2.0 * convexity_adjustment(alpha, sigma)


def to_reduced(t: float, params: ModelParams, spec: OptionSpec) -> ReducedCoords:
    """Reduced coordinates at valuation time ``t`` (0 <= t <= expiry).

    Guarantees gamma * tau == rate * (T - t) up to rounding, independent
    of alpha.
    """
    if t < 0.0 or t > spec.expiry:
        raise DomainError(f"valuation time {t} outside [0, {spec.expiry}]")
    nu = convexity_adjustment(params.alpha, params.sigma)
    ttm = spec.expiry - t
    tau = nu * ttm
    gamma = params.rate / nu
    return ReducedCoords(nu=nu, gamma=gamma, tau=tau, alpha=params.alpha)


def payoff_put(S, K: float):
    """Vanilla put payoff max(K - S, 0); works on scalars and arrays."""
    if K <= 0.0:
        raise DomainError(f"strike must be positive, got {K}")
    S_arr = np.asarray(S, dtype=float)
    if np.any(S_arr < 0.0):
        raise DomainError("negative underlying price in payoff evaluation")
    out = np.maximum(K - S_arr, 0.0)
    return float(out) if np.isscalar(S) or S_arr.ndim == 0 else out


def d1(x, strike: float, coords: ReducedCoords, alpha: float):
    """Integration cutoff d1 = (x - ln K - (1 - gamma) tau) / tau^(1/alpha).

    Requires tau > 0; at expiry callers must branch to the raw payoff.
    """
    if coords.tau <= 0.0:
        raise DomainError("d1 undefined at tau = 0; use the terminal payoff")
    theta = coords.tau ** (1.0 / alpha)
    out = (np.asarray(x, dtype=float) - math.log(strike)
           - (1.0 - coords.gamma) * coords.tau) / theta
    return float(out) if out.ndim == 0 else out


def nu_matched_sigma(alpha: float, sigma_bs: float) -> float:
    """Scale sigma(alpha) whose convexity adjustment equals sigma_bs^2 / 2.

    Useful when a sweep over alpha should keep the reduced coordinates
    (nu, gamma, tau) fixed at their alpha = 2 values.  Note that holding
    sigma itself fixed across alpha is a different normalization; the
    monotonicity scans in this package use the fixed-sigma convention.
    """
    _check_alpha(alpha)
    if sigma_bs <= 0.0:
        raise DomainError(f"sigma_bs must be positive, got {sigma_bs}")
    nu_target = 0.5 * sigma_bs * sigma_bs
    if alpha == 2.0:
        return sigma_bs
    return (2.0 * nu_target * (-math.cos(0.5 * math.pi * alpha))) ** (1.0 / alpha)
