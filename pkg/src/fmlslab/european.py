"""Closed-form European put pricing and the one-period valuation propagator.

The put value in reduced coordinates is

    V = K e^{-gamma tau} I0(d1) - e^{x - tau} Itheta(d1),

where I0 integrates the transition density above the cutoff d1 and Itheta
integrates it with the exponential weight e^{-theta m}, theta = tau^(1/alpha).
At alpha = 2 this collapses to the Black-Scholes formula, which is kept
here as an independent reference implementation.

``propagate`` applies the same transition kernel to an arbitrary contract
sampled on a uniform log-price grid: it is the single backward-induction
step that the exercise engine iterates.  Contracts declare
exponential-affine extensions (a + b e^x) on each side of the grid so the
non-local integral can be completed in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import fftconvolve
from scipy.stats import norm

from .density import (
    DensityTable,
    exp_weighted_integral,
    get_table,
    tail_integral,
)
from .errors import ContractSupportError, DomainError
from .model import (
    ModelParams,
    OptionSpec,
    convexity_adjustment,
    d1 as _d1,
    payoff_put,
    to_reduced,
)

# ---------------------------------------------------------------------------
# closed form
# ---------------------------------------------------------------------------


def price_put(S, t: float, params: ModelParams, spec: OptionSpec,
              table: DensityTable | None = None):
    """European put value at time ``t`` for spot(s) ``S``.

    Accepts a scalar or an array of spots; at ``t = expiry`` returns the
    raw payoff.
    """
    S_arr = np.asarray(S, dtype=float)
    if np.any(S_arr <= 0.0):
        raise DomainError("spot prices must be positive")
    coords = to_reduced(t, params, spec)
    if coords.tau == 0.0:
        return payoff_put(S, spec.strike)
    if table is None:
        table = get_table(params.alpha)
    x = np.log(S_arr)
    cut = _d1(x, spec.strike, coords, params.alpha)
    i0 = tail_integral(cut, table)
    ith = exp_weighted_integral(cut, coords.theta, table)
    out = (spec.strike * math.exp(-coords.gamma * coords.tau) * i0
           - np.exp(x - coords.tau) * ith)
    return float(out) if np.isscalar(S) or S_arr.ndim == 0 else out


def bs_put_reference(S: float, K: float, r: float, sigma_bs: float, ttm: float) -> float:
    """Classical Black-Scholes put, the alpha = 2 benchmark."""
    if S <= 0.0 or K <= 0.0 or sigma_bs < 0.0 or ttm < 0.0:
        raise DomainError("bs_put_reference requires positive S, K and non-negative sigma, ttm")
    if ttm == 0.0:
        return max(K - S, 0.0)
    if sigma_bs == 0.0:
        return max(K * math.exp(-r * ttm) - S, 0.0)
    sq = sigma_bs * math.sqrt(ttm)
    dp = (math.log(S / K) + (r + 0.5 * sigma_bs**2) * ttm) / sq
    dm = dp - sq
    return K * math.exp(-r * ttm) * norm.cdf(-dm) - S * norm.cdf(-dp)


# ---------------------------------------------------------------------------
# one-period propagator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpAffine:
    """Extension of a grid function by a + b * e^x."""

    a: float
    b: float

    def eval(self, x: np.ndarray) -> np.ndarray:
        return self.a + self.b * np.exp(x)


@dataclass
class GridContract:
    """A contract value function sampled on a uniform log-price grid.

    ``lower`` extends it below the first node, ``upper`` above the last
    node; ``upper`` may be an ``ExpAffine``, an arbitrary callable of x,
    or ``None`` when the kernel provably never reads there.
    """

    x0: float
    h: float
    values: np.ndarray
    lower: ExpAffine
    upper: ExpAffine | Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.h <= 0.0 or self.values.ndim != 1 or len(self.values) < 8:
            raise DomainError("grid contract needs h > 0 and at least 8 nodes")

    @property
    def x_top(self) -> float:
        return self.x0 + (len(self.values) - 1) * self.h


def _cr_weights(s: np.ndarray) -> tuple[np.ndarray, ...]:
    # Catmull-Rom stencil for a read at fractional offset s in [0, 1)
    s2 = s * s
    s3 = s2 * s
    return (
        0.5 * (-s3 + 2.0 * s2 - s),
        0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
        0.5 * (-3.0 * s3 + 4.0 * s2 + s),
        0.5 * (s3 - s2),
    )


def _build_kernel(table: DensityTable, theta: float, shift: float, h: float,
                  m_hi: float) -> tuple[np.ndarray, int]:
    """Quadrature of the transition kernel folded onto grid-read stencils.

    Returns ``(taps, l_min)`` such that sum_l taps[l] * C(x - (l_min+l)*h)
    approximates int f(m) C(x - shift - theta*m) dm over m up to ``m_hi``.
    """
    ht = table.step
    i0 = int(round((table.support_left - table.left_cut) / ht))
    m_in = table.abscissae[i0:]
    f_in = table.values[i0:]
    if m_hi > table.right_cut:
        n_ext = int(math.ceil((m_hi - table.right_cut) / ht))
        m_ext = table.right_cut + ht * np.arange(1, n_ext + 1)
        f_ext = (table.tail_a1 * m_ext ** (-table.alpha - 1.0)
                 + table.tail_a2 * m_ext ** (-2.0 * table.alpha - 1.0))
        m_q = np.concatenate([m_in, m_ext])
        f_q = np.concatenate([f_in, f_ext])
    else:
        keep = m_in <= m_hi + 0.5 * ht
        m_q = m_in[keep]
        f_q = f_in[keep]
    w_q = np.full(len(m_q), ht)
    w_q[0] *= 0.5
    w_q[-1] *= 0.5
    w_q *= f_q

    pos = (shift + theta * m_q) / h
    n_q = np.floor(pos).astype(int)
    s_q = pos - n_q
    l_min = int(n_q.min()) - 1
    length = int(n_q.max()) + 2 - l_min + 1
    taps = np.zeros(length)
    for off, cw in zip((-1, 0, 1, 2), _cr_weights(s_q)):
        taps += np.bincount(n_q + off - l_min, weights=w_q * cw, minlength=length)
    return taps, l_min


class StepKernel:
    """One-period transition kernel bound to a fixed grid layout.

    Building the quadrature taps is the expensive part of a propagation
    step, and it depends only on (params, dt, grid geometry) — so backward
    inductions construct one ``StepKernel`` per refinement level and call
    :meth:`apply` once per time step.
    """

    def __init__(self, params: ModelParams, dt: float, x0: float, h: float,
                 n: int, table: DensityTable | None = None):
        if dt <= 0.0:
            raise DomainError(f"dt must be positive, got {dt}")
        if h <= 0.0 or n < 8:
            raise DomainError("kernel grid needs h > 0 and at least 8 nodes")
        if table is None:
            table = get_table(params.alpha)
        nu = convexity_adjustment(params.alpha, params.sigma)
        tau_d = nu * dt
        self.theta = tau_d ** (1.0 / params.alpha)
        self.shift = tau_d - params.rate * dt
        self.x0, self.h, self.n = x0, h, n
        self.x = x0 + h * np.arange(n)
        x_top = x0 + (n - 1) * h

        # the quadrature covers m in [support_left, m_hi]; beyond m_hi every
        # read lands below the grid, where the lower extension is exact
        self.m_hi = max(50.0, (x_top - x0 + 0.25 - self.shift) / self.theta)
        self.taps, self.l_min = _build_kernel(table, self.theta, self.shift, h, self.m_hi)
        l_max = self.l_min + len(self.taps) - 1
        self.pad_left = max(l_max, 0)
        self.pad_right = max(-self.l_min, 0)

        self.t_hi = tail_integral(self.m_hi, table)
        self.e_hi = exp_weighted_integral(self.m_hi, self.theta, table)
        self._exp_down = np.exp(self.x - self.shift)
        self.discount = math.exp(-params.rate * dt)

    def apply(self, values: np.ndarray,
              lower: ExpAffine,
              upper: ExpAffine | Callable[[np.ndarray], np.ndarray] | None) -> np.ndarray:
        """Discounted one-period expectation of a grid function.

        ``values`` must be sampled on this kernel's grid; ``lower`` and
        ``upper`` extend it beyond the ends exactly as in ``GridContract``.
        """
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n,):
            raise DomainError("values do not match the kernel's grid")
        parts = []
        if self.pad_left:
            xl = self.x0 + self.h * np.arange(-self.pad_left, 0)
            parts.append(lower.eval(xl))
        parts.append(values)
        if self.pad_right:
            if upper is None:
                raise ContractSupportError(
                    "propagation reads above the grid; declare an upper extension"
                )
            xr = self.x[-1] + self.h * np.arange(1, self.pad_right + 1)
            parts.append(upper.eval(xr) if isinstance(upper, ExpAffine) else
                         np.asarray(upper(xr), dtype=float))
        padded = np.concatenate(parts)

        if len(self.taps) <= 256:
            conv = np.convolve(padded, self.taps)
        else:
            conv = fftconvolve(padded, self.taps)
        start = self.pad_left - self.l_min
        out = conv[start : start + self.n].copy()

        # closed-form completion below the quadrature window (deep crashes),
        # where the contract equals its lower extension a + b e^x.  Mass to
        # the left of support_left is zero at table accuracy, so no
        # completion is needed on that side.
        out += lower.a * self.t_hi + lower.b * self._exp_down * self.e_hi
        out *= self.discount
        return out


def propagate(contract: GridContract, dt: float, params: ModelParams,
              table: DensityTable | None = None) -> np.ndarray:
    """One-period valuation: discounted expectation of the contract after a
    single transition of length ``dt``, returned on the contract's grid.

    Linear and monotone in the contract; maps e^x to e^x and constants c
    to c * e^{-r dt} (both within table accuracy) when the matching
    extensions are declared.  For repeated steps on one grid build a
    ``StepKernel`` once and call ``apply``.
    """
    kernel = StepKernel(params, dt, contract.x0, contract.h,
                        len(contract.values), table)
    return kernel.apply(contract.values, contract.lower, contract.upper)
