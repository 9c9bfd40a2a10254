"""Discrete left-sided fractional derivative and the pricing-equation residual.

The pricing equation for the put value V(x, t) in log-price x reads

    V_t + (r - nu) V_x + nu D_x^alpha V - r V = 0,

where D_x^alpha is the left-sided fractional derivative of order
alpha in (1, 2] and nu is the convexity adjustment.  e^x is an
eigenfunction with eigenvalue 1, so the equation prices the underlying
itself for free: (r - nu) + nu - r = 0.  At alpha = 2 the operator is the
ordinary second derivative and the equation collapses to Black-Scholes.

Discretization is the shifted first-order difference: at node x the
stencil taps x + h, x, x - h, ... with binomial weights, which at
alpha = 2 reduces exactly to the three-point second difference.  The
stencil reaches arbitrarily far LEFT, so a grid is only half the story;
every grid carries an analytic left extension supplying values on
(-inf, x_min).  For affine-exponential extensions a + b e^x (payoffs,
bonds, deep-in-the-money asymptotes) the infinite part of the sum has a
closed form via the binomial generating function, so no truncation error
enters at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigurationError, ContractSupportError, DomainError
from .european import ExpAffine, price_put
from .model import ModelParams, OptionSpec, _check_alpha, convexity_adjustment

__all__ = [
    "FracGrid",
    "gl_weights",
    "apply_frac_derivative",
    "fpde_residual",
    "european_residual",
    "dump_residual_csv",
]

# How far below x_min a callable extension is sampled before the remainder
# is completed as a constant.  The completion error is bounded by the
# extension's variation beyond that depth times the (small) weight-tail
# sum, so 60 log-units is far more than any put-like extension needs.
_CALLABLE_DEPTH = 60.0

# Tolerance for the extension/grid continuity precondition at x_min.
_JOIN_TOL = 1e-8


def gl_weights(alpha: float, n_terms: int) -> np.ndarray:
    """First ``n_terms`` binomial weights w_j = (-1)^j C(alpha, j).

    Computed by the stable ratio recurrence w_0 = 1,
    w_j = w_{j-1} (j - 1 - alpha) / j.  For alpha in (1, 2): w_1 = -alpha,
    all later weights are positive and decay like j^(-alpha-1), and the
    full sum telescopes to (1 - 1)^alpha = 0.  At alpha = 2 the sequence
    is exactly (1, -2, 1, 0, 0, ...).
    """
    _check_alpha(alpha)
    if not isinstance(n_terms, int) or isinstance(n_terms, bool) or n_terms < 2:
        raise DomainError(f"n_terms must be an integer >= 2, got {n_terms!r}")
    j = np.arange(1, n_terms, dtype=float)
    return np.concatenate(([1.0], np.cumprod((j - 1.0 - alpha) / j)))


@dataclass(frozen=True)
class FracGrid:
    """Uniform log-price lattice plus the analytic values to its left.

    ``left_extension`` supplies V(x) for x < x_min: an :class:`ExpAffine`
    (evaluated in closed form, no truncation) or any callable (sampled on
    the lattice down to a fixed depth, then completed as a constant).
    ``None`` is allowed only where the stencil never leaves the grid,
    i.e. at alpha = 2 away from the bottom node.
    """

    x_min: float
    x_max: float
    n: int
    left_extension: Union[ExpAffine, Callable, None] = None

    def __post_init__(self):
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 16:
            raise ConfigurationError(f"need at least 16 grid points, got {self.n!r}")
        if not (self.x_max > self.x_min):
            raise ConfigurationError(
                f"empty window: x_min={self.x_min}, x_max={self.x_max}")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    def extension_at(self, x):
        if self.left_extension is None:
            raise ContractSupportError(
                "grid has no left extension but the stencil reaches below "
                f"x_min = {self.x_min}")
        if isinstance(self.left_extension, ExpAffine):
            return self.left_extension.eval(np.asarray(x, dtype=float))
        return np.asarray(self.left_extension(np.asarray(x, dtype=float)),
                          dtype=float)


def _check_join(values: np.ndarray, grid: FracGrid) -> None:
    """Continuity precondition: the extension must meet the grid at x_min."""
    join = float(np.asarray(grid.extension_at(grid.x_min)))
    scale = max(1.0, abs(values[0]))
    if abs(join - values[0]) > _JOIN_TOL * scale:
        raise ConfigurationError(
            f"left extension evaluates to {join} at x_min but the grid "
            f"carries {values[0]}; mismatch exceeds {_JOIN_TOL} relative")


def apply_frac_derivative(values, grid: FracGrid, alpha: float) -> np.ndarray:
    """Discrete D_x^alpha of grid values; first-order accurate.

    Returns an array aligned with ``grid.x``.  The shifted stencil taps
    one node ABOVE each evaluation point, so the top entry cannot be
    formed and is returned as NaN.  With no left extension (alpha = 2
    only), the bottom entry is NaN as well.
    """
    _check_alpha(alpha)
    vals = np.asarray(values, dtype=float)
    if vals.shape != (grid.n,):
        raise DomainError(f"expected {grid.n} values, got shape {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise DomainError("grid values must be finite")
    h = grid.h
    n = grid.n

    if grid.left_extension is None:
        if alpha != 2.0:
            raise ContractSupportError(
                "the fractional stencil reaches below x_min for alpha < 2; "
                "supply a left extension")
        out = np.full(n, np.nan)
        out[1:-1] = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / (h * h)
        return out

    _check_join(vals, grid)

    if isinstance(grid.left_extension, ExpAffine):
        # On-grid convolution plus the exact generating-function tail.
        w = gl_weights(alpha, n + 1)
        conv = (np.convolve(w, vals) if n <= 4096
                else fftconvolve(w, vals))
        core = conv[1:n]  # point i takes on-grid taps j = 0 .. i+1
        a, b = grid.left_extension.a, grid.left_extension.b
        partial = np.cumsum(w)[1:n]          # S_{i+1}
        z = math.exp(-h)
        zpow = w * np.power(z, np.arange(n + 1))
        partial_z = np.cumsum(zpow)[1:n]     # P_{i+1}(z)
        full_z = (-math.expm1(-h)) ** alpha  # (1 - z)^alpha
        x_up = grid.x[:-1] + h
        tail = a * (0.0 - partial) + b * np.exp(x_up) * (full_z - partial_z)
        out = np.full(n, np.nan)
        out[:-1] = (core + tail) / h**alpha
        return out

    # Callable extension: sample it on the lattice below x_min, convolve
    # the padded array, and complete the remainder as a constant.
    depth = int(math.ceil(_CALLABLE_DEPTH / h))
    below = grid.x_min - h * np.arange(depth, 0, -1)
    ext_vals = grid.extension_at(below)
    if not np.all(np.isfinite(ext_vals)):
        raise DomainError("left extension produced non-finite values")
    padded = np.concatenate([ext_vals, vals])
    w = gl_weights(alpha, n + depth + 1)
    conv = (np.convolve(w, padded) if padded.size <= 4096
            else fftconvolve(w, padded))
    core = conv[depth + 1:depth + n]
    far_value = float(ext_vals[0])
    partial = np.cumsum(w)[depth + 1:depth + n]
    out = np.full(n, np.nan)
    out[:-1] = (core + far_value * (0.0 - partial)) / h**alpha
    return out


def fpde_residual(values, time_derivative, grid: FracGrid,
                  params: ModelParams) -> np.ndarray:
    """Pointwise residual V_t + (r - nu) V_x + nu D^alpha V - r V.

    ``values`` and ``time_derivative`` are slices of a value surface on
    ``grid.x`` at one instant.  V_x is the centered difference, using the
    left extension for the tap below the bottom node.  An exact solution
    has residual -> 0 at first order in h; entries the stencils cannot
    form (the top node, and the bottom one without an extension) are NaN.
    """
    vals = np.asarray(values, dtype=float)
    dvdt = np.asarray(time_derivative, dtype=float)
    if vals.shape != (grid.n,) or dvdt.shape != (grid.n,):
        raise DomainError(
            f"expected two arrays of {grid.n} values, got shapes "
            f"{vals.shape} and {dvdt.shape}")
    nu = convexity_adjustment(params.alpha, params.sigma)
    frac = apply_frac_derivative(vals, grid, params.alpha)
    h = grid.h
    slope = np.full(grid.n, np.nan)
    slope[1:-1] = (vals[2:] - vals[:-2]) / (2.0 * h)
    if grid.left_extension is not None:
        under = float(np.asarray(grid.extension_at(grid.x_min - h)))
        slope[0] = (vals[1] - under) / (2.0 * h)
    return dvdt + (params.rate - nu) * slope + nu * frac - params.rate * vals


def dump_residual_csv(x, values, residual, path) -> None:
    """Write columns x, V, residual; rows the stencil could not form are kept
    with empty residual cells rather than dropped, so row count matches the
    grid."""
    import csv

    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    residual = np.asarray(residual, dtype=float)
    if not (x.shape == values.shape == residual.shape):
        raise DomainError("x, values, and residual must have matching shapes")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x", "V", "residual"])
        for xi, vi, ri in zip(x, values, residual):
            writer.writerow([f"{xi:.10g}", f"{vi:.10g}",
                             "" if math.isnan(ri) else f"{ri:.10g}"])


def european_residual(params: ModelParams, spec: OptionSpec, t: float,
                      grid: FracGrid | None = None, n: int = 501,
                      table=None, reduced_step: float = 1e-4) -> tuple[FracGrid, np.ndarray]:
    """Residual of the closed-form European put on a log-price grid.

    Builds the slice at calendar time ``t``, differencing in time over a
    step of ``reduced_step`` in reduced time (calendar step
    ``reduced_step / nu``).  When no grid is given, one spanning
    ln K +/- 5 is used with the deep-in-the-money asymptote
    K e^{-r(T-t)} - e^x as its left extension; that asymptote is exact
    to far below double precision at five log-units under the strike, so
    the non-local tail costs nothing.  Returns ``(grid, residual)``.
    """
    nu = convexity_adjustment(params.alpha, params.sigma)
    dt = reduced_step / nu
    if not (dt < t and t + dt < spec.expiry):
        raise DomainError(
            f"time {t} too close to 0 or expiry for the centered time "
            f"difference (needs clearance {dt:.3g})")
    if grid is None:
        log_k = math.log(spec.strike)
        grid = FracGrid(
            x_min=log_k - 5.0, x_max=log_k + 5.0, n=n,
            left_extension=ExpAffine(
                spec.strike * math.exp(-params.rate * (spec.expiry - t)), -1.0))
    s_nodes = np.exp(grid.x)
    vals = price_put(s_nodes, t, params, spec, table)
    later = price_put(s_nodes, t + dt, params, spec, table)
    earlier = price_put(s_nodes, t - dt, params, spec, table)
    dvdt = (later - earlier) / (2.0 * dt)
    return grid, fpde_residual(vals, dvdt, grid, params)
