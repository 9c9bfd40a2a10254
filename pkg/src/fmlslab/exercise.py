"""Bermudan backward induction, dyadic refinement toward the American
price, and exercise-boundary extraction with smooth-pasting diagnostics.

A Bermudan put exercisable on the dyadic dates {0, T/2^N, ..., T} is valued
by dynamic programming on a uniform log-price grid centred on the strike.
The terminal slice is the raw payoff; the first backward step uses the
closed-form European price (applying grid quadrature directly to the payoff
kink is the one materially inaccurate step, and the closed form removes it);
every remaining step reuses a single precomputed ``StepKernel``.  Below the
grid the surface equals K - e^x exactly — those nodes are deep in the
exercise region — and above the grid the European value stands in, since
early exercise is worthless far out of the money and upward moves of the
log-price have super-exponentially thin probability.

Doubling the exercise dates can only add value, so the level-N prices
increase monotonically; ``american_price`` escalates N until the top slice
stops moving.  ``extract_boundary`` locates the critical log-price on each
slice and measures how nearly the surface satisfies value matching and
smooth pasting there.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .density import DensityTable, get_table
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    NumericalAccuracyError,
)
from .european import ExpAffine, StepKernel, price_put
from .model import ModelParams, OptionSpec, convexity_adjustment, payoff_put

MAX_LEVEL = 12

# a slice is treated as having a genuine exercise region only if the payoff
# exceeds continuation somewhere by more than this fraction of the strike;
# it screens out floating-point ties (at r = 0 the two are equal to within
# roundoff at every deep-in-the-money node)
_EXERCISE_NOISE = 1e-10

# the closed-form completion below the grid assumes every off-grid node is
# exercised, so the boundary must keep this much clearance above the bottom
_BOUNDARY_CLEARANCE = 0.5

# the European stand-in above the grid omits the early-exercise premium, a
# deficit that stays confined to a thin layer under the top edge (measured
# depth < 0.2 log-units across levels and tail indices); the induction
# therefore runs on a window extended upward by this buffer, which is
# trimmed from the returned surface
_TOP_BUFFER = 0.5


# ---------------------------------------------------------------------------
# grid layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExerciseGrid:
    """Log-price grid request for the backward induction.

    ``width`` is the half-width of the window around ln K; when omitted it
    is sized from the transition scale so that the window comfortably
    contains the exercise boundary and the reporting range.  The strike
    always falls exactly on a grid node.
    """

    width: float | None = None
    step: float = 0.005

    def __post_init__(self):
        if self.step <= 0.0:
            raise ConfigurationError(f"grid step must be positive, got {self.step}")
        if self.width is not None and self.width <= 0.5:
            raise ConfigurationError(
                f"grid half-width must exceed 0.5, got {self.width}"
            )

    def resolve_width(self, params: ModelParams, spec: OptionSpec) -> float:
        if self.width is not None:
            return self.width
        nu = convexity_adjustment(params.alpha, params.sigma)
        horizon_scale = (nu * spec.expiry) ** (1.0 / params.alpha)
        return max(3.0, 6.0 * horizon_scale + 1.2)


# ---------------------------------------------------------------------------
# value surface
# ---------------------------------------------------------------------------


@dataclass
class ValueSurface:
    """Bermudan value surface on a (time, log-price) lattice.

    ``values[i, j]`` is the option value at date ``t[i]`` and log-price
    ``x[j]``; ``continuation[i, j]`` is the discounted expectation of the
    next slice before the exercise comparison (on the terminal slice it is
    defined as the payoff itself).  ``exercise[i, j]`` records where a
    positive payoff is worth at least the continuation value.  Treat
    instances as immutable once returned.
    """

    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    continuation: np.ndarray
    exercise: np.ndarray
    level: int
    params: ModelParams
    spec: OptionSpec
    achieved_increment: float | None = None
    history: tuple = field(default_factory=tuple)

    @property
    def spot_grid(self) -> np.ndarray:
        return np.exp(self.x)

    def value_at(self, S, time_index: int = 0):
        """Option value at spot(s) ``S`` on one time slice.

        Uses 4-point cubic interpolation in log-price, which reproduces
        grid nodes exactly and keeps interpolation error far below the
        scheme's own accuracy.
        """
        S_arr = np.asarray(S, dtype=float)
        if np.any(S_arr <= 0.0):
            raise DomainError("spot prices must be positive")
        xq = np.log(S_arr)
        h = self.x[1] - self.x[0]
        pos = (xq - self.x[0]) / h
        idx = np.floor(pos).astype(int)
        if np.any(idx < 1) or np.any(idx > len(self.x) - 3):
            raise DomainError(
                "spot outside the interpolable window of the value grid"
            )
        s = pos - idx
        row = self.values[time_index]
        s2 = s * s
        s3 = s2 * s
        w0 = 0.5 * (-s3 + 2.0 * s2 - s)
        w1 = 0.5 * (3.0 * s3 - 5.0 * s2 + 2.0)
        w2 = 0.5 * (-3.0 * s3 + 4.0 * s2 + s)
        w3 = 0.5 * (s3 - s2)
        out = (w0 * row[idx - 1] + w1 * row[idx]
               + w2 * row[idx + 1] + w3 * row[idx + 2])
        return float(out) if np.isscalar(S) or S_arr.ndim == 0 else out

    def dump_csv(self, path) -> None:
        """Write the full surface as CSV columns t, x, S, V, exercise_flag."""
        S = self.spot_grid
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "S", "V", "exercise_flag"])
            for i, ti in enumerate(self.t):
                rows = zip(
                    (f"{ti:.10g}" for _ in S),
                    (f"{xj:.6f}" for xj in self.x),
                    (f"{sj:.10g}" for sj in S),
                    (f"{vj:.10g}" for vj in self.values[i]),
                    (int(fj) for fj in self.exercise[i]),
                )
                writer.writerows(rows)


# ---------------------------------------------------------------------------
# backward induction
# ---------------------------------------------------------------------------


def _genuine_exercise_top(surface_pay: np.ndarray, continuation: np.ndarray,
                          strike: float) -> np.ndarray:
    """Index of the highest genuinely exercised node per slice, -1 if none.

    A node counts only when the payoff beats continuation by more than a
    roundoff screen: at r = 0 the two agree to machine precision deep in
    the money, and far out of the money both can underflow to an exact 0.
    """
    excess = surface_pay[None, :] - continuation
    flagged = excess > _EXERCISE_NOISE * strike
    n = flagged.shape[1]
    return np.where(flagged.any(axis=1),
                    n - 1 - np.argmax(flagged[:, ::-1], axis=1), -1)


def _audit_surface(surf: ValueSurface, pay: np.ndarray) -> None:
    K = surf.spec.strike
    if not np.array_equal(surf.values[-1], pay):
        raise NumericalAccuracyError("terminal slice does not equal the payoff")
    if not np.array_equal(surf.values,
                          np.maximum(pay[None, :], surf.continuation)):
        raise NumericalAccuracyError(
            "surface is not the exact pointwise maximum of payoff and continuation"
        )
    worst_x = float(np.diff(surf.values, axis=1).max(initial=-np.inf))
    if worst_x > 1e-8 * K:
        raise NumericalAccuracyError(
            "put surface fails to decrease along log-price", achieved=worst_x
        )
    # earlier dates carry at least the optionality of later ones
    worst_t = float(np.diff(surf.values, axis=0).max(initial=-np.inf))
    if worst_t > 1e-9 * K:
        raise NumericalAccuracyError(
            "surface value increases toward expiry", achieved=worst_t
        )


def _build_surface(level: int, params: ModelParams, spec: OptionSpec,
                   width: float, step: float,
                   table: DensityTable | None) -> ValueSurface:
    K = spec.strike
    lnK = math.log(K)
    half = int(math.ceil(width / step))
    buffer_nodes = int(round(_TOP_BUFFER / step))
    n = 2 * half + 1 + buffer_nodes  # buffered window; trimmed on return
    n_report = 2 * half + 1
    x = lnK + step * (np.arange(n) - half)
    S = np.exp(x)
    pay = payoff_put(S, K)

    steps = 2 ** level
    t_grid = spec.expiry * np.arange(steps + 1) / steps
    values = np.empty((steps + 1, n))
    continuation = np.empty_like(values)

    values[steps] = pay
    continuation[steps] = pay

    cont = np.asarray(price_put(S, t_grid[steps - 1], params, spec, table))
    continuation[steps - 1] = cont
    values[steps - 1] = np.maximum(pay, cont)

    if steps >= 2:
        dt = spec.expiry / steps
        kernel = StepKernel(params, dt, x[0], step, n, table)
        lower = ExpAffine(K, -1.0)
        for i in range(steps - 2, -1, -1):
            def upper(xs, _t=t_grid[i + 1]):
                return price_put(np.exp(xs), _t, params, spec, table)

            cont = kernel.apply(values[i + 1], lower, upper)
            np.maximum(cont, 0.0, out=cont)
            continuation[i] = cont
            values[i] = np.maximum(pay, cont)

    # a node is an exercise node when the payoff is worth at least the
    # continuation value and exercising actually pays something (far out of
    # the money both sides can underflow to an exact 0, which is a tie,
    # not an exercise decision)
    continuation = continuation[:, :n_report].copy()
    values = values[:, :n_report].copy()
    pay = pay[:n_report]
    exercise = (pay[None, :] >= continuation) & (pay[None, :] > 0.0)
    surf = ValueSurface(x=x[:n_report].copy(), t=t_grid, values=values,
                        continuation=continuation, exercise=exercise,
                        level=level, params=params, spec=spec)
    _audit_surface(surf, pay)
    return surf


def bermudan_surface(level: int, params: ModelParams, spec: OptionSpec,
                     grid: ExerciseGrid | None = None,
                     table: DensityTable | None = None) -> ValueSurface:
    """Value surface of the put exercisable on the 2^level + 1 dyadic dates.

    The exercise comparison max(payoff, continuation) is applied at every
    date including t = 0, so level 0 returns max(payoff, European price).
    If the exercise region crowds the bottom of the log-price window the
    window is widened and the induction rerun; a window that stays too
    small raises ``ConfigurationError`` with the required size.
    """
    if not isinstance(level, (int, np.integer)) or isinstance(level, bool):
        raise DomainError(f"refinement level must be an integer, got {level!r}")
    if level < 0 or level > MAX_LEVEL:
        raise DomainError(
            f"refinement level must lie in [0, {MAX_LEVEL}], got {level}"
        )
    if table is None:
        table = get_table(params.alpha)
    grid = grid or ExerciseGrid()
    width = grid.resolve_width(params, spec)

    for _ in range(3):
        surf = _build_surface(level, params, spec, width, grid.step, table)
        pay = payoff_put(surf.spot_grid, spec.strike)
        top = _genuine_exercise_top(pay, surf.continuation, spec.strike)
        present = top >= 0
        if not present.any():
            return surf
        if np.any(top[present] == len(surf.x) - 1):
            raise ConfigurationError(
                "exercise region reaches the top of the log-price window",
                suggestion=f"increase the grid half-width beyond {width:.1f}",
            )
        clearance = surf.x[top[present]].min() - surf.x[0]
        if clearance >= _BOUNDARY_CLEARANCE:
            return surf
        width += 1.0
    raise ConfigurationError(
        "exercise boundary sits too close to the bottom of the log-price window",
        suggestion=f"rerun with a grid half-width of at least {width:.1f}",
    )


def american_price(tol: float, params: ModelParams, spec: OptionSpec,
                   grid: ExerciseGrid | None = None,
                   max_level: int = MAX_LEVEL,
                   table: DensityTable | None = None) -> tuple[ValueSurface, int]:
    """Dyadic refinement until the date-0 slice stops moving.

    Returns the finest surface and the level it was computed at; stops as
    soon as the sup-norm increment between consecutive levels drops below
    ``tol * K``.  Raises ``ConvergenceError`` (carrying the last increment)
    if the level cap is hit first.  The refinement history — one
    ``(level, value_at_strike, increment)`` triple per level — is attached
    to the returned surface.
    """
    if tol <= 0.0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    if max_level < 1 or max_level > MAX_LEVEL:
        raise DomainError(
            f"level cap must lie in [1, {MAX_LEVEL}], got {max_level}"
        )
    if table is None:
        table = get_table(params.alpha)
    grid = grid or ExerciseGrid()

    # pin the window once so every level prices on identical nodes; if a
    # deeper level still outgrows it, widen and restart the ladder so the
    # increments remain comparable
    width = grid.resolve_width(params, spec)
    for _ in range(3):
        try:
            return _escalate(tol, params, spec, width, grid.step, max_level, table)
        except _WindowTooSmall as exc:
            width = exc.required
    raise ConfigurationError(
        "log-price window kept outgrowing its bounds during refinement",
        suggestion=f"rerun with a grid half-width of at least {width:.1f}",
    )


class _WindowTooSmall(Exception):
    def __init__(self, required: float):
        self.required = required


def _escalate(tol, params, spec, width, step, max_level, table):
    K = spec.strike
    prev = None
    history = []
    surf = None
    increment = None
    for level in range(max_level + 1):
        surf = _build_surface(level, params, spec, width, step, table)
        pay = payoff_put(surf.spot_grid, K)
        top = _genuine_exercise_top(pay, surf.continuation, K)
        present = top >= 0
        if present.any():
            if np.any(top[present] == len(surf.x) - 1):
                raise _WindowTooSmall(width + 1.0)
            if surf.x[top[present]].min() - surf.x[0] < _BOUNDARY_CLEARANCE:
                raise _WindowTooSmall(width + 1.0)
        atm = surf.value_at(K)
        if prev is not None:
            increment = float(np.max(np.abs(surf.values[0] - prev)))
        history.append((level, atm, increment))
        if increment is not None and increment < tol * K:
            surf.achieved_increment = increment
            surf.history = tuple(history)
            _audit_european_floor(surf, tol, table)
            return surf, level
        prev = surf.values[0]
    raise ConvergenceError(
        f"refinement cap {max_level} reached with increment "
        f"{increment:.3e} still above {tol * K:.3e}",
        last_increment=increment,
    )


def _audit_european_floor(surf: ValueSurface, tol: float,
                          table: DensityTable | None) -> None:
    euro = np.asarray(price_put(surf.spot_grid, 0.0, surf.params, surf.spec, table))
    deficit = float((euro - surf.values[0]).max(initial=-np.inf))
    if deficit > tol * surf.spec.strike:
        raise NumericalAccuracyError(
            "early-exercise surface fell below the European value",
            achieved=deficit,
        )


def richardson_limit(ladder: Sequence[float]) -> float:
    """Geometric-ratio extrapolation of a refinement ladder.

    Takes successive prices from consecutive levels and estimates their
    limit assuming roughly geometric increments.  Offered purely as a
    diagnostic — pricing functions always return the finest computed value,
    never the extrapolation.
    """
    vals = [float(v) for v in ladder]
    if len(vals) < 3:
        raise DomainError("extrapolation needs at least three ladder values")
    d1 = vals[-2] - vals[-3]
    d2 = vals[-1] - vals[-2]
    if d2 <= 0.0 or d1 <= 0.0 or d2 >= d1:
        return vals[-1]
    rho = d2 / d1
    return vals[-1] + d2 * rho / (1.0 - rho)


# ---------------------------------------------------------------------------
# exercise boundary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExerciseBoundary:
    """Critical exercise point of one time slice.

    ``x_star`` is the largest log-price at which exercise is optimal,
    refined between grid nodes by the root of the linear interpolant of
    (continuation - payoff).  ``pasting_gap`` measures |dV/dx + e^x| there
    using a one-sided quadratic fit through the first three continuation
    nodes above the boundary.  A slice with no genuine exercise region is
    marked absent (all fields but ``t`` are None).
    """

    t: float
    x_star: float | None
    pasting_gap: float | None = None
    value_match_error: float | None = None
    value_match_tol: float | None = None

    @property
    def absent(self) -> bool:
        return self.x_star is None

    @property
    def s_star(self) -> float | None:
        return None if self.x_star is None else math.exp(self.x_star)


def extract_boundary(surface: ValueSurface) -> list[ExerciseBoundary]:
    """Exercise boundary of every pre-expiry slice, earliest date first.

    Requires a surface of level >= 4 so the date spacing resolves the
    boundary's shape.  Slices without a genuine exercise region (for
    example at r = 0, where continuation never falls below the payoff by
    more than roundoff) yield entries marked absent.
    """
    if surface.level < 4:
        raise ConfigurationError(
            "boundary extraction needs refinement level >= 4",
            suggestion="rebuild the surface with a finer exercise schedule",
        )
    K = surface.spec.strike
    h = float(surface.x[1] - surface.x[0])
    pay = payoff_put(surface.spot_grid, K)
    top = _genuine_exercise_top(pay, surface.continuation, K)

    out: list[ExerciseBoundary] = []
    n = len(surface.x)
    for i in range(len(surface.t) - 1):  # boundary is defined before expiry
        j = int(top[i])
        if j < 0:
            out.append(ExerciseBoundary(t=float(surface.t[i]), x_star=None))
            continue
        if j + 3 > n - 1:
            raise ConfigurationError(
                "exercise boundary too close to the top of the window",
                suggestion="rerun with a wider log-price grid",
            )
        cont = surface.continuation[i]
        g0 = cont[j] - pay[j]
        g1 = cont[j + 1] - pay[j + 1]
        frac = 0.0 if g1 <= g0 else min(1.0, max(0.0, -g0 / (g1 - g0)))
        x_star = float(surface.x[j] + frac * h)

        # smooth pasting: slope of the quadratic through the three
        # continuation nodes above the boundary, evaluated at x_star
        offs = surface.x[j + 1 : j + 4] - x_star
        coef = np.polyfit(offs, surface.continuation[i, j + 1 : j + 4], 2)
        slope = float(coef[1])
        gap = abs(slope + math.exp(x_star))

        # value matching: chord of the surface across the boundary cell
        # against the exact payoff.  The chord's error budget has two
        # parts: the surface kinks at the boundary, contributing
        # frac * g1 (the continuation's excess at the first unexercised
        # node), and the payoff itself is curved across the cell,
        # contributing ~ e^{x*} frac (1-frac) h^2 / 2.
        v_hat = (1.0 - frac) * surface.values[i, j] + frac * surface.values[i, j + 1]
        err = abs(v_hat - (K - math.exp(x_star)))
        tol = (frac * max(g1, 0.0)
               + 0.51 * math.exp(x_star) * frac * (1.0 - frac) * h**2
               + 1e-9 * K)
        out.append(ExerciseBoundary(t=float(surface.t[i]), x_star=x_star,
                                    pasting_gap=gap, value_match_error=err,
                                    value_match_tol=tol))
    return out


def dump_boundary_csv(boundaries: Sequence[ExerciseBoundary], path) -> None:
    """Write present boundary entries as CSV columns t, S_star, pasting_gap."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "S_star", "pasting_gap"])
        for b in boundaries:
            if not b.absent:
                writer.writerow([f"{b.t:.10g}", f"{b.s_star:.10g}",
                                 f"{b.pasting_gap:.6e}"])


# ---------------------------------------------------------------------------
# smooth-pasting report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PastingRow:
    t: float
    s_star: float
    value_match_error: float
    value_match_tol: float
    pasting_gap: float


@dataclass(frozen=True)
class PastingReport:
    """Per-slice value-matching and smooth-pasting diagnostics.

    ``within_tol`` states whether every present slice matched the payoff at
    the boundary to within its interpolation tolerance.  Summaries are NaN
    when no slice has an exercise region.
    """

    rows: tuple
    max_pasting_gap: float
    median_pasting_gap: float
    max_value_match_error: float
    within_tol: bool


def smooth_pasting_report(surface: ValueSurface,
                          boundaries: Sequence[ExerciseBoundary]) -> PastingReport:
    """Aggregate boundary diagnostics for one surface.

    Deterministic for a fixed surface; requires a non-empty boundary list
    (absent entries are allowed and skipped in the aggregates).
    """
    if len(boundaries) == 0:
        raise DomainError("boundary list is empty")
    rows = tuple(
        PastingRow(t=b.t, s_star=b.s_star, value_match_error=b.value_match_error,
                   value_match_tol=b.value_match_tol, pasting_gap=b.pasting_gap)
        for b in boundaries if not b.absent
    )
    if not rows:
        nan = float("nan")
        return PastingReport(rows=(), max_pasting_gap=nan, median_pasting_gap=nan,
                             max_value_match_error=nan, within_tol=True)
    gaps = [r.pasting_gap for r in rows]
    errs = [r.value_match_error for r in rows]
    return PastingReport(
        rows=rows,
        max_pasting_gap=max(gaps),
        median_pasting_gap=statistics.median(gaps),
        max_value_match_error=max(errs),
        within_tol=all(r.value_match_error <= r.value_match_tol for r in rows),
    )
