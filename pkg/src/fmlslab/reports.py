"""Property scans and reference oracles behind the command-line verbs.

Each scan prices something, checks a claimed property (convexity in the
underlying, monotonicity in the tail index, Bermudan convergence, the
equation residual, Monte Carlo agreement), and returns a
:class:`PropertyReport`: pass/fail, the worst offender and where it
lives, the tolerance used, and which kind of comparison produced it.
Reports carry their raw rows so callers can dump them to CSV/JSON
without re-deriving anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .density import get_table
from .errors import ConfigurationError, PricingError
from .european import bs_put_reference, price_put
from .exercise import ExerciseGrid, ValueSurface, bermudan_surface
from .fractional import FracGrid, european_residual, fpde_residual
from .mc import martingale_check, mc_european_put
from .model import ModelParams, convexity_adjustment, payoff_put
from .european import ExpAffine

__all__ = [
    "PropertyReport",
    "binomial_american_put",
    "scan_convexity",
    "scan_alpha",
    "bermudan_convergence_table",
    "residual_report",
    "mc_agreement_report",
]


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of one property scan.

    ``worst_magnitude``/``worst_location`` identify the sharpest point of
    the scan (the closest call when passing, the offender when failing);
    ``provenance`` records what the comparison was made against;
    ``details`` holds the raw rows; ``notes`` carries non-fatal flags.
    """

    name: str
    passed: bool
    tolerance: float
    worst_magnitude: float
    worst_location: str
    provenance: str
    details: tuple = field(default=(), repr=False)
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "tolerance": float(self.tolerance),
            "worst_magnitude": float(self.worst_magnitude),
            "worst_location": self.worst_location,
            "provenance": self.provenance,
            "details": [dict(row) for row in self.details],
            "notes": list(self.notes),
        }


def binomial_american_put(S: float, strike: float, rate: float, sigma: float,
                          expiry: float, steps: int) -> float:
    """American put on a recombining binomial lattice (reference oracle).

    Standard up/down factors exp(+-sigma sqrt(dt)) with the risk-neutral
    weight; used as the alpha = 2 American reference.  Runtime is
    quadratic in ``steps``; 10^4 steps is comfortably below a second.
    """
    if steps < 1:
        raise ConfigurationError(f"need at least one step, got {steps}")
    dt = expiry / steps
    up = math.exp(sigma * math.sqrt(dt))
    prob = (math.exp(rate * dt) - 1.0 / up) / (up - 1.0 / up)
    if not (0.0 < prob < 1.0):
        raise ConfigurationError(
            f"risk-neutral weight {prob:.4f} outside (0, 1); "
            "increase steps or lower the rate-to-volatility ratio")
    discount = math.exp(-rate * dt)
    log_up = sigma * math.sqrt(dt)
    j = np.arange(steps + 1, dtype=float)
    values = np.maximum(strike - S * np.exp((2.0 * j - steps) * log_up), 0.0)
    for m in range(steps - 1, -1, -1):
        values = discount * (prob * values[1:] + (1.0 - prob) * values[:-1])
        spots = S * np.exp((2.0 * np.arange(m + 1) - m) * log_up)
        np.maximum(values, strike - spots, out=values)
    return float(values[0])


def _located(exc: PricingError, where: str):
    raise type(exc)(f"{exc} (while pricing {where})") from exc


def _european_slice(s_grid: np.ndarray, t: float, config: RunConfig):
    if t == config.option.expiry:
        return payoff_put(s_grid, config.option.strike)
    return price_put(s_grid, t, config.model, config.option)


def _american_surface(config: RunConfig, params: ModelParams | None = None) -> ValueSurface:
    return bermudan_surface(config.level, params or config.model, config.option,
                            grid=config.grid)


def _surface_on(surface: ValueSurface, s_grid: np.ndarray, slice_index: int):
    # linear interpolation in S: convexity-preserving, exact on the
    # (linear-in-S) exercise region
    return np.interp(s_grid, surface.spot_grid, surface.values[slice_index])


def scan_convexity(kind: str, s_grid, t_list, config: RunConfig) -> PropertyReport:
    """Minimum second difference in S across time slices; convexity check.

    European slices are priced closed-form at each requested time;
    American surfaces contribute every dyadic slice they have.  Passes
    iff the minimum scaled second difference is >= -tolerance * K.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    strike = config.option.strike
    if s_grid.size < 16:
        raise ConfigurationError(f"need at least 16 spots, got {s_grid.size}")
    if np.any(np.diff(s_grid) <= 0.0):
        raise ConfigurationError("spot grid must be strictly increasing")
    if s_grid[0] > 0.5 * strike or s_grid[-1] < 1.5 * strike:
        raise ConfigurationError(
            f"spot grid [{s_grid[0]}, {s_grid[-1]}] must span "
            f"[{0.5 * strike}, {1.5 * strike}]")
    if kind not in ("european", "american", "both"):
        raise ConfigurationError(f"unknown pricer kind {kind!r}")

    tol = config.tolerances["convexity"] * strike
    rows = []
    worst = (math.inf, "")

    def slice_min(values: np.ndarray, label: str, t: float):
        nonlocal worst
        second = values[2:] - 2.0 * values[1:-1] + values[:-2]
        idx = int(np.argmin(second))
        minimum = float(second[idx])
        location = f"{label} t={t:.6g} S={s_grid[idx + 1]:.6g}"
        rows.append({"kind": label, "t": float(t),
                     "min_second_difference": minimum,
                     "argmin_S": float(s_grid[idx + 1])})
        if minimum < worst[0]:
            worst = (minimum, location)

    if kind in ("european", "both"):
        for t in t_list:
            try:
                values = _european_slice(s_grid, float(t), config)
            except PricingError as exc:
                _located(exc, f"european slice t={t}")
            slice_min(values, "european", float(t))
    if kind in ("american", "both"):
        try:
            surface = _american_surface(config)
        except PricingError as exc:
            _located(exc, "american surface")
        for i, t in enumerate(surface.t):
            slice_min(_surface_on(surface, s_grid, i), "american", float(t))

    return PropertyReport(
        name="convexity-in-spot",
        passed=worst[0] >= -tol,
        tolerance=tol,
        worst_magnitude=worst[0],
        worst_location=worst[1],
        provenance="closed-form (european), refinement lattice (american)",
        details=tuple(rows),
    )


def scan_alpha(alphas, kind: str, spots, config: RunConfig) -> PropertyReport:
    """Price sweep across the tail index at fixed sigma; monotonicity check.

    Volatility is held at the configured sigma for every alpha (nothing
    else makes the sweep comparable); prices at S >= K must be
    non-increasing in alpha, and an alpha = 2 entry must match its
    Black-Scholes (European) or binomial (American) reference.  Spots
    below the strike are priced and reported but not asserted on.
    """
    alphas = [float(a) for a in alphas]
    if alphas != sorted(alphas):
        raise ConfigurationError(f"alphas must be ascending, got {alphas}")
    if not all(1.0 < a <= 2.0 for a in alphas):
        raise ConfigurationError(f"alphas must lie in (1, 2], got {alphas}")
    if kind not in ("european", "american", "both"):
        raise ConfigurationError(f"unknown pricer kind {kind!r}")
    spots = [float(s) for s in spots]
    strike = config.option.strike
    mono_tol = config.tolerances["monotonicity"] * strike
    kinds = ("european", "american") if kind == "both" else (kind,)

    rows = []
    violations = []  # (magnitude-vs-tolerance ratio, magnitude, location)
    notes = []

    for label in kinds:
        prices = {}
        for alpha in alphas:
            params = ModelParams(alpha=alpha, sigma=config.model.sigma,
                                 rate=config.model.rate)
            if label == "european":
                try:
                    values = price_put(np.asarray(spots), 0.0, params, config.option)
                except PricingError as exc:
                    _located(exc, f"european sweep alpha={alpha}")
            else:
                try:
                    surface = _american_surface(config, params)
                except PricingError as exc:
                    _located(exc, f"american sweep alpha={alpha}")
                values = np.interp(np.asarray(spots), surface.spot_grid,
                                   surface.values[0])
            for s, v in zip(spots, values):
                prices[(s, alpha)] = float(v)
                rows.append({"kind": label, "S": s, "alpha": alpha,
                             "price": float(v), "asserted": s >= strike})

        for s in spots:
            if s < strike:
                notes.append(f"{label} S={s:g}: below strike, reported only")
                continue
            for lo, hi in zip(alphas, alphas[1:]):
                step = prices[(s, hi)] - prices[(s, lo)]
                if step > 0.0:
                    violations.append(
                        (step / mono_tol, step,
                         f"{label} S={s:g} alpha {lo:g}->{hi:g}"))

        if 2.0 in alphas:
            for s in spots:
                if label == "european":
                    reference = float(bs_put_reference(
                        s, strike, config.model.rate, config.model.sigma,
                        config.option.expiry))
                    err = abs(prices[(s, 2.0)] - reference)
                    tol = config.tolerances["bs_endpoint"] * strike
                    where = f"european S={s:g} alpha=2 vs Black-Scholes"
                else:
                    reference = binomial_american_put(
                        s, strike, config.model.rate, config.model.sigma,
                        config.option.expiry, steps=4000)
                    err = abs(prices[(s, 2.0)] / reference - 1.0)
                    tol = config.tolerances["binomial_rel"]
                    where = f"american S={s:g} alpha=2 vs binomial"
                rows.append({"kind": label, "S": s, "alpha": 2.0,
                             "price": prices[(s, 2.0)], "reference": reference,
                             "endpoint_error": err, "asserted": True})
                if err > tol:
                    violations.append((err / tol, err, where))
        else:
            notes.append(f"{label}: no alpha=2 entry, endpoint check skipped")

    if violations:
        ratio, magnitude, location = max(violations)
        passed = False
    else:
        ratio, magnitude, location = 0.0, 0.0, "no violations"
        passed = True
    return PropertyReport(
        name="alpha-monotonicity",
        passed=passed,
        tolerance=mono_tol,
        worst_magnitude=magnitude,
        worst_location=location,
        provenance="closed-form (european), oracle (american endpoint)",
        details=tuple(rows),
        notes=tuple(notes),
    )


def bermudan_convergence_table(n_range, config: RunConfig,
                               spot: float | None = None) -> PropertyReport:
    """Ladder of Bermudan values over dyadic exercise levels.

    Rows carry (N, value at ``spot``, increment).  Increments must be
    non-negative (dyadic date nesting) and decreasing from N = 3 on; a
    final increment still above grid.tol is flagged in the notes rather
    than failed.  At alpha = 2 the last value is checked against a
    10^4-step binomial oracle.
    """
    levels = [int(n) for n in n_range]
    if levels != sorted(levels) or len(set(levels)) != len(levels):
        raise ConfigurationError(f"levels must be strictly ascending, got {levels}")
    if not levels:
        raise ConfigurationError("empty level range")
    spot = config.option.strike if spot is None else float(spot)

    rows = []
    values = []
    for level in levels:
        surface = bermudan_surface(level, config.model, config.option,
                                   grid=config.grid)
        value = surface.value_at(spot)
        increment = value - values[-1] if values else math.nan
        values.append(value)
        rows.append({"N": level, "value": value, "increment": increment})

    violations = []
    increments = [row["increment"] for row in rows[1:]]
    for row in rows[1:]:
        if row["increment"] < -1e-12:
            violations.append((abs(row["increment"]) / 1e-12,
                               row["increment"], f"decrease at N={row['N']}"))
    late = [(rows[i + 1]["N"], inc) for i, inc in enumerate(increments)
            if rows[i + 1]["N"] >= 3]
    for (n_lo, inc_lo), (n_hi, inc_hi) in zip(late, late[1:]):
        if inc_hi >= inc_lo:
            violations.append(
                (2.0, inc_hi - inc_lo,
                 f"increment grew from N={n_lo} to N={n_hi}"))

    notes = []
    if increments:
        final = increments[-1]
        budget = config.tol * config.option.strike
        if final < budget:
            notes.append(f"converged: final increment {final:.3e} "
                         f"below {budget:.3e}")
        else:
            notes.append(f"not converged: final increment {final:.3e} "
                         f"above {budget:.3e}")

    provenance = "dyadic refinement"
    if config.model.alpha == 2.0:
        reference = binomial_american_put(
            spot, config.option.strike, config.model.rate, config.model.sigma,
            config.option.expiry, steps=10_000)
        rel = abs(values[-1] / reference - 1.0)
        tol = config.tolerances["binomial_rel"]
        rows.append({"N": -1, "value": reference, "increment": math.nan,
                     "reference": "binomial-10000"})
        notes.append(f"alpha=2 limit vs binomial: relative error {rel:.3e}")
        if rel > tol:
            violations.append((rel / tol, rel, "alpha=2 value vs binomial oracle"))
        provenance = "dyadic refinement + binomial oracle"

    if violations:
        ratio, magnitude, location = max(violations)
    else:
        magnitude, location = 0.0, "no violations"
    return PropertyReport(
        name="bermudan-convergence",
        passed=not violations,
        tolerance=config.tol * config.option.strike,
        worst_magnitude=magnitude,
        worst_location=location,
        provenance=provenance,
        details=tuple(rows),
        notes=tuple(notes),
    )


def residual_report(config: RunConfig, t: float | None = None,
                    resolutions=(501, 1001)) -> PropertyReport:
    """Equation-residual audit: exact solutions plus refinement order.

    The bond and the asset must sit at the noise level of the discrete
    scheme (machine zero for the bond; the closed-form discretization
    defect, reproduced to rounding, for the asset).  The European put's
    max interior residual must shrink with observed order >=
    tolerances.residual_order under h -> h/2.
    """
    params = config.model
    strike = config.option.strike
    expiry = config.option.expiry
    t = 0.5 * expiry if t is None else float(t)
    rows = []
    violations = []

    # bond: V = K e^{-r(T-t)}; exact at machine precision
    value = strike * math.exp(-params.rate * (expiry - t))
    log_k = math.log(strike)
    grid = FracGrid(log_k - 2.0, log_k + 2.0, 201,
                    left_extension=ExpAffine(value, 0.0))
    res = fpde_residual(np.full(grid.n, value), params.rate * value
                        * np.ones(grid.n), grid, params)
    bond_residual = float(np.nanmax(np.abs(res)))
    rows.append({"check": "bond", "max_residual": bond_residual,
                 "tolerance": 1e-10 * strike})
    if bond_residual > 1e-10 * strike:
        violations.append((bond_residual / (1e-10 * strike), bond_residual,
                           "bond residual above noise"))

    # asset: V = e^x; residual must equal the closed-form discretization
    # defect ((r - nu)(sinh h / h - 1) + nu (c_h - 1)) e^x to rounding
    grid = FracGrid(log_k - 2.0, log_k + 2.0, 201,
                    left_extension=ExpAffine(0.0, 1.0))
    h = grid.h
    asset = np.exp(grid.x)
    res = fpde_residual(asset, np.zeros(grid.n), grid, params)
    nu = convexity_adjustment(params.alpha, params.sigma)
    c_h = math.exp(h) * (-math.expm1(-h)) ** params.alpha / h**params.alpha
    defect = (params.rate - nu) * (math.sinh(h) / h - 1.0) + nu * (c_h - 1.0)
    asset_noise = float(np.nanmax(np.abs(res - defect * asset)
                                  / np.maximum(asset, 1.0)))
    rows.append({"check": "asset", "noise_above_discrete_defect": asset_noise,
                 "discrete_defect_per_unit": defect, "tolerance": 1e-11})
    if asset_noise > 1e-11:
        violations.append((asset_noise / 1e-11, asset_noise,
                           "asset residual above discretization noise"))

    # European put: first-order refinement of the max interior residual
    maxima = []
    for n in resolutions:
        _, res = european_residual(params, config.option, t, n=int(n))
        maxima.append(float(np.nanmax(np.abs(res[1:-1]))))
        rows.append({"check": "european", "n": int(n),
                     "max_interior_residual": maxima[-1]})
    order_floor = config.tolerances["residual_order"]
    for (n_lo, m_lo), (n_hi, m_hi) in zip(
            zip(resolutions, maxima), zip(resolutions[1:], maxima[1:])):
        order = math.log2(m_lo / m_hi)
        rows.append({"check": "european-order", "from_n": int(n_lo),
                     "to_n": int(n_hi), "observed_order": order})
        if order < order_floor:
            violations.append((order_floor / max(order, 1e-12), order,
                               f"refinement order {order:.3f} from n={n_lo}"))

    if violations:
        ratio, magnitude, location = max(violations)
    else:
        magnitude, location = 0.0, "no violations"
    return PropertyReport(
        name="fpde-residual",
        passed=not violations,
        tolerance=order_floor,
        worst_magnitude=magnitude,
        worst_location=location,
        provenance="closed-form",
        details=tuple(rows),
    )


def mc_agreement_report(config: RunConfig, spot: float | None = None) -> PropertyReport:
    """Monte Carlo cross-validation: price agreement, martingale, control.

    The simulated European price must land within three standard errors
    of the closed form; the discounted-martingale check must pass; the
    negative control (convexity adjustment dropped) must fail by more
    than ten standard errors.
    """
    spot = config.option.strike if spot is None else float(spot)
    params = config.model
    rows = []
    violations = []

    estimate = mc_european_put(spot, params, config.option, config.mc)
    reference = float(price_put(spot, 0.0, params, config.option))
    z = abs(estimate.price - reference) / estimate.std_error
    rows.append({"check": "price-agreement", "estimate": estimate.price,
                 "stderr": estimate.std_error, "reference": reference,
                 "z_score": z, "limit": 3.0})
    if z > 3.0:
        violations.append((z / 3.0, z, f"simulated price z={z:.2f} at S={spot:g}"))

    report = martingale_check(params, config.mc, horizon=config.option.expiry)
    z_mart = report.relative_error / report.std_error
    rows.append({"check": "martingale", "relative_error": report.relative_error,
                 "stderr": report.std_error, "z_score": z_mart, "limit": 3.0})
    if not report.passed:
        violations.append((z_mart / 3.0, z_mart, "martingale check"))

    control = martingale_check(params, config.mc, horizon=config.option.expiry,
                               drop_adjustment=True)
    z_ctrl = control.relative_error / control.std_error
    rows.append({"check": "negative-control", "relative_error":
                 control.relative_error, "stderr": control.std_error,
                 "z_score": z_ctrl, "limit": 10.0})
    if z_ctrl <= 10.0:
        violations.append((10.0 / max(z_ctrl, 1e-12), z_ctrl,
                           "negative control failed to fail"))

    if violations:
        ratio, magnitude, location = max(violations)
    else:
        magnitude, location = 0.0, "no violations"
    return PropertyReport(
        name="mc-agreement",
        passed=not violations,
        tolerance=3.0,
        worst_magnitude=magnitude,
        worst_location=location,
        provenance="monte-carlo vs closed-form",
        details=tuple(rows),
    )
