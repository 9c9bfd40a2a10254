"""Tests for Bermudan backward induction, dyadic refinement, and the
exercise boundary."""

import math

import numpy as np
import pytest

from fmlslab import (
    ConfigurationError,
    ConvergenceError,
    DomainError,
    ExerciseGrid,
    ModelParams,
    OptionSpec,
    american_price,
    bermudan_surface,
    dump_boundary_csv,
    extract_boundary,
    payoff_put,
    price_put,
    richardson_limit,
    smooth_pasting_report,
)

SPEC = OptionSpec(strike=100.0, expiry=1.0)
P14 = ModelParams(alpha=1.4, sigma=0.25, rate=0.05)
P20 = ModelParams(alpha=2.0, sigma=0.25, rate=0.05)

# American put value at alpha=2, K=S0=100, r=0.05, sigma=0.25, T=1 from an
# independently written binomial-tree pricer (backward induction on a
# recombining lattice), recomputed at several step counts:
#   2000 -> 7.97396341   5000 -> 7.97427714
#  10000 -> 7.97437995  20000 -> 7.97443138
BINOMIAL_10K = 7.97437995


@pytest.fixture(scope="module")
def surf14():
    return bermudan_surface(8, P14, SPEC)


@pytest.fixture(scope="module")
def surf20():
    return bermudan_surface(8, P20, SPEC)


# ---------------------------------------------------------------------------
# backward induction basics
# ---------------------------------------------------------------------------


def test_level_zero_is_max_of_payoff_and_european():
    surf = bermudan_surface(0, P14, SPEC)
    pay = payoff_put(surf.spot_grid, SPEC.strike)
    euro = np.asarray(price_put(surf.spot_grid, 0.0, P14, SPEC))
    assert np.array_equal(surf.values[0], np.maximum(pay, euro))
    assert np.array_equal(surf.values[1], pay)
    # at the money the payoff is zero, so the two-date value is European
    assert surf.value_at(100.0) == pytest.approx(
        float(price_put(100.0, 0.0, P14, SPEC)), rel=1e-12
    )


def test_terminal_slice_is_exact_payoff(surf14):
    pay = payoff_put(surf14.spot_grid, SPEC.strike)
    assert np.array_equal(surf14.values[-1], pay)


def test_surface_is_exact_obstacle_maximum(surf14):
    pay = payoff_put(surf14.spot_grid, SPEC.strike)
    assert np.array_equal(surf14.values,
                          np.maximum(pay[None, :], surf14.continuation))


def test_surface_monotone_in_log_price(surf14, surf20):
    for surf in (surf14, surf20):
        assert np.diff(surf.values, axis=1).max() <= 1e-8 * SPEC.strike


def test_surface_monotone_in_time(surf14, surf20):
    # earlier dates hold at least the optionality of later ones
    for surf in (surf14, surf20):
        assert np.diff(surf.values, axis=0).max() <= 1e-9 * SPEC.strike


def test_exercise_flags_definition(surf14):
    pay = payoff_put(surf14.spot_grid, SPEC.strike)
    expected = (pay[None, :] >= surf14.continuation) & (pay[None, :] > 0.0)
    assert np.array_equal(surf14.exercise, expected)


def test_dominates_payoff_everywhere(surf14):
    pay = payoff_put(surf14.spot_grid, SPEC.strike)
    assert (surf14.values >= pay[None, :]).all()


def test_time_grid_is_dyadic(surf14):
    assert len(surf14.t) == 2**8 + 1
    assert surf14.t[0] == 0.0
    assert surf14.t[-1] == SPEC.expiry
    steps = np.diff(surf14.t)
    assert np.allclose(steps, SPEC.expiry / 2**8, rtol=1e-14)


def test_strike_lies_on_grid(surf14):
    gap = np.abs(surf14.x - math.log(SPEC.strike)).min()
    assert gap < 1e-12


# ---------------------------------------------------------------------------
# refinement ladder
# ---------------------------------------------------------------------------


def test_ladder_monotone_and_increments_decreasing():
    values = []
    prev_slice = None
    for level in range(7):
        surf = bermudan_surface(level, P14, SPEC)
        if prev_slice is not None:
            # denser exercise dates can only add value, node by node
            assert (surf.values[0] - prev_slice).min() >= -1e-9 * SPEC.strike
        prev_slice = surf.values[0]
        values.append(surf.value_at(100.0))
    increments = np.diff(values)
    assert (increments > 0.0).all()
    assert (np.diff(increments) < 0.0).all()


def test_alpha2_ladder_matches_binomial_oracle():
    surf, n_used = american_price(1e-5, P20, SPEC)
    rel = abs(surf.value_at(100.0) - BINOMIAL_10K) / BINOMIAL_10K
    assert rel < 5e-3
    assert n_used <= 12


def test_american_price_converges_and_reports_history():
    surf, n_used = american_price(1e-4, P14, SPEC)
    assert surf.achieved_increment is not None
    assert surf.achieved_increment < 1e-4 * SPEC.strike
    assert len(surf.history) == n_used + 1
    levels = [entry[0] for entry in surf.history]
    assert levels == list(range(n_used + 1))
    atm = [entry[1] for entry in surf.history]
    assert (np.diff(atm) > 0.0).all()
    # recorded increments match the convergence decision
    assert surf.history[-1][2] == pytest.approx(surf.achieved_increment)


def test_american_dominates_european():
    surf, _ = american_price(1e-4, P14, SPEC)
    euro = np.asarray(price_put(surf.spot_grid, 0.0, P14, SPEC))
    assert (surf.values[0] - euro).min() >= -1e-4 * SPEC.strike
    # strictly greater in the money, where early exercise has value
    s_itm = 80.0
    assert surf.value_at(s_itm) > float(price_put(s_itm, 0.0, P14, SPEC)) + 0.1


def test_convergence_error_carries_last_increment():
    with pytest.raises(ConvergenceError) as exc_info:
        american_price(1e-9, P14, SPEC, max_level=3)
    assert exc_info.value.last_increment is not None
    assert exc_info.value.last_increment > 1e-9 * SPEC.strike


def test_r0_american_equals_european():
    spec = OptionSpec(strike=100.0, expiry=1.0)
    for alpha in (1.5, 2.0):
        params = ModelParams(alpha=alpha, sigma=0.25, rate=0.0)
        surf, _ = american_price(1e-4, params, spec)
        euro = float(price_put(100.0, 0.0, params, spec))
        assert abs(surf.value_at(100.0) - euro) < 1e-4 * spec.strike


def test_richardson_limit_extrapolates_above_ladder():
    ladder = [7.45894138, 7.71579010, 7.83455732, 7.90115453, 7.93699322,
              7.95547973, 7.96491507, 7.96968512, 7.97207997]
    limit = richardson_limit(ladder)
    assert limit > ladder[-1]
    # geometric increments with ratio ~1/2 should land near the true
    # American value from the binomial oracle
    assert limit == pytest.approx(7.9744, abs=2e-3)


def test_richardson_limit_validation():
    with pytest.raises(DomainError):
        richardson_limit([1.0, 2.0])
    # a stalled ladder extrapolates to its own last value
    assert richardson_limit([5.0, 5.0, 5.0]) == 5.0


# ---------------------------------------------------------------------------
# exercise boundary
# ---------------------------------------------------------------------------


def test_boundary_in_the_money_everywhere(surf14, surf20):
    for surf in (surf14, surf20):
        bounds = extract_boundary(surf)
        present = [b for b in bounds if not b.absent]
        assert len(present) == len(bounds)
        assert all(b.s_star < SPEC.strike for b in present)
        assert all(b.s_star > 0.5 * SPEC.strike for b in present)


def test_boundary_levels_sane(surf14, surf20):
    b14 = extract_boundary(surf14)
    b20 = extract_boundary(surf20)
    # date-0 critical prices land where the ladder studies put them
    assert b14[0].s_star == pytest.approx(79.26, abs=0.5)
    assert b20[0].s_star == pytest.approx(75.57, abs=0.5)
    # just before expiry the critical price approaches the strike
    assert b14[-1].s_star > 97.0
    assert b20[-1].s_star > 95.0


def test_boundary_approaches_strike_with_refinement():
    last = []
    for level in (4, 6, 8):
        surf = bermudan_surface(level, P20, SPEC)
        last.append(extract_boundary(surf)[-1].s_star)
    assert last[0] < last[1] < last[2] < SPEC.strike


def test_boundary_requires_level_four():
    surf = bermudan_surface(3, P14, SPEC)
    with pytest.raises(ConfigurationError):
        extract_boundary(surf)


def test_boundary_absent_at_zero_rate():
    params = ModelParams(alpha=1.5, sigma=0.25, rate=0.0)
    surf = bermudan_surface(5, params, SPEC)
    bounds = extract_boundary(surf)
    assert all(b.absent for b in bounds)
    assert all(b.s_star is None for b in bounds)


def test_value_matching_within_tolerance(surf14, surf20):
    for surf in (surf14, surf20):
        for b in extract_boundary(surf):
            if not b.absent:
                assert b.value_match_error <= b.value_match_tol


def test_pasting_gap_decreases_under_refinement():
    gaps = []
    for level, step in [(4, 0.02), (6, 0.01), (8, 0.005)]:
        surf = bermudan_surface(level, P14, SPEC, ExerciseGrid(step=step))
        gaps.append(extract_boundary(surf)[0].pasting_gap)
    assert gaps[0] > gaps[1] > gaps[2]


def test_smooth_pasting_report_aggregates(surf14):
    bounds = extract_boundary(surf14)
    rep = smooth_pasting_report(surf14, bounds)
    assert rep.within_tol
    assert len(rep.rows) == len(bounds)
    assert rep.max_pasting_gap >= rep.median_pasting_gap > 0.0
    gaps = sorted(r.pasting_gap for r in rep.rows)
    assert rep.max_pasting_gap == gaps[-1]
    # deterministic for a fixed surface
    rep2 = smooth_pasting_report(surf14, extract_boundary(surf14))
    assert rep2 == rep


def test_smooth_pasting_report_validation(surf14):
    with pytest.raises(DomainError):
        smooth_pasting_report(surf14, [])


def test_smooth_pasting_report_all_absent():
    params = ModelParams(alpha=1.5, sigma=0.25, rate=0.0)
    surf = bermudan_surface(5, params, SPEC)
    rep = smooth_pasting_report(surf, extract_boundary(surf))
    assert rep.rows == ()
    assert math.isnan(rep.max_pasting_gap)
    assert rep.within_tol


# ---------------------------------------------------------------------------
# surface sampling and exports
# ---------------------------------------------------------------------------


def test_value_at_reproduces_grid_nodes(surf14):
    j = len(surf14.x) // 2
    S_node = float(surf14.spot_grid[j])
    assert surf14.value_at(S_node) == pytest.approx(surf14.values[0, j], rel=1e-12)


def test_value_at_monotone_in_spot(surf14):
    rng = np.random.default_rng(416)
    spots = np.sort(rng.uniform(55.0, 180.0, size=60))
    vals = surf14.value_at(spots)
    assert (np.diff(vals) <= 1e-10).all()


def test_slices_convex_in_spot(surf14):
    # probe with interpolation linear in S: it preserves the convexity of
    # the nodal values exactly, whereas a cubic rings at the payoff kink
    # and log-space chords bow below the linear exercise region
    spots = np.linspace(50.0, 150.0, 101)
    S_nodes = surf14.spot_grid
    for idx in (0, len(surf14.t) // 2, len(surf14.t) - 1):
        vals = np.interp(spots, S_nodes, surf14.values[idx])
        second = vals[:-2] - 2.0 * vals[1:-1] + vals[2:]
        assert second.min() >= -1e-6 * SPEC.strike


def test_slices_convex_at_their_own_nodes(surf14, surf20):
    # chord test on the surface's native (unevenly spaced in S) nodes
    for surf in (surf14, surf20):
        S = surf.spot_grid
        lam = (S[2:] - S[1:-1]) / (S[2:] - S[:-2])
        for idx in (0, len(surf.t) // 2, len(surf.t) - 1):
            V = surf.values[idx]
            defect = (V[1:-1] - (lam * V[:-2] + (1.0 - lam) * V[2:])).max()
            assert defect <= 1e-9 * SPEC.strike


def test_value_at_rejects_out_of_window(surf14):
    with pytest.raises(DomainError):
        surf14.value_at(1e-4)
    with pytest.raises(DomainError):
        surf14.value_at(-5.0)


def test_surface_csv_round_trip(tmp_path):
    surf = bermudan_surface(2, P14, SPEC)
    path = tmp_path / "surface.csv"
    surf.dump_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,x,S,V,exercise_flag"
    assert len(lines) == 1 + surf.values.size
    first = lines[1].split(",")
    assert float(first[0]) == 0.0
    assert float(first[3]) == pytest.approx(surf.values[0, 0], rel=1e-9)
    assert first[4] in {"0", "1"}


def test_boundary_csv(tmp_path, surf14):
    bounds = extract_boundary(surf14)
    path = tmp_path / "boundary.csv"
    dump_boundary_csv(bounds, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,S_star,pasting_gap"
    assert len(lines) == 1 + sum(not b.absent for b in bounds)
    t0 = lines[1].split(",")
    assert float(t0[1]) == pytest.approx(bounds[0].s_star, rel=1e-9)


# ---------------------------------------------------------------------------
# configuration handling
# ---------------------------------------------------------------------------


def test_narrow_window_is_widened_automatically():
    surf = bermudan_surface(4, P14, SPEC, ExerciseGrid(width=0.7))
    # the requested window cannot keep the boundary clear of the bottom,
    # so the induction reruns on a wider one
    assert surf.x[0] < math.log(SPEC.strike) - 1.0
    assert extract_boundary(surf)[0].s_star == pytest.approx(80.3, abs=1.0)


def test_level_validation():
    for bad in (-1, 13, 2.5, True):
        with pytest.raises(DomainError):
            bermudan_surface(bad, P14, SPEC)


def test_tolerance_validation():
    with pytest.raises(DomainError):
        american_price(0.0, P14, SPEC)
    with pytest.raises(DomainError):
        american_price(-1e-4, P14, SPEC)
    with pytest.raises(DomainError):
        american_price(1e-4, P14, SPEC, max_level=0)


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        ExerciseGrid(step=0.0)
    with pytest.raises(ConfigurationError):
        ExerciseGrid(width=0.3)
