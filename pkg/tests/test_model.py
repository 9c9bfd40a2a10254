import math

import numpy as np
import pytest

from fmlslab import (
    DomainError,
    ModelParams,
    OptionSpec,
    convexity_adjustment,
    drift_adjustment,
    nu_matched_sigma,
    payoff_put,
    to_reduced,
)
from fmlslab.model import d1


def test_convexity_adjustment_reduces_to_half_sigma_squared_at_two():
    assert convexity_adjustment(2.0, 0.25) == pytest.approx(0.03125, abs=1e-15)
    assert convexity_adjustment(2.0, 0.1) == 0.5 * 0.1**2


def test_convexity_adjustment_positive_and_known_values():
    # nu = -sigma^alpha sec(pi alpha / 2) / 2, frozen at sigma = 0.25
    known = {
        1.3: 0.1816541193,
        1.4: 0.122142648,
        1.5: 0.0883883476,
        1.7: 0.0531602647,
        1.9: 0.036344282,
        2.0: 0.03125,
    }
    for a, ref in known.items():
        nu = convexity_adjustment(a, 0.25)
        assert nu > 0.0
        assert nu == pytest.approx(ref, abs=1e-9)


def test_drift_adjustment_is_minus_twice_convexity():
    for a in (1.2, 1.5, 1.8, 2.0):
        assert drift_adjustment(a, 0.3) == pytest.approx(
            -2.0 * convexity_adjustment(a, 0.3), rel=1e-15
        )


@pytest.mark.parametrize("alpha", [0.9, 1.0, 2.0001, -1.0])
def test_params_reject_tail_index_outside_range(alpha):
    with pytest.raises(DomainError):
        ModelParams(alpha=alpha, sigma=0.25, rate=0.05)


def test_params_reject_bad_sigma_and_skew():
    with pytest.raises(DomainError):
        ModelParams(alpha=1.5, sigma=0.0, rate=0.05)
    with pytest.raises(DomainError):
        ModelParams(alpha=1.5, sigma=-0.2, rate=0.05)
    with pytest.raises(DomainError):
        ModelParams(alpha=1.5, sigma=0.25, rate=0.05, skew=0.5)


def test_option_spec_validation():
    with pytest.raises(DomainError):
        OptionSpec(strike=-5.0, expiry=1.0)
    with pytest.raises(DomainError):
        OptionSpec(strike=100.0, expiry=0.0)
    with pytest.raises(DomainError):
        OptionSpec(strike=100.0, expiry=1.0, payoff_kind="call")


def test_reduced_coordinates_roundtrip():
    params = ModelParams(alpha=1.4, sigma=0.25, rate=0.05)
    spec = OptionSpec(strike=100.0, expiry=1.0)
    coords = to_reduced(0.0, params, spec)
    nu = convexity_adjustment(1.4, 0.25)
    assert coords.nu == pytest.approx(nu, rel=1e-14)
    assert coords.tau == pytest.approx(nu * 1.0, rel=1e-14)
    # gamma * tau must equal r * (T - t) independent of alpha
    assert coords.gamma * coords.tau == pytest.approx(0.05, rel=1e-13)
    assert coords.theta == pytest.approx(coords.tau ** (1.0 / 1.4), rel=1e-14)


def test_reduced_time_shrinks_to_zero_at_expiry():
    params = ModelParams(alpha=1.6, sigma=0.2, rate=0.03)
    spec = OptionSpec(strike=80.0, expiry=2.0)
    coords = to_reduced(2.0, params, spec)
    assert coords.tau == 0.0
    assert coords.theta == 0.0
    with pytest.raises(DomainError):
        to_reduced(2.5, params, spec)


def test_payoff_put_scalar_and_array():
    assert payoff_put(90.0, 100.0) == 10.0
    assert payoff_put(130.0, 100.0) == 0.0
    out = payoff_put(np.array([60.0, 100.0, 140.0]), 100.0)
    assert np.allclose(out, [40.0, 0.0, 0.0])


def test_cutoff_alpha2_matches_lognormal_quantile():
    # at alpha = 2 the cutoff reduces to the classical -d2 rescaled by sqrt(2):
    # frozen value for S=K=100, r=0.05, sigma=0.25, T=1
    params = ModelParams(alpha=2.0, sigma=0.25, rate=0.05)
    spec = OptionSpec(strike=100.0, expiry=1.0)
    coords = to_reduced(0.0, params, spec)
    val = d1(math.log(100.0), 100.0, coords, 2.0)
    assert val == pytest.approx(0.10606601717798211, abs=1e-13)


def test_cutoff_increases_with_log_spot():
    params = ModelParams(alpha=1.5, sigma=0.25, rate=0.05)
    spec = OptionSpec(strike=100.0, expiry=1.0)
    coords = to_reduced(0.0, params, spec)
    xs = np.linspace(math.log(60.0), math.log(180.0), 25)
    vals = d1(xs, 100.0, coords, 1.5)
    assert np.all(np.diff(vals) > 0.0)


def test_nu_matched_sigma_recovers_reference_at_two_and_midpoint():
    assert nu_matched_sigma(2.0, 0.25) == pytest.approx(0.25, rel=1e-14)
    # frozen: the sigma that equates nu(alpha, sigma) with nu(2, 0.25)
    assert nu_matched_sigma(1.5, 0.25) == pytest.approx(0.125, abs=1e-12)
    assert nu_matched_sigma(1.3, 0.25) == pytest.approx(0.064557050293, abs=1e-10)
    assert nu_matched_sigma(1.9, 0.25) == pytest.approx(0.230898453097, abs=1e-10)
    # and the matching property itself
    for a in (1.3, 1.5, 1.9):
        s = nu_matched_sigma(a, 0.25)
        assert convexity_adjustment(a, s) == pytest.approx(
            convexity_adjustment(2.0, 0.25), rel=1e-12
        )
