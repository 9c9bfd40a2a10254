import math

import numpy as np
import pytest

from fmlslab import DomainError, GridSpec, build_table, density, get_table
from fmlslab.density import (
    char_exponent,
    exp_weighted_integral,
    tail_coefficients,
    tail_integral,
)

# Independently computed reference values for the unit-scale density.
DENSITY_POINTS = {
    (0.0, 1.3): 0.1949471870542157,
    (0.0, 1.4): 0.2268210870594683,
    (0.0, 1.5): 0.2488547826049302,
    (0.0, 1.7): 0.2731683375638171,
    (0.0, 1.9): 0.2814917838791972,
    (0.0, 2.0): 0.2820947917738781,
    (0.5, 1.5): 0.1712790526343199,
    (1.0, 1.5): 0.1119827070386056,
    (-0.5, 1.5): 0.3238885612893531,
    (-2.0, 1.5): 0.1655582410372451,
    (3.0, 1.5): 0.02252530707401720,
    (10.0, 1.5): 1.329427260111208e-3,
    (-2.0, 1.4): 0.1760252708094612,
    (1.0, 1.4): 0.09019345947783314,
    (10.0, 1.4): 1.422122917099586e-3,
    (-2.0, 1.3): 0.1540823184441606,
    (10.0, 1.3): 1.369441411102693e-3,
    (1.0, 1.9): 0.1990318723630068,
}


def test_char_exponent_structure():
    # (ik)^alpha has negative real part for every real k != 0
    for a in (1.2, 1.5, 1.9, 2.0):
        z = char_exponent(np.array([-3.0, -0.5, 0.5, 3.0]), a)
        assert np.all(z.real < 0.0)
    # alpha = 2 is exactly -k^2
    z = char_exponent(np.array([0.7, 2.0]), 2.0)
    assert np.allclose(z.real, [-0.49, -4.0], atol=1e-12)
    assert np.allclose(z.imag, 0.0, atol=1e-10)


def test_char_exponent_conjugate_symmetry():
    for a in (1.3, 1.7):
        assert char_exponent(2.5, a) == pytest.approx(
            np.conj(char_exponent(-2.5, a)), rel=1e-14
        )


def test_density_pointwise_against_references():
    for (m, a), ref in DENSITY_POINTS.items():
        assert density(m, a) == pytest.approx(ref, abs=1e-12), (m, a)


def test_density_alpha2_is_gaussian_variance_two():
    ms = np.linspace(-4.0, 4.0, 17)
    gauss = np.exp(-0.25 * ms**2) / (2.0 * math.sqrt(math.pi))
    assert np.allclose(density(ms, 2.0), gauss, atol=1e-13)


def test_density_rejects_bad_arguments():
    with pytest.raises(DomainError):
        density(0.0, 1.0)
    with pytest.raises(DomainError):
        density(0.0, 2.5)
    with pytest.raises(DomainError):
        density(0.0, 1.5, tol=-1e-9)


def test_tail_coefficients_known_values():
    known = {
        1.3: (0.300449441708, -0.562628600595),
        1.4: (0.376042784568, -0.439134966571),
        1.7: (0.397784575551, 1.534254561036),
        1.9: (0.179744428045, 1.668712872969),
    }
    for a, (r1, r2) in known.items():
        a1, a2 = tail_coefficients(a)
        assert a1 == pytest.approx(r1, abs=1e-10)
        assert a2 == pytest.approx(r2, abs=1e-10)
    assert tail_coefficients(2.0) == (0.0, 0.0)


def test_table_matches_pointwise_density():
    tab = get_table(1.4)
    for (m, a), ref in DENSITY_POINTS.items():
        if a != 1.4:
            continue
        idx = int(round((m - tab.left_cut) / tab.step))
        assert tab.values[idx] == pytest.approx(ref, abs=2e-12)


def test_table_normalization_all_alphas():
    for a in (1.3, 1.4, 1.5, 1.7, 1.9, 2.0):
        tab = get_table(a)
        assert abs(tab.cum_tail[0] - 1.0) < 1e-9


def test_table_fitted_tail_exponent():
    for a in (1.3, 1.5, 1.9):
        tab = get_table(a)
        assert tab.tail_exponent == pytest.approx(-(1.0 + a), abs=0.05)
    assert get_table(2.0).tail_exponent is None


def test_table_left_support_is_clipped():
    # the left wing decays faster than any exponential, so the tabulated
    # support must start well inside the window
    for a, lo, hi in ((1.3, -6.0, -2.0), (1.4, -7.0, -3.0), (2.0, -12.0, -9.0)):
        tab = get_table(a)
        assert lo < tab.support_left < hi
        assert np.all(tab.values >= 0.0)


def test_moment_identity_exponential_weight():
    # integral of exp(-theta m) f(m) dm = exp(theta^alpha)
    for a in (1.3, 1.4, 1.5, 1.7, 1.9, 2.0):
        tab = get_table(a)
        for th in (0.1, 0.5, 1.0):
            got = exp_weighted_integral(-np.inf, th, tab)
            assert got == pytest.approx(math.exp(th**a), abs=1e-8), (a, th)


def test_partial_integrals_against_references():
    t14 = get_table(1.4)
    t17 = get_table(1.7)
    t19 = get_table(1.9)
    t15 = get_table(1.5)
    assert tail_integral(0.5, t14) == pytest.approx(0.19438099553293, abs=5e-10)
    assert exp_weighted_integral(0.5, 0.2227, t14) == pytest.approx(
        0.12247088837027, abs=5e-10
    )
    assert tail_integral(-1.2, t17) == pytest.approx(0.75826415577855, abs=5e-10)
    assert exp_weighted_integral(-1.2, 0.6, t17) == pytest.approx(
        0.73256350799408, abs=5e-10
    )
    assert exp_weighted_integral(3.0, 1.0, t19) == pytest.approx(
        0.00067425886372, abs=5e-10
    )
    assert exp_weighted_integral(0.0, 0.5, t15) == pytest.approx(
        0.19340197764228, abs=5e-10
    )
    # small-theta regime where the effective support stretches to m ~ 1/theta
    assert exp_weighted_integral(-0.045, 0.0016, t14) == pytest.approx(
        0.294988518745, abs=5e-9
    )


def test_tail_integral_limits_and_monotonicity():
    tab = get_table(1.5)
    assert tail_integral(-np.inf, tab) == pytest.approx(1.0, abs=1e-9)
    assert tail_integral(np.inf, tab) == 0.0
    ds = np.linspace(-3.0, 30.0, 200)
    vals = tail_integral(ds, tab)
    assert np.all(np.diff(vals) <= 1e-15)
    assert np.all((vals >= 0.0) & (vals <= 1.0 + 1e-9))


def test_tail_integral_interpolation_consistency():
    # off-grid cuts agree with adaptive quadrature of the pointwise density
    from scipy.integrate import quad

    tab = get_table(1.5)
    for d in (0.1234, -0.87654, 2.00001, 7.7777):
        core, err = quad(lambda m: density(m, 1.5), d, 40.0, limit=200, epsabs=1e-11)
        ref = core + tail_integral(40.0, tab)
        assert err < 1e-9
        assert tail_integral(d, tab) == pytest.approx(ref, abs=1e-8)


def test_exp_weighted_rejects_negative_theta():
    tab = get_table(1.5)
    with pytest.raises(DomainError):
        exp_weighted_integral(0.0, -0.1, tab)


def test_grid_spec_validation():
    with pytest.raises(DomainError):
        GridSpec(m_left=10.0, m_right=-10.0)
    with pytest.raises(DomainError):
        GridSpec(step=0.0)


def test_custom_grid_spec_build():
    tab = build_table(1.6, GridSpec(m_left=-20.0, m_right=120.0, step=0.01))
    assert abs(tab.cum_tail[0] - 1.0) < 1e-7
    idx = int(round((0.0 - tab.left_cut) / tab.step))
    assert tab.values[idx] == pytest.approx(density(0.0, 1.6), abs=1e-10)


def test_density_csv_dump(tmp_path):
    tab = get_table(1.5)
    out = tmp_path / "density.csv"
    tab.dump_csv(out)
    header = out.read_text().splitlines()[0]
    assert header == "m,f"
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (len(tab.abscissae), 2)
    assert data[0, 0] == tab.left_cut
