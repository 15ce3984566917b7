import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import qmc

from pinstring import (
    DomainError,
    PinnedKernel,
    SpaceTimeGrid,
    ValidationError,
    c1_constant,
    check_variance_bounds,
    conditional_variance,
    covariance,
    f_value,
    gram_matrix,
    increment_variance,
    plancherel_constant,
    point_variance,
)
from pinstring.selftest import F0_CLOSED_FORM, run_selftest

INV_SQRT_2PI = (2 * math.pi) ** -0.5
MIXED = PinnedKernel(form="mixed")
STAT = PinnedKernel(form="stationary")

times = st.floats(0, 3, allow_nan=False)
# T - t must be exact in floating point for the reversal identity
reversal_times = st.floats(0, 2).filter(lambda v: v == 0 or v > 1e-9)
places = st.floats(-3, 3, allow_nan=False)


def f_oracle(a):
    """Direct 2-d quadrature of the smoothed |z| + |z'| - |z - z'| over G_1 x G_1."""
    g = lambda z: math.exp(-(a - z) ** 2 / 4) / math.sqrt(4 * math.pi)
    val, _ = integrate.dblquad(lambda z2, z1: g(z1) * g(z2) * (abs(z1) + abs(z2) - abs(z1 - z2)),
                               a - 12, a + 12, a - 12, a + 12, epsabs=1e-10)
    return INV_SQRT_2PI + 0.5 * val


# ---- F --------------------------------------------------------------------

def test_f_at_zero_matches_closed_form():
    assert F0_CLOSED_FORM == pytest.approx(0.7294368867, abs=1e-9)
    assert abs(f_value(0.0) - 0.729427) <= 1e-5
    assert f_value(0.0) == pytest.approx(F0_CLOSED_FORM, abs=1e-8)


@pytest.mark.parametrize("a", [0.3, 1.0, 2.5])
def test_f_matches_double_integral(a):
    assert f_value(a) == pytest.approx(f_oracle(a), abs=1e-7)


@pytest.mark.parametrize("a", [0.0, 1.0, 5.0])
def test_f_lower_bound_examples(a):
    assert f_value(a) >= 0.398942


def test_f_linear_growth():
    for a in (10.0, 50.0, 200.0):
        assert 0.98 <= f_value(a) / a <= 1.02 or a == 10.0
    assert abs(f_value(200.0) / 200 - 1) < 0.005


def test_f_asymptote_is_continuous_at_cutoff():
    assert f_value(50.0 + 1e-9) == pytest.approx(f_value(50.0), abs=1e-7)
    # the offset is the constant -(2 pi)^{-1/2}
    assert f_value(80.0) - 80.0 == pytest.approx(-INV_SQRT_2PI, abs=1e-8)


def test_f_monotone():
    a = np.linspace(0, 60, 301)
    vals = np.array([f_value(x) for x in a])
    assert np.all(np.diff(vals) >= -2e-8)


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), -0.1])
def test_f_rejects_bad_input(bad):
    with pytest.raises(DomainError):
        f_value(bad)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 60))
def test_f_bounded_below(a):
    assert f_value(a) >= INV_SQRT_2PI - 1e-8


def test_cached_profile_matches_direct_quadrature():
    a = np.linspace(0, 49.9, 137)
    for k in (MIXED, STAT):
        direct = np.array([k.profile(x) for x in a])
        assert np.max(np.abs(k.profile_array(a) - direct)) < 1e-6


# ---- Plancherel --------------------------------------------------------------

def test_plancherel_constant_is_one_half():
    assert plancherel_constant() == pytest.approx(0.5, abs=1e-6)


def test_plancherel_integrand_limit_at_origin():
    eta = 1e-6
    assert 2 * (1 - math.cos(eta)) / eta**2 == pytest.approx(1.0, abs=1e-3)


# ---- increments and covariances ------------------------------------------------

def test_equal_time_increment_is_exact():
    assert increment_variance((1.0, 0.3), (1.0, 0.8)) == 0.5


def test_increment_at_same_place_uses_f_at_zero():
    assert abs(increment_variance((2, 0), (1, 0), MIXED) - 0.729427) <= 1e-5
    # the stationary form uses E|N(0, 1)|
    assert increment_variance((2, 0), (1, 0)) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-8)


def test_increment_identical_points():
    assert increment_variance((1.5, -0.2), (1.5, -0.2)) == 0.0


def test_point_variance_examples():
    assert point_variance((0, 3)) == 3
    assert abs(point_variance((4, 0), MIXED) - 1.458854) <= 2e-5
    assert point_variance((0, 0)) == 0


def test_covariance_examples():
    assert covariance((0, 1), (0, 2)) == pytest.approx(1.0, abs=1e-15)
    assert covariance((1.3, -0.4), (0, 0)) == pytest.approx(0.0, abs=1e-15)
    assert abs(covariance((4, 0), (4, 0), MIXED) - 1.458854) <= 2e-5


def test_tiny_time_gap_uses_spatial_rule():
    assert increment_variance((1.0, 0.0), (1.0 + 1e-15, 0.5)) == 0.5


@pytest.mark.parametrize("bad", [(-1.0, 0.0), (float("nan"), 0.0), (1.0, float("inf"))])
def test_invalid_points_rejected(bad):
    with pytest.raises(DomainError):
        increment_variance(bad, (0.0, 0.0))


@settings(max_examples=100, deadline=None)
@given(times, places, places)
def test_spatial_rule_property(t, x, y):
    for k in (MIXED, STAT):
        assert abs(k.increment_variance((t, x), (t, y)) - abs(x - y)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(times, places, times, places, st.sampled_from([0.5, 1.0, 2.0, 3.0]))
def test_scaling_property(t, x, s, y, L):
    for k in (MIXED, STAT):
        base = k.increment_variance((t, x), (s, y))
        scaled = k.increment_variance((L**4 * t, L**2 * x), (L**4 * s, L**2 * y))
        assert scaled == pytest.approx(L**2 * base, rel=1e-9, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(times, places, times, places, st.floats(0, 5), st.floats(-5, 5))
def test_translation_property(t, x, s, y, dt, dx):
    base = STAT.increment_variance((t, x), (s, y))
    moved = STAT.increment_variance((t + dt, x + dx), (s + dt, y + dx))
    assert moved == pytest.approx(base, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(reversal_times, places, reversal_times, places)
def test_time_reversal_property(t, x, s, y):
    T = 2.0
    for k in (MIXED, STAT):
        vp = k.increment_variance((T - t, x), (T, 0.0))
        vq = k.increment_variance((T - s, y), (T, 0.0))
        rev = 0.5 * (vp + vq - k.increment_variance((T - t, x), (T - s, y)))
        assert rev == pytest.approx(k.covariance((t, x), (s, y)), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(times, places, times, places)
def test_increment_symmetric(t, x, s, y):
    assert STAT.increment_variance((t, x), (s, y)) == STAT.increment_variance((s, y), (t, x))


# ---- Gram matrices ---------------------------------------------------------------

def test_gram_single_point():
    g = gram_matrix(SpaceTimeGrid([0.0], [1.0]))
    assert g.shape == (1, 1) and g[0, 0] == 1.0


def test_gram_axis_points_brownian():
    xs = np.array([-2.0, -0.5, 0.25, 1.0, 3.0])
    g = gram_matrix(SpaceTimeGrid(np.zeros(5), xs))
    expect = 0.5 * (np.abs(xs)[:, None] + np.abs(xs)[None, :] - np.abs(xs[:, None] - xs[None, :]))
    assert np.allclose(g, expect, atol=1e-15)


def test_gram_pin_row_is_zero():
    grid = SpaceTimeGrid([0.0, 0.0, 1.0], [0.0, 1.0, 0.5])
    g = gram_matrix(grid)
    assert np.all(g[0] == 0) and np.all(g[:, 0] == 0)


def test_gram_duplicate_points_rejected():
    with pytest.raises(ValidationError):
        SpaceTimeGrid([1.0, 1.0], [0.5, 0.5])


def test_gram_symmetric_nonnegative_diagonal():
    rng = np.random.default_rng(3)
    g = gram_matrix(SpaceTimeGrid(rng.uniform(0, 2, 30), rng.uniform(-2, 2, 30)))
    assert np.array_equal(g, g.T) and np.all(np.diag(g) >= 0)


def test_gram_psd_stationary_form():
    rng = np.random.default_rng(11)
    for _ in range(50):
        k = int(rng.integers(2, 41))
        g = STAT.gram_matrix(SpaceTimeGrid(rng.uniform(0, 2, k), rng.uniform(-2, 2, k)))
        assert np.linalg.eigvalsh(g)[0] >= -1e-8 * np.max(np.diag(g))


def test_mixed_form_is_not_positive_semidefinite():
    # documents why the stationary form is the default
    from pinstring.probe import hit_events
    g = MIXED.gram_matrix(hit_events(1, 1).grid)
    assert np.linalg.eigvalsh(g)[0] < -1e-3 * np.max(np.diag(g))


# ---- constants and bounds --------------------------------------------------------------

def test_c1_constant():
    c1 = c1_constant()
    assert 0 < c1 <= (8 * math.pi) ** -0.5 + 1e-15
    assert c1 <= 0.2


def test_c1_identity_profile():
    assert c1_constant(profile=lambda z: z) == pytest.approx((8 * math.pi) ** -0.5)


def test_conditional_variance_examples():
    assert conditional_variance(2.0, 3.0, 0.0) == 2.0
    assert conditional_variance(1.0, 1.0, 1.0) == 0.0
    assert conditional_variance(1.0, 4.0, 1.0) == pytest.approx(0.75)
    with pytest.raises(DomainError):
        conditional_variance(1.0, 1.0, 1.5)


def test_check_variance_bounds_examples():
    assert check_variance_bounds((1.0, 0.2), (1.0, 0.9))
    assert check_variance_bounds((1.0, 0.2), (1.0, 0.2))


def test_check_variance_bounds_sweep():
    pts = qmc.Sobol(4, seed=5).random(1024)[:1000]
    t, s = 2 * pts[:, 0], 2 * pts[:, 1]
    x, y = 4 * pts[:, 2] - 2, 4 * pts[:, 3] - 2
    for k in (MIXED, STAT):
        assert all(k.check_variance_bounds((a, b), (c, d)) for a, b, c, d in zip(t, x, s, y))


def test_selftest_default_form_passes():
    rows = run_selftest()
    assert all(ok for _, ok, _ in rows), rows
    assert any("0.500000000" in detail for name, _, detail in rows if name == "plancherel_constant")
