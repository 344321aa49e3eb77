"""Slope-kernel function F, its fast table, and the exterior tail bound."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracstick.errors import DomainError
from fracstick.kernel import (
    FastF,
    eval_F,
    eval_F_infinity,
    exterior_tail_bound,
    get_fast_F,
    graph_far_tail,
    sphere_area,
)
from fracstick.params import FractionalParams

P15 = FractionalParams(1, 0.5)

# frozen golden value: adaptive quadrature of (1+tau^2)^(-1.25) on [0, 1],
# refined until 12 digits were stable
F_ONE_GOLDEN = 0.744303079760
# closed-form limit for n=1, s=0.5 (Wallis integral)
F_INF_GOLDEN = 1.198140234736


def gauss_oracle(t, p, n_nodes=200):
    """Independent fixed-order Gauss rule on the tan-substituted integrand."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    theta = math.atan(t)
    nodes = 0.5 * theta * (x + 1.0)
    return float(0.5 * theta * (w @ np.cos(nodes) ** (2 * p - 2)))


def test_F_zero_is_zero():
    assert eval_F(0.0, P15) == 0.0


def test_F_one_golden():
    assert eval_F(1.0, P15) == pytest.approx(F_ONE_GOLDEN, rel=1e-10)
    assert gauss_oracle(1.0, P15.kernel_power) == pytest.approx(F_ONE_GOLDEN, rel=1e-10)


def test_F_odd_pairs_sum_to_zero(rng):
    for t in rng.uniform(-10, 10, 100):
        assert abs(eval_F(t, P15) + eval_F(-t, P15)) < 1e-12


def test_F_strictly_increasing(rng):
    ts = np.sort(rng.uniform(-10, 10, 100))
    vals = [eval_F(t, P15) for t in ts]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_F_bounded_by_infinity(rng):
    f_inf = eval_F_infinity(P15)
    for t in rng.uniform(-50, 50, 100):
        assert abs(eval_F(t, P15)) <= f_inf


def test_F_infinity_golden_and_quadrature_oracle():
    f_inf = eval_F_infinity(P15)
    assert f_inf == pytest.approx(F_INF_GOLDEN, rel=1e-10)
    # tan-substitution oracle on (0, pi/2); integrand cos(theta)^s is smooth
    x, w = np.polynomial.legendre.leggauss(400)
    nodes = 0.25 * math.pi * (x + 1.0)
    oracle = float(0.25 * math.pi * (w @ np.cos(nodes) ** 0.5))
    assert f_inf == pytest.approx(oracle, rel=1e-8)
    assert f_inf > 0


def test_F_infinity_monotone_in_dimension():
    for s in (0.3, 0.5, 0.7, 0.9):
        assert eval_F_infinity(FractionalParams(2, s)) < eval_F_infinity(FractionalParams(1, s))


def test_F_stays_below_infinity():
    f_inf = eval_F_infinity(P15)
    for t in (0.1, 1.0, 10.0, 100.0, 1e6):
        assert eval_F(t, P15) < f_inf


@pytest.mark.parametrize("h", [1e-3, 1e-4])
@pytest.mark.parametrize("t", [-2.3, -0.4, 0.0, 0.7, 3.1])
def test_F_derivative_matches_kernel(t, h):
    fd = (eval_F(t + h, P15) - eval_F(t - h, P15)) / (2 * h)
    exact = (1 + t * t) ** (-P15.kernel_power)
    assert abs(fd - exact) <= 5 * h * h + 2e-8


def test_F_rejects_non_finite():
    with pytest.raises(DomainError):
        eval_F(float("nan"), P15)
    with pytest.raises(DomainError):
        eval_F(float("inf"), P15)


@given(t=st.floats(-40.0, 40.0))
@settings(max_examples=60, deadline=None, database=None, derandomize=True)
def test_fast_table_odd_and_bounded(t):
    ff = get_fast_F(P15)
    assert ff(t) == -ff(-t)
    assert abs(ff(t)) <= ff.f_inf


def test_fast_table_certified_against_quadrature(rng):
    """The hot-path interpolant must stay within 1e-8 of the quadrature oracle."""
    ff = get_fast_F(P15)
    ts = np.concatenate([rng.uniform(-30, 30, 9_900), rng.uniform(-0.01, 0.01, 100)])
    fast = ff(ts)
    worst = 0.0
    for t, v in zip(ts[::7], fast[::7]):  # quadrature on a deterministic subsample
        worst = max(worst, abs(v - eval_F(float(t), P15)))
    assert worst <= 1e-8
    # monotone interpolant: table differences all positive
    assert np.all(np.diff(ff._table) > 0)


def test_fast_table_seam_continuity():
    ff = get_fast_F(FractionalParams(2, 0.7))
    ts = np.linspace(ff.TABLE_T_MAX - 0.1, ff.TABLE_T_MAX + 0.1, 201)
    vals = ff(ts)
    assert np.all(np.diff(vals) > 0)
    assert abs(ff(ff.TABLE_T_MAX + 1e-9) - ff(ff.TABLE_T_MAX - 1e-9)) < 1e-10


def test_tail_bound_scaling_exact():
    b1 = exterior_tail_bound(1.0, P15)
    b2 = exterior_tail_bound(2.0, P15)
    assert b2 / b1 == pytest.approx(2 ** (-P15.s), rel=1e-14)


def test_tail_bound_vanishes_at_infinity():
    assert exterior_tail_bound(1e12, P15) < 1e-5


def test_tail_bound_rejects_bad_radius():
    with pytest.raises(DomainError):
        exterior_tail_bound(0.0, P15)
    with pytest.raises(DomainError):
        exterior_tail_bound(-1.0, P15)


def exterior_mass_oracle(mu, params):
    """Polar quadrature of the kernel mass outside the cylinder box K_mu."""
    s = params.s
    if params.n == 1:
        theta = np.linspace(0, 2 * math.pi, 4001)[:-1]
        r_exit = mu / np.maximum(np.abs(np.cos(theta)), np.abs(np.sin(theta)))
        return float(np.mean(r_exit ** (-s)) * 2 * math.pi / s)
    phi = np.linspace(0, math.pi, 4001)[1:-1]
    r_exit = mu / np.maximum(np.sin(phi), np.abs(np.cos(phi)))
    integrand = np.sin(phi) * r_exit ** (-s) / s
    return float(2 * math.pi * np.trapezoid(integrand, phi))


@pytest.mark.parametrize("params", [FractionalParams(1, 0.5), FractionalParams(2, 0.5),
                                    FractionalParams(1, 0.3), FractionalParams(2, 0.8)])
def test_tail_bound_dominates_exterior_mass(params):
    for mu in (0.5, 1.0, 3.0):
        assert exterior_tail_bound(mu, params) >= exterior_mass_oracle(mu, params)


def test_sphere_areas():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_far_tail_zero_level():
    ff = get_fast_F(P15)
    assert graph_far_tail(0.0, 2.0, P15, ff) == 0.0


def test_far_tail_against_brute_quadrature():
    from scipy import integrate

    ff = get_fast_F(P15)
    delta, R = 0.37, 2.0
    val = graph_far_tail(delta, R, P15, ff)
    brute, _ = integrate.quad(lambda r: ff(delta / r) * r ** (-1.5), R, np.inf, limit=200)
    assert val == pytest.approx(2.0 * brute, rel=1e-7)  # two rays in 1-D
