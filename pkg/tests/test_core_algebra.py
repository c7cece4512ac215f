from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from harmgrad.errors import PreconditionError
from harmgrad.harness.fitting import fit_slope
from harmgrad.jets import Jet
from harmgrad.laurent import LaurentLog, solve_first_order
from harmgrad.profiles import GaussianBump, cutoff, cutoff_d1, smoothstep

cplx = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)
jets = st.lists(cplx, min_size=6, max_size=6).map(Jet)


@given(a=jets, b=jets, t=st.floats(-0.05, 0.05))
def test_jet_product_matches_pointwise_to_truncation(a, b, t):
    # the product jet agrees with the product of the polynomials up to O(t^6)
    err = abs((a * b)(t) - a(t) * b(t))
    scale = (1 + np.abs(a.coeffs).sum()) * (1 + np.abs(b.coeffs).sum())
    assert err <= 2 * scale * abs(t) ** 6 + 1e-14


@given(a=cplx)
def test_jet_exp_is_multiplicative(a):
    assert np.allclose((Jet.exp(a, 10) * Jet.exp(-a, 10)).coeffs, Jet.constant(1.0, 10).coeffs, atol=1e-12)


def test_jet_derivative_at_zero_and_power():
    j = Jet([1.0, 2.0, 3.0], 4)
    assert j.derivative_at_zero(2) == 6.0
    cube = j**3
    assert np.allclose(cube.coeffs[:3], [1.0, 6.0, 21.0])
    with pytest.raises(PreconditionError):
        j.derivative_at_zero(5)
    with pytest.raises(PreconditionError):
        j ** -1


def test_laurent_evaluation_branch():
    # z^(-1/2) at x1 = 1, eps = 0.5 (z = 1 - 0.5 i), principal branch
    v = LaurentLog.monomial(1.0, Fraction(-1, 2))(1.0, 0.5)
    assert abs(v - (0.9204420652599261 + 0.21728689675164017j)) < 1e-15


@given(p=st.fractions(-4, 4, max_denominator=4), q=st.integers(0, 2), c=cplx)
def test_laurent_antideriv_inverts_deriv(p, q, c):
    f = LaurentLog.monomial(c, p, q)
    back = f.antideriv().deriv()
    assert back.max_coeff_gap(f) < 1e-12 * (1 + abs(c))


@given(alpha=st.fractions(-3, 3, max_denominator=2), p=st.fractions(-4, 2, max_denominator=2))
def test_solve_first_order_residual(alpha, p):
    rhs = LaurentLog.monomial(1.0, p)
    y = solve_first_order(alpha, rhs)
    resid = y.deriv() + y.shift(-1) * float(alpha) - rhs
    assert resid.is_zero(1e-12)


def test_cutoff_profile():
    assert cutoff(0.0) == 1.0 and cutoff(0.5) == 1.0
    assert cutoff(1.0) == 0.0 and cutoff(1.5) == 0.0
    assert 0 < cutoff(0.75) < 1
    assert abs(smoothstep(0.5) - 0.5) < 1e-15
    t = np.linspace(0.55, 0.95, 9)
    h = 1e-6
    fd = (cutoff(t + h) - cutoff(t - h)) / (2 * h)
    assert np.allclose(fd, cutoff_d1(t), atol=1e-6)


def test_gaussian_bump_support_and_gradient():
    b = GaussianBump((0.1, 0.0, -0.1), 0.2, 0.6, 0.4)
    assert b.value([np.array(0.8), np.array(0.0), np.array(-0.1)]) == 0.0
    x = [np.array(0.25), np.array(0.1), np.array(0.05)]
    h = 1e-6
    g = b.grad(x)
    for a in range(3):
        xp = list(x)
        xm = list(x)
        xp[a] = x[a] + h
        xm[a] = x[a] - h
        assert abs((b.value(xp) - b.value(xm)) / (2 * h) - g[a]) < 1e-8


def test_fit_slope_examples():
    xs = np.array([1.0, 2.0, 4.0, 8.0])
    s, err = fit_slope(xs, 3 * xs**-2)
    assert abs(s + 2) < 1e-12 and err < 1e-12
    with pytest.raises(PreconditionError):
        fit_slope(xs[:3], xs[:3])
    with pytest.raises(PreconditionError):
        fit_slope(xs, -xs)
    with pytest.raises(PreconditionError):
        fit_slope(np.array([1.0, 3.0, 2.0, 4.0]), xs)


@given(p=st.floats(-6, 6), c=st.floats(0.1, 10))
def test_fit_slope_recovers_power_laws(p, c):
    xs = np.geomspace(1e-3, 1e-1, 6)
    s, _ = fit_slope(xs, c * xs**p)
    assert abs(s - p) < 1e-9
