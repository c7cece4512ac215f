import numpy as np
import pytest
from hypothesis import given, strategies as st

from harmgrad.errors import InvalidGridError, UnsupportedDomainError
from harmgrad.fields import (Field, Grid, collar_mask, dirichlet_solve, divergence, gradient,
                             green_dirichlet, integrate, integrate_array, laplacian, partial,
                             simpson_weights)

coef = st.floats(-2, 2, allow_nan=False)


def test_grid_validation():
    with pytest.raises(InvalidGridError):
        Grid(((0, 1), (0, 1)), (4, 16))
    with pytest.raises(InvalidGridError):
        Grid(((0, 0), (0, 1)), (16, 16))
    with pytest.raises(InvalidGridError):
        Grid(((0, 1),), (16,))


def test_field_shape_and_finiteness():
    g = Grid.cube(0, 1, 9, dim=2)
    with pytest.raises(InvalidGridError):
        Field(g, np.zeros((3, 3)))
    with pytest.raises(InvalidGridError):
        Field(g, np.full((9, 9), np.nan))
    f = Field(g, 1.0)
    assert f.values.shape == (9, 9) and not f.values.flags.writeable


def test_field_bytes_roundtrip():
    g = Grid(((-1, 1), (0, 2), (0, 1)), (9, 10, 11))
    rng = np.random.default_rng(0)
    f = Field(g, rng.normal(size=(3, 9, 10, 11)) + 1j * rng.normal(size=(3, 9, 10, 11)), 1)
    h = Field.from_bytes(f.to_bytes())
    assert h.grid == g and h.rank == 1
    assert np.array_equal(h.values, f.values)


@pytest.mark.parametrize("method,deg", [("fd2", 2), ("fd4", 4), ("fd6", 6)])
@given(c=st.lists(coef, min_size=7, max_size=7))
def test_fd_exact_on_polynomials(method, deg, c):
    # a stencil of accuracy p differentiates degree-p polynomials exactly
    g = Grid(((-1, 1), (0, 1)), (17, 12))
    x, y = g.coords()
    p = sum(c[k] * x**k for k in range(deg + 1)) + 0 * y
    dp = sum(k * c[k] * x ** (k - 1) for k in range(1, deg + 1)) + 0 * y
    got = partial(p, g, 0, 1, method)
    assert np.max(np.abs(got - dp)) < 1e-9 * (1 + np.max(np.abs(dp)))


def test_fd_convergence_orders():
    errs = {m: [] for m in ("fd2", "fd4", "fd6")}
    ns = [17, 33, 65, 129]
    for n in ns:
        g = Grid(((0, 1), (0, 1)), (n, 9))
        x, y = g.coords()
        for m in errs:
            d = partial(np.sin(3 * x) + 0 * y, g, 0, 1, m)
            errs[m].append(np.max(np.abs(d - 3 * np.cos(3 * x))))
    for m, p in (("fd2", 2), ("fd4", 4), ("fd6", 6)):
        slope = np.polyfit(np.log(ns), np.log(errs[m]), 1)[0]
        assert abs(-slope - p) < 0.3


def test_periodic_derivative_keeps_real_dtype():
    g = Grid(((0, 2 * np.pi), (0, 1)), (33, 9))
    x, y = g.coords()
    v = np.sin(2 * x) + 0 * y
    d = partial(v, g, 0, 1, "periodic")
    assert d.dtype == np.float64


def test_gradient_divergence_laplacian_consistent():
    g = Grid.cube(-1, 1, 17)
    f = Field.from_function(g, lambda x: x[0] ** 2 * x[1] + x[2] ** 3)
    lap = laplacian(f, "fd4")
    div_grad = divergence(gradient(f, "fd4"), "fd4")
    x = g.coords()
    exact = 2 * x[1] + 6 * x[2] + 0 * x[0]
    assert np.max(np.abs(lap.values - exact)) < 1e-9
    assert np.max(np.abs(div_grad.values - exact)) < 1e-9


@given(n=st.integers(5, 40))
def test_simpson_exact_on_cubics(n):
    w = simpson_weights(n, 1.0 / (n - 1))
    t = np.linspace(0, 1, n)
    for k in range(4):
        assert abs(w @ t**k - 1.0 / (k + 1)) < 1e-12


def test_integrate_monomials():
    g = Grid(((0, 1), (-1, 2), (0, 2)), (11, 12, 9))
    f = Field.from_function(g, lambda x: x[0] ** 3 * x[1] ** 2 + x[2] + 0 * x[0])
    exact = 0.25 * 3 * 2 + 1 * 3 * 2
    assert abs(integrate(f) - exact) < 1e-12


def test_dirichlet_solve_inverts_sine_laplacian():
    g = Grid(((0, 1), (0, 2), (0, 1)), (17, 21, 13))
    rng = np.random.default_rng(1)
    src = rng.normal(size=g.resolution)
    u = green_dirichlet(Field(g, src))
    assert np.all(u.values[0] == 0) and np.all(u.values[:, -1] == 0)
    lap = laplacian(u, "sine").values
    inner = (slice(1, -1),) * 3
    assert np.max(np.abs(lap[inner] - src[inner])) < 1e-10


def test_dirichlet_solve_real_and_leading_axes():
    g = Grid.cube(0, 1, 9)
    rng = np.random.default_rng(2)
    src = rng.normal(size=(2,) + g.resolution)
    u = dirichlet_solve(src, g, leading=1)
    assert u.dtype == np.float64
    assert np.allclose(u[1], dirichlet_solve(src[1], g))


def test_dirichlet_second_order_vs_exact():
    # u = sin(pi x) sin(pi y) sin(pi z) is an eigenfunction: exact to round-off
    g = Grid.cube(0, 1, 17)
    x = g.coords()
    u = np.sin(np.pi * x[0]) * np.sin(np.pi * x[1]) * np.sin(np.pi * x[2])
    got = green_dirichlet(Field(g, -3 * np.pi**2 * u)).values
    assert np.max(np.abs(got - u)) < 1e-13


def test_green_dirichlet_rejects_arrays():
    with pytest.raises(UnsupportedDomainError):
        green_dirichlet(np.zeros((9, 9, 9)))


def test_collar_mask_counts():
    g = Grid.cube(0, 1, 10)
    m = collar_mask(g, 2)
    assert m.sum() == 10**3 - 6**3


def test_integrate_array_leading_axes():
    g = Grid.cube(0, 1, 9, dim=2)
    vals = np.stack([np.ones(g.resolution), 2 * np.ones(g.resolution)])
    assert np.allclose(integrate_array(vals, g), [1.0, 2.0])


def test_sine_derivative_fourth_order():
    ns = [17, 33, 65, 129]
    errs = []
    for n in ns:
        g = Grid(((0, 1), (0, 1)), (n, 9))
        x, y = g.coords()
        d = partial(np.sin(np.pi * x) + 0 * y, g, 0, 1, "fd4")
        errs.append(np.max(np.abs(d - np.pi * np.cos(np.pi * x))))
    slope = np.polyfit(np.log([1.0 / (n - 1) for n in ns]), np.log(errs), 1)[0]
    assert abs(slope - 4) < 0.3


def test_trivial_derivatives():
    g = Grid.cube(-1, 1, 9)
    assert np.max(np.abs(gradient(Field(g, 1.0)).values)) < 1e-14
    gx = gradient(Field.from_function(g, lambda x: x[0] + 0 * x[1] + 0 * x[2])).values
    assert np.allclose(gx[0], 1, atol=1e-13) and np.allclose(gx[1:], 0, atol=1e-13)
    lap = laplacian(Field.from_function(g, lambda x: x[0] ** 2 - x[1] ** 2 + 0 * x[2])).values
    assert np.max(np.abs(lap)) < 1e-11


def test_simpson_examples():
    g = Grid.cube(0, 1, 9)
    assert abs(integrate(Field(g, 1.0)) - 1) < 1e-15
    assert abs(integrate(Field.from_function(g, lambda x: x[0] * x[1] * x[2])) - 0.125) < 1e-15
    ns = [9, 17, 33, 65]
    errs = []
    for n in ns:
        g2 = Grid.cube(0, 1, n, dim=2)
        f = Field.from_function(g2, lambda x: np.sin(np.pi * x[0]) * np.sin(np.pi * x[1]))
        errs.append(abs(integrate(f) - (2 / np.pi) ** 2))
    slope = np.polyfit(np.log([1.0 / (n - 1) for n in ns]), np.log(errs), 1)[0]
    assert abs(slope - 4) < 0.3


def test_green_examples():
    g = Grid.cube(0, 1, 17, dim=2)
    assert green_dirichlet(Field.zeros(g)).max_abs() == 0
    x = g.coords()
    u = np.sin(np.pi * x[0]) * np.sin(np.pi * x[1])
    got = green_dirichlet(Field(g, -2 * np.pi**2 * u)).values
    assert np.max(np.abs(got - u)) < 1e-13


@given(seed=st.integers(0, 10**6), a=coef, b=coef)
def test_linearity(seed, a, b):
    g = Grid.cube(0, 1, 9)
    rng = np.random.default_rng(seed)
    f1 = Field(g, rng.normal(size=g.resolution))
    f2 = Field(g, rng.normal(size=g.resolution))
    for op in (lambda f: laplacian(f), lambda f: gradient(f), green_dirichlet):
        lhs = op(a * f1 + b * f2).values
        rhs = a * op(f1).values + b * op(f2).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_green_roundtrip_band_limited():
    g = Grid.cube(0, 1, 33)
    x = g.coords()
    rng = np.random.default_rng(4)
    s = sum(rng.normal() * np.sin(k * np.pi * x[0]) * np.sin(l * np.pi * x[1]) * np.sin(m * np.pi * x[2])
            for k, l, m in rng.integers(1, 6, size=(8, 3)))
    u = green_dirichlet(Field(g, s))
    lap = laplacian(u, "sine").values
    assert np.max(np.abs(lap - s)) <= 1e-8 * np.max(np.abs(s))


def test_periodic_translation_invariance():
    # trapezoid on a full period integrates shifted periodic integrands identically
    g = Grid(((0, 2 * np.pi), (0, 1)), (33, 9))
    x, y = g.coords()
    vals = [integrate_array(np.cos(x + s) ** 2 + 0 * y, g, "trapezoid") for s in (0.0, 0.3, 1.1)]
    assert np.ptp(vals) < 1e-13
