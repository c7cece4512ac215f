import numpy as np
import pytest
from hypothesis import given, strategies as st

from harmgrad.errors import PreconditionError
from harmgrad.fields import Grid
from harmgrad.harmonic import (calderon_pair, calderon_wave, coordinate, harmonic_polynomials,
                               harmonic_space_dim, harmonicity_residual, parse_descriptor, point_source,
                               polynomial)

vec = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3).map(np.array)


def _orthonormal(xi, w):
    # cross with the axis xi is least aligned with, then rotate by w's angle
    e = np.zeros(3)
    e[np.argmin(np.abs(xi))] = 1.0
    n1 = np.cross(xi, e)
    n1 /= np.linalg.norm(n1)
    n2 = np.cross(xi / np.linalg.norm(xi), n1)
    th = np.arctan2(w[1], w[0])
    nu = np.cos(th) * n1 + np.sin(th) * n2
    return nu / np.linalg.norm(nu)


@given(xi=vec, w=vec)
def test_calderon_pair_algebra(xi, w):
    if np.linalg.norm(xi) < 1e-2:
        return
    nu = _orthonormal(xi, w)
    p = calderon_pair(xi, nu)
    s = max(1.0, xi @ xi)
    assert abs(p.zeta_plus @ p.zeta_plus) <= 1e-14 * s
    assert abs(p.zeta_minus @ p.zeta_minus) <= 1e-14 * s
    assert np.max(np.abs(p.zeta_plus + p.zeta_minus - xi)) <= 1e-14 * max(1.0, np.max(np.abs(xi)))


def test_calderon_pair_frozen_example():
    p = calderon_pair([3.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    assert np.allclose(p.zeta_plus, [1.5, 1.5j, 0])
    q = calderon_pair([0.0, 3.0, 4.0], [1.0, 0.0, 0.0])
    assert np.allclose(q.zeta_plus, [2.5j, 1.5, 2.0]) and np.allclose(q.zeta_minus, [-2.5j, 1.5, 2.0])


def test_calderon_pair_preconditions():
    with pytest.raises(PreconditionError):
        calderon_pair([0, 0, 0], [1, 0, 0])
    with pytest.raises(PreconditionError):
        calderon_pair([1, 0, 0], [1, 0, 0])
    with pytest.raises(PreconditionError):
        calderon_pair([1, 0, 0], [0, 2, 0])
    with pytest.raises(PreconditionError):
        calderon_wave([1.0, 0.0, 0.0])


def test_calderon_wave_gradient():
    f = calderon_wave(calderon_pair([1.0, 2.0, 0.0], [0.0, 0.0, 1.0]).zeta_plus)
    x = [np.array(0.3), np.array(-0.2), np.array(0.5)]
    h = 1e-6
    g = f.grad(x)
    for a in range(3):
        xp = list(x)
        xm = list(x)
        xp[a] = x[a] + h
        xm[a] = x[a] - h
        assert abs((f.value(xp) - f.value(xm)) / (2 * h) - g[a]) < 1e-8


def test_harmonicity_residual_converges_at_fourth_order():
    f = calderon_wave(calderon_pair([2.0, 1.0, 0.0], [0.0, 0.0, 1.0]).zeta_plus)
    ns = [9, 17, 33, 65]
    r = [harmonicity_residual(f, Grid.cube(-1, 1, n)) for n in ns]
    h = [2.0 / (n - 1) for n in ns]
    slope = np.polyfit(np.log(h), np.log(r), 1)[0]
    assert abs(slope - 4) < 0.3


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_harmonic_polynomial_counts_and_harmonicity(dim):
    basis = harmonic_polynomials(4, dim)
    assert len(basis) == sum(harmonic_space_dim(d, dim) for d in range(5))
    rng = np.random.default_rng(dim)
    x = [rng.normal(size=20) for _ in range(dim)]
    for f in basis:
        assert np.max(np.abs(f.lap(x))) < 1e-10


def test_harmonic_space_dims():
    assert [harmonic_space_dim(d, 3) for d in range(5)] == [1, 3, 5, 7, 9]
    assert [harmonic_space_dim(d, 2) for d in range(4)] == [1, 2, 2, 2]


def test_point_source():
    f = point_source([0.0, 0.0, 2.0])
    x = [np.array(0.1), np.array(0.2), np.array(0.3)]
    r = np.sqrt(0.01 + 0.04 + 1.7**2)
    assert abs(f.value(x) - 1 / r) < 1e-15
    with pytest.raises(PreconditionError):
        point_source([0.0, 0.0, 0.0], Grid.cube(-1, 1, 9))
    g2 = point_source([0.0, 3.0])
    assert abs(g2.value([np.array(0.0), np.array(1.0)]) - np.log(2.0)) < 1e-15


@pytest.mark.parametrize("f", [
    coordinate(3, 1),
    polynomial(3, {(1, 1, 0): 2.0, (0, 0, 1): -1.0}),
    calderon_wave([0.5, 0.5j, 0.0]),
    point_source([0.0, 0.0, 3.0]),
    coordinate(3, 2).scaled(2 - 1j),
])
def test_descriptor_roundtrip(f):
    g = parse_descriptor(f.descriptor)
    rng = np.random.default_rng(0)
    x = [rng.uniform(-1, 1, 7) for _ in range(3)]
    assert np.allclose(g.value(x), f.value(x), rtol=1e-15, atol=1e-15)
    assert g.descriptor == f.descriptor
