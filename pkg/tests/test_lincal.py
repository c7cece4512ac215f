import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from harmgrad import lincal as lc
from harmgrad.errors import ConfigError, PreconditionError
from harmgrad.fields import Field, Grid, integrate
from harmgrad.harmonic import calderon_pair, calderon_wave, coordinate, polynomial
from harmgrad.harness.experiments import harmonic_pair_dictionary
from harmgrad.profiles import GaussianBump

G49 = Grid.cube(-1.0, 1.0, 49)


@pytest.fixture(scope="module")
def pairs49():
    rng = np.random.default_rng(5)
    return [lc.random_obstruction_pair(G49, rng) for _ in range(3)]


def test_pair_validation():
    g = Grid.cube(-1, 1, 17)
    v = Field.zeros(g, 1)
    a = np.zeros((3, 3) + g.resolution)
    a[0, 1] = 1.0
    with pytest.raises(PreconditionError):
        lc.ObstructionPair(v, Field(g, a, 2))          # not antisymmetric
    vv = np.zeros((3,) + g.resolution)
    vv[0, 0, 0, 0] = 1.0
    with pytest.raises(PreconditionError):
        lc.ObstructionPair(Field(g, vv, 1), Field.zeros(g, 2))
    x = g.coords()
    bump = GaussianBump((0, 0, 0), 0.15, 0.6).value(x)
    a = np.zeros((3, 3) + g.resolution)
    a[0, 1] = bump
    a[1, 0] = -bump
    with pytest.raises(PreconditionError):
        lc.ObstructionPair(v, Field(g, a, 2), method="fd2")   # rows not divergence-free


@pytest.mark.parametrize("method", ["fd2", "fd4", "periodic"])
def test_potential_construction_is_divergence_free(method):
    g = Grid.cube(-1, 1, 25)
    rng = np.random.default_rng(0)
    phi = Field(g, rng.normal(size=g.resolution))
    a = lc.antisymmetric_from_potential(phi, method)
    assert np.array_equal(a.values, -np.swapaxes(a.values, 0, 1))
    assert np.max(np.abs(lc.row_divergence(a, method))) < 1e-9


def test_obstructions_are_invisible(pairs49):
    rng = np.random.default_rng(1)
    rep = lc.sufficiency_check(pairs49, harmonic_pair_dictionary(rng, 10))
    assert rep.passed
    assert rep.metric("max_relative_identity").value < 1e-12


def test_non_obstruction_is_visible():
    x = G49.coords()
    b = GaussianBump((0, 0, 0), 0.15, 0.7).value(x)
    C = Field(G49, np.einsum("jk,...->jk...", np.eye(3), b), 2)
    u = coordinate(3, 0)
    assert abs(lc.double_identity(C, u, u)) > 1e-3


@settings(max_examples=10)
@given(seed=st.integers(0, 1000))
def test_polarization_identity(seed):
    rng = np.random.default_rng(seed)
    g = Grid.cube(-1, 1, 11)
    C = Field(g, rng.normal(size=(3, 3) + g.resolution), 2)
    u1 = polynomial(3, {(1, 1, 0): rng.normal()})
    xi = rng.normal(size=3)
    nu = np.cross(xi, [0.0, 0.0, 1.0])
    u2 = calderon_wave(calderon_pair(xi, nu / np.linalg.norm(nu)).zeta_plus)
    assert lc.polarization_gap(C, u1, u2) < 1e-10 * max(1.0, lc.identity_scale(C, u1, u2))


def test_decompose_recovers_planted_pair():
    g = Grid.cube(-1, 1, 49)
    pair = lc.random_obstruction_pair(g, np.random.default_rng(2), width=0.18, radius=0.78, r_flat=0.6,
                                      method="fd2")
    C = lc.build_obstruction(pair)
    dec = lc.decompose(C, "fd2")
    assert np.array_equal(dec.a.values, 0.5 * (C.values - np.swapaxes(C.values, 0, 1)))
    scale = pair.v.max_abs()
    assert dec.B_residual.max_abs() < 0.05 * C.max_abs()
    assert np.max(np.abs(dec.v.values - pair.v.values)) < 0.05 * scale


def test_decompose_rejects_boundary_support():
    g = Grid.cube(-1, 1, 17)
    with pytest.raises(PreconditionError):
        lc.decompose(Field(g, np.ones((3, 3) + g.resolution), 2))


def test_mollify():
    g = Grid.cube(-1, 1, 33)
    b = GaussianBump((0, 0, 0), 0.1, 0.5).value(g.coords())
    C = Field(g, np.einsum("jk,...->jk...", np.eye(3), b), 2)
    assert np.array_equal(lc.mollify(C, 0.0).values, C.values)
    M = lc.mollify(C, 0.05)
    assert M.max_abs() < C.max_abs()
    assert abs(integrate(M[0, 0]) - integrate(C[0, 0])) < 1e-6
    with pytest.raises(PreconditionError):
        lc.mollify(C, -1.0)


def test_flow_of_linear_field_matches_expm():
    A = np.array([[0.1, -0.3, 0.0], [0.2, 0.0, 0.1], [0.0, 0.05, -0.2]])
    v = lc.SmoothVectorField(lambda x: np.einsum("ij,j...->i...", A, np.array(x)),
                             lambda x: np.broadcast_to(A[:, :, None], (3, 3) + np.shape(x[0])))
    pts = np.array([[0.1, -0.2], [0.3, 0.0], [0.0, 0.4]])
    X, M = lc.flow_with_jacobian(v, pts, 0.5, steps=64)
    E = scipy.linalg.expm(0.5 * A)
    assert np.allclose(X, E @ pts, atol=1e-10)
    assert np.allclose(M[:, :, 0], E, atol=1e-10)
    I_t, det = lc.pushforward_identity(M)
    assert np.allclose(det, np.exp(0.5 * np.trace(A)), atol=1e-10)


def test_flow_leaving_box_raises():
    v = lc.SmoothVectorField(lambda x: np.stack([np.ones_like(x[0])] * 3),
                             lambda x: np.zeros((3, 3) + np.shape(x[0])))
    with pytest.raises(ConfigError):
        lc.flow_with_jacobian(v, np.zeros((3, 1)), 2.0, box=((-1, 1),) * 3)


def test_tartar_linearization_slopes():
    v = lc.bump_vector_field(GaussianBump((0.0, 0.0, 0.0), 0.2, 0.8), [1.0, 0.5, -0.7])
    rep = lc.tartar_linearization(v, [2e-2, 1e-2, 5e-3, 2.5e-3], Grid.cube(-1, 1, 10))
    assert rep.passed


def test_tartar_zero_field():
    rep = lc.tartar_linearization(lc.zero_vector_field(3), [1e-2, 5e-3], Grid.cube(-1, 1, 8))
    assert rep.passed and rep.metric("I_t_residual_max").value == 0.0
