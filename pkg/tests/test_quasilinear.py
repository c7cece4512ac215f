import warnings

import numpy as np
import pytest

from harmgrad import quasilinear as ql
from harmgrad.errors import PreconditionError, SmallnessViolatedError
from harmgrad.fields import Field, Grid, integrate_array
from harmgrad.harmonic import coordinate, polynomial

G = Grid.cube(-1.0, 1.0, 33)
DATA = ql.BoundaryData(coordinate(3, 0), polynomial(3, {(1, 1, 0): 1.0}))


@pytest.fixture(scope="module")
def planted():
    return ql.planted_tensors(G, seed=1)


def test_coupled_tensor_validation():
    z = Field.zeros(G, 3)
    with pytest.raises(PreconditionError):
        ql.CoupledTensors(((z, z),))
    bad = np.zeros((3, 3, 3) + G.resolution)
    bad[0, 0, 0, 0, 0, 0] = 1.0
    with pytest.raises(PreconditionError):
        ql.CoupledTensors(((Field(G, bad, 3), z), (z, z)))
    b = ql.bump_field(G)
    T = np.zeros((3, 3, 3) + G.resolution)
    T[0, 0, 1] = b                      # not symmetric in the last two indices
    with pytest.raises(PreconditionError):
        ql.CoupledTensors(((Field(G, T, 3), z), (z, z)))
    ql.CoupledTensors(((z, Field(G, T, 3)), (z, z)))   # off-diagonal blocks are unconstrained


def test_zero_tensors_give_harmonic_extension():
    A = ql.CoupledTensors.zeros(G)
    sol = ql.solve_forward(A, DATA, 0.3)
    assert all(c.max_abs() == 0 for c in sol.correction)
    w = coordinate(3, 0)
    p = ql.dtn_pair(A, DATA, 0.3, w, sol=sol)
    assert abs(p[0] - 0.3 * 8.0) < 1e-12     # int |grad x0|^2 over the cube
    assert abs(p[1]) < 1e-12


def test_forward_solution_satisfies_pde(planted):
    sol = ql.solve_forward(planted, DATA, 0.01)
    assert sol.residuals[-1] <= 1e-13
    assert sol.ratio < 1
    assert ql.pde_residual(planted, sol) < 1e-10
    for c in sol.correction:
        v = c.values
        assert np.all(v[0] == 0) and np.all(v[-1] == 0)


def test_large_data_violates_smallness():
    A = ql.planted_tensors(G, seed=2, amplitude=50.0)
    with pytest.raises(SmallnessViolatedError):
        ql.solve_forward(A, DATA, 1.0)


def test_first_corrector_is_quadratic_limit(planted):
    v1 = ql.first_corrector(planted, DATA)
    e = 1e-3
    sol = ql.solve_forward(planted, DATA, e)
    for J in range(2):
        gap = np.max(np.abs(sol.correction[J].values / e**2 - v1[J].values))
        assert gap < 1e-2 * v1[J].max_abs()


def test_second_linearization_matches_moment(planted):
    w = coordinate(3, 2)
    sl = ql.second_linearization(planted, DATA, w)
    for J in range(2):
        oracle = ql.moment_oracle(planted, DATA, w, J)
        assert abs(sl.c2[J] - oracle) <= 1e-3 * abs(oracle)
        assert sl.noise[J] < 1e-3 * abs(oracle)


def test_second_linearization_list_and_threads(planted):
    ws = [coordinate(3, 1), coordinate(3, 2)]
    one = ql.second_linearization(planted, DATA, ws, workers=1)
    two = ql.second_linearization(planted, DATA, ws, workers=2)
    for a, b in zip(one, two):
        assert a.c2 == b.c2


def test_eps_checks():
    with pytest.raises(PreconditionError):
        ql._check_eps([1e-2, 5e-3])
    with pytest.warns(UserWarning):
        ql._check_eps([1e-2, 5e-3, 2.5e-3])


def test_perturbation_plants():
    P, b = ql.levi_civita_perturbation(G, 0.1)
    assert abs(integrate_array(b, G, "trapezoid") - 0.1) < 1e-14
    assert np.array_equal(P.values, -np.swapaxes(P.values, 1, 2))
    S, _ = ql.symmetric_perturbation(G, 0.1)
    assert np.array_equal(S.values, np.swapaxes(S.values, 1, 2))


def test_linear_dictionary_shape():
    d = ql.linear_dictionary()
    assert len(d) == 15
    assert all(len(t) == 3 for t in d)


def test_uniqueness_detects_levi_civita(planted):
    P, _ = ql.levi_civita_perturbation(G, 0.1)
    At = planted.replace(0, 1, planted.A[0][1] + P)
    x = [coordinate(3, j) for j in range(3)]
    dictionary = [(x[2], x[0], x[1])]
    with pytest.warns(UserWarning):
        rep = ql.uniqueness_experiment(planted, At, dictionary)
    assert rep.passed
    assert abs(rep.metric("max_gap").value - 0.1) < 1e-3
    with pytest.warns(UserWarning):
        same = ql.uniqueness_experiment(planted, planted, dictionary)
    assert same.passed and same.metric("max_gap_over_noise_equal").value == 0.0


@pytest.mark.parametrize("seed", [3, 4, 5])
def test_pde_residual_small_for_random_plants(seed):
    g = Grid.cube(-1.0, 1.0, 25)
    A = ql.planted_tensors(g, seed=seed)
    sol = ql.solve_forward(A, DATA, 0.05)
    assert ql.pde_residual(A, sol) < 1e-9


def test_first_order_pairing_is_symmetric(planted):
    # eps-linear coefficients: <Lambda' f, w> = <Lambda' w, f>
    f, w = coordinate(3, 0), polynomial(3, {(1, 1, 0): 1.0})
    other = coordinate(3, 2)
    a = ql.second_linearization(planted, ql.BoundaryData(f, other), w)
    b = ql.second_linearization(planted, ql.BoundaryData(w, other), f)
    assert abs(a.c1[0] - b.c1[0]) < 1e-9 * max(1.0, abs(a.c1[0]))
