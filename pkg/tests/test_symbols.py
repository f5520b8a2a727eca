import numpy as np
import pytest

from artifact.eos_state import Constitutive, random_states
from artifact.errors import DegenerateJacobian, HyperbolicityViolated, IllConditionedSpectrum
from artifact.symbols import (Coeffs, apply_A, apply_A0, apply_dA, apply_dA0, assemble_A0,
                              assemble_Ai, assemble_tildeA1, bc_count, bc_count_from_inertia,
                              boundary_inertia, characteristic_speeds, contact_boundary_matrix,
                              dense, eigen_inertia, random_contact_pair, reduce_planar)

C = Constitutive()


@pytest.fixture
def u():
    return random_states(np.random.default_rng(3), 1)[0]


def test_a0_diagonal(u):
    A0 = assemble_A0(C, u)
    assert np.array_equal(A0, np.diag(np.diag(A0)))
    assert A0[0, 0] == pytest.approx(C.kappa(u[0], u[7]))


@pytest.mark.parametrize("i", [1, 2, 3])
def test_matrix_derivatives(u, i):
    V = np.random.default_rng(i).standard_normal(8)
    W = np.random.default_rng(10 + i).standard_normal(8)
    h = 1e-6
    fd = (assemble_Ai(C, u + h * V, i) - assemble_Ai(C, u - h * V, i)) @ W / (2 * h)
    assert np.allclose(apply_dA(Coeffs(u, C), i, V, W), fd, atol=1e-7)
    fd0 = (assemble_A0(C, u + h * V) - assemble_A0(C, u - h * V)) @ W / (2 * h)
    assert np.allclose(apply_dA0(Coeffs(u, C), V, W), fd0, atol=1e-7)


def test_dense_matches_apply(u):
    cf = Coeffs(u, C)
    W = np.arange(8.0)
    assert np.allclose(dense(lambda x: apply_A(cf, 2, x)) @ W, apply_A(cf, 2, W))
    assert np.allclose(dense(lambda x: apply_A0(cf, x)) @ W, apply_A0(cf, W))


def test_speeds_include_fluid_velocity(u):
    xi = np.array([1.0, 0.0, 0.0])
    lam = characteristic_speeds(C, u, xi)
    assert np.min(np.abs(lam - u[1])) < 1e-10


def test_bad_axis_and_state(u):
    with pytest.raises(ValueError):
        assemble_Ai(C, u, 4)
    bad = u.copy()
    bad[0] = 1e12
    with pytest.raises(HyperbolicityViolated):
        assemble_A0(C, bad)
    with pytest.raises(DegenerateJacobian):
        assemble_tildeA1(C, u, (0.0, 0.0, 0.0))


def test_contact_inertia_and_planar_reduction():
    up, um, sl = random_contact_pair(np.random.default_rng(5))
    bm = contact_boundary_matrix(C, up, um, sl)
    assert bm.M.shape == (16, 16)
    assert bm.inertia == (6, 6, 4)
    assert reduce_planar(bm).M.shape == (12, 12)
    assert bc_count() == bc_count_from_inertia(bm.inertia) == 7


def test_ambiguity_band():
    with pytest.raises(IllConditionedSpectrum):
        eigen_inertia(np.array([1.0, -1.0, 1e-7]), 1.0)
    assert eigen_inertia(np.array([1.0, -1.0, 1e-12]), 1.0) == (1, 1, 1)


def test_inertia_of_diagonal():
    assert boundary_inertia(np.diag([1.0, 2.0, -3.0, 0.0])) == (2, 1, 1)
