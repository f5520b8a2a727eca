from dataclasses import replace

import numpy as np
import pytest

from artifact.eos_state import BackgroundState, Constitutive
from artifact.errors import CFLViolated, ConfigInvalid, EpsilonOutOfRange, NotCauchy
from artifact.linsolve import (Grid, LinearProblem, homogenize_boundary, lgl, normal_modes,
                               solve_effective, solve_regularized, time_stencil)

from manufactured import background_problem


def test_time_stencil_reproduces_cubics():
    s = 2.3
    for causal in (False, True):
        idx, w = time_stencil(s, 8, causal=causal)
        assert sum(wi * i ** 3 for i, wi in zip(idx, w)) == pytest.approx(s ** 3)
        if causal:
            assert max(idx) <= int(np.floor(s)) + 1


def test_lgl_quadrature_and_derivative():
    x, w, D = lgl(8)
    assert w.sum() == pytest.approx(2.0)
    assert np.sum(w * x ** 4) == pytest.approx(0.4)
    assert np.allclose(D @ x ** 3, 3 * x ** 2)


def test_problem_validation():
    p, _ = background_problem(8, 1e-2)
    for kw in ({"coordinates": "V"}, {"far": "open"}, {"source_interp": "linear"}):
        with pytest.raises(ConfigInvalid):
            replace(p, **kw)
    with pytest.raises(ConfigInvalid):
        Grid(8, 8, X1=4.0)


def test_epsilon_must_be_positive():
    p, _ = background_problem(8, 1e-2)
    with pytest.raises(EpsilonOutOfRange):
        solve_regularized(replace(p, epsilon=0.0))


def test_substep_cfl_check():
    p, _ = background_problem(8, 1e-2)
    with pytest.raises(CFLViolated):
        solve_regularized(p, substep=1.0)


def test_zero_data_zero_solution():
    p, f = background_problem(8, 1e-2)
    sol = solve_regularized(replace(p, f=np.zeros_like(f)))
    assert not np.any(sol.W) and not np.any(sol.psi)


def test_energy_bounded_and_starts_at_zero():
    p, _ = background_problem(16, 1e-2)
    sol = solve_regularized(p)
    assert sol.info["energy"][0] == 0.0
    assert np.all(np.isfinite(sol.info["energy"]))


def test_interface_source_homogenization():
    p, f = background_problem(8, 1e-2)
    g = np.zeros((7,) + p.mesh.surf_shape)
    g[0] = 1e-2 * np.cos(p.mesh.x2)
    hom, Vn = homogenize_boundary(replace(p, g=g))
    assert hom.g is None
    assert np.allclose(p.mesh.trace(Vn)[0, 0], g[0])


def test_epsilon_schedule_validation():
    p, _ = background_problem(8, 1e-2)
    with pytest.raises(ConfigInvalid):
        solve_effective(p, eps_schedule=[1e-3, 1e-2])


def test_epsilon_schedule_reports_cauchy():
    p, _ = background_problem(8, 1e-2)
    try:
        sol = solve_effective(p, eps_schedule=[1e-2, 5e-3, 2.5e-3])
    except NotCauchy:
        pytest.fail("differences should shrink for a smooth source")
    assert len(sol.info["cauchy"]) == 2


def test_normal_modes_neutral_for_low_wavenumber():
    sp = normal_modes(BackgroundState(), Constitutive(), 1.0, (1, 0), N=24)
    assert sp.eigvals.real.max() < 1e-8
