from dataclasses import replace

import numpy as np
import pytest

from artifact.errors import ArchiveIncomplete
from artifact.geometry import Mesh
from artifact.init_compat import build_approximate, compute_traces
from artifact.nash_moser import (IterationState, NMConfig, Smoother, compute_sources, driver,
                                 load_checkpoint, past_vanishing_defect,
                                 random_past_vanishing_fields, smooth, theta_schedule)

from manufactured import bump_initial_data


@pytest.fixture(scope="module")
def approx():
    data = bump_initial_data(32)
    return build_approximate(data, compute_traces(data, 1), 0.1)


def test_theta_schedule():
    assert theta_schedule(32.0, 0) == 32.0
    assert theta_schedule(3.0, 7) == pytest.approx(4.0)


def test_smoother_is_linear_and_causal():
    m = Mesh(16, 16, nt=11, dt=0.01)
    rng = np.random.default_rng(0)
    f = random_past_vanishing_fields(m, 2, rng, kmax=3)
    a = smooth(f[0], 4.0, m)
    b = smooth(f[1], 4.0, m)
    assert np.allclose(smooth(2 * f[0] - f[1], 4.0, m), 2 * a - b)
    assert past_vanishing_defect(m, f, (2, 8)) == 0.0


def test_smoother_tends_to_identity():
    m = Mesh(32, 32, nt=11, dt=0.01)
    f = random_past_vanishing_fields(m, 1, np.random.default_rng(1), kmax=2)[0]
    errs = [np.abs(smooth(f, th, m) - f).max() for th in (4.0, 16.0, 64.0)]
    assert errs[0] > errs[1] > errs[2]


def test_interface_smoothing_shape():
    m = Mesh(16, 16, nt=5, dt=0.01)
    g = np.random.default_rng(2).standard_normal(m.surf_shape)
    assert Smoother(m)(g, 8.0, surface=True).shape == m.surf_shape


def test_sources_need_complete_archives():
    m = Mesh(16, 16, nt=5, dt=0.01)
    st = IterationState.start(m)
    st.n = 1
    with pytest.raises(ArchiveIncomplete):
        compute_sources(st, np.zeros((2, 8) + m.vol_shape))


def test_zero_source_gives_zero_iterates(approx):
    out = driver(replace(approx, f=np.zeros_like(approx.f)), NMConfig(max_iter=1))
    assert not np.any(out["state"].V)


def test_checkpoint_resume_is_bit_identical(approx, tmp_path):
    full = driver(approx, NMConfig(max_iter=2))
    driver(approx, NMConfig(max_iter=1), checkpoint_dir=tmp_path)
    assert load_checkpoint(tmp_path, approx.mesh) is not None
    resumed = driver(approx, NMConfig(max_iter=2), checkpoint_dir=tmp_path, resume=True)
    assert np.array_equal(full["state"].V, resumed["state"].V)
    assert full["residuals"] == resumed["residuals"]


def test_tolerance_stop(approx):
    out = driver(approx, NMConfig(max_iter=3, tol=1e9))
    assert out["stop"] == "tolerance" and out["state"].n == 1
