import numpy as np
import pytest

from artifact.eos_state import BackgroundState, Constitutive
from artifact.errors import AdmissibilityLost, StencilTooCoarse
from artifact.geometry import Mesh
from artifact.init_compat import (InitialData, boundary_residual, build_approximate,
                                  check_compatibility, compute_traces, time_cutoff)

from manufactured import bump_initial_data


@pytest.fixture(scope="module")
def background():
    return InitialData.from_background(BackgroundState(), Mesh(16, 16), Constitutive(), 1.0)


def test_background_traces_vanish(background):
    tr = compute_traces(background, 1)
    for l in range(1, len(tr.U)):
        assert np.abs(tr.U[l]).max() < 1e-12
    assert check_compatibility(tr, background)["pass"]


def test_background_approximate_has_no_source(background):
    ap = build_approximate(background, compute_traces(background, 1), 0.2)
    assert np.abs(ap.f).max() < 1e-12
    assert np.abs(boundary_residual(ap)).max() < 1e-14


def test_time_cutoff():
    assert time_cutoff(0.0, 1.0) == 1.0
    assert time_cutoff(1.0, 1.0) == pytest.approx(1.0)
    assert time_cutoff(2.0, 1.0) == pytest.approx(0.0)


def test_coarse_grid_rejected():
    d = InitialData.from_background(BackgroundState(), Mesh(4, 4), Constitutive())
    with pytest.raises(StencilTooCoarse):
        compute_traces(d, 1)


def test_large_interface_rejected(background):
    d = InitialData(background.U0, background.phi0 + 0.3, background.mesh, Constitutive())
    with pytest.raises(AdmissibilityLost):
        d.check()


def test_bump_data_source_vanishes_at_start():
    data = bump_initial_data(32)
    tr = compute_traces(data, 1)
    chk = check_compatibility(tr, data)
    assert chk["pass"]
    ap = build_approximate(data, tr, 0.2)
    assert not np.any(ap.f[:, :, 0])
    assert np.abs(boundary_residual(ap)).max() < 1e-10
