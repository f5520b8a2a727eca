import numpy as np
import pytest

from artifact.diagnostics import (drift_constant, energy_certificate, norm_report, sobolev_norm,
                                  tame_certificate, weighted_normal_norm)
from artifact.errors import OrderTooHigh
from artifact.geometry import Mesh
from artifact.regularization import sigma


def _field(n):
    m = Mesh(n, n, X1=np.pi, nt=3, dt=0.01)
    _, x1, x2, _ = m.coords()
    return m, np.sin(x1) * np.cos(x2) + 0 * m.coords()[0]


def test_l2_norm_of_product_mode():
    m, u = _field(128)
    # int_0^pi sin^2 = pi/2, int over a period of cos^2 = pi, window length 0.02
    assert sobolev_norm(u, 0, m) ** 2 == pytest.approx(0.02 * np.pi ** 2 / 2, rel=1e-3)


def test_h1_adds_gradients():
    m, u = _field(128)
    h0, h1 = sobolev_norm(u, 0, m), sobolev_norm(u, 1, m)
    assert h1 ** 2 == pytest.approx(3 * h0 ** 2, rel=1e-2)


def test_order_limit():
    m, u = _field(8)
    with pytest.raises(OrderTooHigh):
        sobolev_norm(u, 5, m)


def test_time_series_norm():
    m, u = _field(16)
    series = sobolev_norm(u, 0, m, time_integrated=False)
    assert series.shape == (3,)
    assert np.allclose(series, series[0])


def test_norm_report_monotone_in_order():
    m, u = _field(16)
    rep = norm_report(u, m, sigma=sigma)
    vals = [rep.interior[k] for k in range(4)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert rep.tangential[1] <= rep.interior[1]
    assert rep.weighted > 0


def test_weighted_norm_with_unit_weight():
    m, u = _field(16)
    w = weighted_normal_norm(u, m, lambda x: np.ones_like(x))
    assert w == pytest.approx(sobolev_norm(m.D(u, 1), 0, m))


def test_energy_certificate():
    assert energy_certificate([1.0, 1.1])["pass"]
    assert not energy_certificate([1.0, 1.5])["pass"]
    assert energy_certificate([0.0, 0.0])["trivial"]


def test_tame_certificate_linear_data():
    r = tame_certificate([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
    assert r["pass"] and r["slope"] == pytest.approx(2.0)


def test_drift_constant():
    assert drift_constant(1.0, 0.1, 0.1, 0.3, 2.0) == pytest.approx(1.0)
