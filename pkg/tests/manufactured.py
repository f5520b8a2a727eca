"""Shared manufactured states and problems for the tests."""
import numpy as np

from artifact.eos_state import BackgroundState, Constitutive
from artifact.geometry import Mesh
from artifact.linearization import BasicState
from artifact.linsolve import LinearProblem


def smooth_basic_fields(n=32, nt=5, dt=0.05):
    """Nonconstant, time-dependent (U, phi) on both sides."""
    m = Mesh(n, n, nt=nt, dt=dt)
    t, x1, x2, _ = m.coords()
    U = np.zeros((2, 8) + m.vol_shape)
    for s in range(2):
        U[s, 0] = 1 + 0.1 * np.sin(x2 + t) * np.exp(-x1 / 3)
        U[s, 1] = 0.1 * np.cos(x2) * np.cos(x1 / 2 + t)
        U[s, 2] = 0.2 + 0.1 * np.sin(x2 - x1 / 4)
        U[s, 3] = 0.05 * np.cos(x2 + x1 / 5)
        U[s, 4] = 1 + 0.1 * np.cos(x2 + t)
        U[s, 5] = 0.1 * np.sin(x2 + x1 / 3)
        U[s, 6] = 0.05
        U[s, 7] = 0.3 * s + 0.1 * np.sin(x2)
    ts, xs, _ = m.surf_coords()
    phi = 0.05 * np.sin(xs + ts)
    return m, U, phi


def perturbation(m):
    t, x1, x2, _ = m.coords()
    V = np.stack([np.stack([np.sin(x2 * (k % 3 + 1) + t) * np.exp(-x1 / 4) * (1 + 0.1 * k + s)
                            for k in range(8)]) for s in range(2)])
    ts, xs, _ = m.surf_coords()
    return V, 0.3 * np.cos(2 * xs - ts)


def background_problem(n, eps, amp=1.0, T=0.5, nt=11, shift=0.0, n2=None):
    """Linear problem on the contact background with a smooth compactly timed source."""
    m = Mesh(n, n2 or n, nt=nt, dt=T / (nt - 1))
    bs = BasicState.from_background(BackgroundState(), m, Constitutive(), sfrak=1.0)
    t, x1, x2, _ = m.coords()
    f = np.zeros((2, 8) + m.vol_shape)
    prof = amp * np.exp(-((x1 - 1.5) ** 2) * 2) * np.cos(x2 + shift) * np.sin(np.pi * t / T) ** 2
    f[0, 0] = prof
    f[1, 2] = 0.5 * prof
    f[0, 7] = prof
    return LinearProblem(bs, m, f=f, epsilon=eps), f


def constant_basic_state(up, um, n1=8, n2=8, sfrak=1.0, closure=None):
    """Steady basic state with constant sides across a flat interface."""
    m = Mesh(n1, n2)
    U = np.empty((2, 8) + m.vol_shape)
    U[0] = np.asarray(up).reshape((8,) + (1,) * 3)
    U[1] = np.asarray(um).reshape((8,) + (1,) * 3)
    return BasicState(U, np.zeros(m.surf_shape), m, closure or Constitutive(), sfrak)


def bump_initial_data(n=64, amp=1e-2):
    from artifact.init_compat import InitialData
    m = Mesh(n, n, X1=8.0)
    data = InitialData.from_background(BackgroundState(), m, Constitutive(), sfrak=1.0)
    _, x1, x2, _ = data.mesh.coords()
    bump = np.exp(-((x1 - 2.5) / 0.5) ** 2) * np.cos(x2)
    U0 = data.U0.copy()
    U0[0, 0] += amp * bump
    U0[0, 2] += amp * bump
    U0[1, 0] += amp * bump
    return InitialData(U0, data.phi0, data.mesh, data.closure, 1.0)
