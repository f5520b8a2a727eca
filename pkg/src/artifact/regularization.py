"""The epsilon-regularized linearized problem in W coordinates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EpsilonOutOfRange, InertiaChanged
from .geometry import _smooth_step, div_flat
from .linearization import BasicState
from .symbols import eigen_inertia

J_MINUS = np.diag([1.0, 1, 1, 1, 0, 0, 0, 0])
EPS_BRACKET = (1e-8, 1e-1)


# ---------------------------------------------------------------------------
# sigma weight: sigma = x on [0, 1], 2 for x >= 3, smooth and increasing
# ---------------------------------------------------------------------------

def _sigma_table(n=40001):
    u = np.linspace(0.0, 1.0, n)
    g = 1.0 - _smooth_step(u)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(u))])
    # exact value at u = 1 is 1/2 by symmetry of the step
    cum *= 0.5 / cum[-1]
    return u, cum


_SIG_U, _SIG_C = _sigma_table()


def sigma(x1):
    x = np.asarray(x1, float)
    u = np.clip((x - 1.0) / 2.0, 0.0, 1.0)
    mid = 1.0 + 2.0 * np.interp(u, _SIG_U, _SIG_C)
    return np.where(x <= 1.0, x, mid)


# ---------------------------------------------------------------------------
# J matrices
# ---------------------------------------------------------------------------

def JH_matrix(P2, P3):
    """The 3x3 magnetic block of J (H = JH (W4, W5, W6)), shape (..., 3, 3)."""
    P2, P3 = np.broadcast_arrays(np.asarray(P2, float), np.asarray(P3, float))
    n2 = 1 + P2 ** 2 + P3 ** 2
    M = np.empty(P2.shape + (3, 3))
    M[..., 0, :] = np.stack([P2, P3, np.ones_like(P2)], -1)
    M[..., 1, :] = np.stack([1 + P3 ** 2, -P2 * P3, -P2], -1)
    M[..., 2, :] = np.stack([-P2 * P3, 1 + P2 ** 2, -P3], -1)
    return M / n2[..., None, None]


def assemble_J(bs: BasicState):
    """(J+, J-) with shapes (..., 8, 8) over the basic-state volume grid."""
    P2, P3 = bs.slopes(0)
    JH = JH_matrix(P2, P3)
    Jp = np.zeros(JH.shape[:-2] + (8, 8))
    Jp[..., 1, 1] = 1.0
    Jp[..., 4:7, 4:7] = np.swapaxes(JH, -1, -2) @ JH
    Jm = np.broadcast_to(J_MINUS, Jp.shape).copy()
    return Jp, Jm


@dataclass
class EpsilonSystem:
    epsilon: float
    Jplus: np.ndarray
    Jminus: np.ndarray
    eps0: float | None = None

    @classmethod
    def build(cls, bs: BasicState, epsilon, eps0=None):
        Jp, Jm = assemble_J(bs)
        sys = cls(float(epsilon), Jp, Jm, eps0)
        sys.validate()
        return sys

    def validate(self):
        if self.epsilon < 0 or (self.eps0 is not None and self.epsilon > self.eps0):
            raise EpsilonOutOfRange(f"epsilon={self.epsilon} outside [0, eps0={self.eps0}]")

    @property
    def J(self):
        return np.stack([self.Jplus, self.Jminus])

    def sigma(self, x1):
        return sigma(x1)


# ---------------------------------------------------------------------------
# operators in W coordinates (components on axis 1 of side-stacked arrays)
# ---------------------------------------------------------------------------

def _matvec(M, W):
    """M (2, ..., 8, 8) times W (2, 8, ...)."""
    Wl = np.moveaxis(W, 1, -1)
    return np.moveaxis(np.einsum("...ij,...j->...i", M, Wl), -1, 1)


def bold_interior(bs: BasicState, W, mesh=None, bold=None):
    """Sum_i A_i D_i W + A4 W with the bold (transformed) matrices."""
    m = bs.mesh if mesh is None else mesh
    bold = bs.bold_matrices() if bold is None else bold
    out = _matvec(bold["A4"], W)
    for k, key in enumerate(("A0", "A1", "A2", "A3")):
        if k == 3 and not m.n3:
            continue
        out = out + _matvec(bold[key], m.D(W, k))
    return out


def regularized_interior(sys: EpsilonSystem, bs: BasicState, W, mesh=None, bold=None):
    sys.validate()
    m = bs.mesh if mesh is None else mesh
    out = bold_interior(bs, W, m, bold)
    if sys.epsilon:
        out = out - sys.epsilon * _matvec(sys.J, m.D(W, 1))
    return out


def fourth_difference(psi, mesh, axis_k):
    """Periodic 5-point fourth derivative along x2 (2) or x3 (3)."""
    if axis_k == 3 and not mesh.n3:
        return np.zeros_like(psi)
    ax = -mesh.ntan + (axis_k - 2)
    h = mesh.h2 if axis_k == 2 else mesh.h3
    r = lambda s: np.roll(psi, s, ax)
    return (r(2) - 4 * r(1) + 6 * psi - 4 * r(-1) + r(-2)) / h ** 4


def biharmonic_symbol(k, h):
    """Symbol of the 5-point fourth difference at integer wavenumber k."""
    return (2 * np.sin(0.5 * k * h) / h) ** 4


def kinematic_rhs(sys: EpsilonSystem, bs: BasicState, psi, mesh=None):
    """(dt + v2 d2 + v3 d3) psi + a7 psi + eps (d2^4 + d3^4) psi."""
    m = bs.mesh if mesh is None else mesh
    vb = bs.Ub[0, 1:4]
    out = m.D(psi, 0, surface=True) + vb[1] * m.D(psi, 2, surface=True)
    out = out + vb[2] * m.D(psi, 3, surface=True) + bs.a[6] * psi
    if sys.epsilon:
        out = out + sys.epsilon * (fourth_difference(psi, m, 2) + fourth_difference(psi, m, 3))
    return out


def regularized_kinematic(sys: EpsilonSystem, bs: BasicState, W2plus, psi, mesh=None):
    return W2plus - kinematic_rhs(sys, bs, psi, mesh)


def boundary_quadratic_matrix(sys: EpsilonSystem, bs: BasicState, bold=None):
    """diag(eps J+ - A1+, eps J- - A1-) on the interface, shape (..., 16, 16)."""
    bold = bs.bold_matrices() if bold is None else bold
    tr = lambda M: bs.mesh.trace(np.moveaxis(M, (-2, -1), (0, 1)))
    Jt = [tr(sys.Jplus), tr(sys.Jminus)]
    A1 = [tr(bold["A1"][s]) for s in range(2)]
    blocks = [np.moveaxis(sys.epsilon * Jt[s] - A1[s], (0, 1), (-2, -1)) for s in range(2)]
    out = np.zeros(blocks[0].shape[:-2] + (16, 16))
    out[..., :8, :8] = blocks[0]
    out[..., 8:, 8:] = blocks[1]
    return out


def boundary_inertia_reg(sys: EpsilonSystem, bs: BasicState, bold=None):
    """Inertia of the regularized boundary matrix, identical at every interface point."""
    M = boundary_quadratic_matrix(sys, bs, bold)
    flat = M.reshape(-1, 16, 16)
    counts = set()
    # regularized eigenvalues scale like epsilon; shrink the zero threshold with it
    tol = min(1e-9, 1e-3 * sys.epsilon) if sys.epsilon > 0 else None
    for B in flat:
        lam = np.linalg.eigvalsh(0.5 * (B + B.T))
        scale = max(np.abs(lam).max(), 1e-300)
        if tol is None:
            counts.add(eigen_inertia(lam, scale))
        else:
            counts.add(eigen_inertia(lam, scale, zero_tol=tol, band=tol))
    if len(counts) != 1:
        raise InertiaChanged(f"inertia varies along the interface: {sorted(counts)}")
    inertia = counts.pop()
    if sys.epsilon > 0 and inertia[1] != 6:
        raise InertiaChanged(f"regularized boundary matrix has inertia {inertia}")
    return inertia


def find_eps0(bs: BasicState, bracket=EPS_BRACKET, iters=40):
    """Largest epsilon in the bracket keeping six negative boundary eigenvalues."""
    bold = bs.bold_matrices()
    Jp, Jm = assemble_J(bs)

    def ok(eps):
        try:
            boundary_inertia_reg(EpsilonSystem(eps, Jp, Jm), bs, bold)
            return True
        except InertiaChanged:
            return False

    lo, hi = bracket
    if not ok(lo):
        raise InertiaChanged("no admissible epsilon in the search bracket")
    if ok(hi):
        return hi
    for _ in range(iters):
        mid = np.sqrt(lo * hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


# ---------------------------------------------------------------------------
# transport structure
# ---------------------------------------------------------------------------

def transport_speed(bs: BasicState):
    """w1 = (v.N - dt Phi) / d1 Phi per side, over the volume grid."""
    out = []
    for s in range(2):
        DP = bs.DPhi[:, s]
        v = bs.U[s, 1:4]
        vN = v[0] - DP[2] * v[1] - DP[3] * v[2]
        out.append((vN - DP[0]) / DP[1])
    return np.stack(out)


def _transport(bs, q, mesh, w1):
    m = bs.mesh if mesh is None else mesh
    v = bs.U[:, 1:4]
    out = m.D(q, 0) + w1 * m.D(q, 1) + v[:, 1] * m.D(q, 2)
    return out + v[:, 2] * m.D(q, 3)


def entropy_transport_residual(bs: BasicState, W8, f8, W, mesh=None, bold=None):
    """Residual of the entropy row: transport of W8 minus f8 minus the zero-order coupling."""
    bold = bs.bold_matrices() if bold is None else bold
    coupling = -_matvec(bold["A4"], W)[:, 7]
    return _transport(bs, W8, mesh, transport_speed(bs)) - f8 - coupling


def divergence_xi(bs: BasicState, W):
    """xi = flattened divergence of the magnetic part of J W, per side."""
    V = bs.from_W(W)
    return np.stack([div_flat(bs.lmap, V[s, 4:7], s) for s in range(2)])


def xi_transport_residual(sys: EpsilonSystem, bs: BasicState, xi, sources=0.0, mesh=None):
    """(dt + w1 d1 + v2 d2 + v3 d3) xi, with -eps d1 on the plus side only, minus sources."""
    m = bs.mesh if mesh is None else mesh
    out = _transport(bs, xi, m, transport_speed(bs))
    if sys.epsilon:
        out[0] = out[0] - sys.epsilon * m.D(xi[0], 1)
    return out - sources
