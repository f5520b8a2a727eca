"""Symmetric system matrices, their directional derivatives and the boundary matrix.

Matrices are applied matrix-free on component-first arrays: U and W have
shape (8, ...). Dense 8x8 versions are obtained by applying to unit vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .eos_state import Constitutive, FluidState, as_pair, check_hyperbolicity
from .errors import DegenerateJacobian, HyperbolicityViolated, IllConditionedSpectrum

BC_COUNT = 7
ZERO_TOL = 1e-9
AMBIGUITY_TOL = 1e-6


class Coeffs:
    """Closure-dependent coefficients of a state field, computed once."""

    def __init__(self, U, closure: Constitutive):
        p, S = U[0], U[7]
        self.U = U
        self.v = U[1:4]
        self.H = U[4:7]
        self.rho = closure.rho(p, S)
        self.kappa = closure.kappa(p, S)
        self.rho_p, self.rho_S = closure.drho(p, S)
        self.kap_p, self.kap_S = closure.dkappa(p, S)


def _join(a, b, c):
    a, b, c = np.broadcast_arrays(a, b, c)
    return np.concatenate([a[:1], b[1:4], c[4:]])


def apply_A0(c: Coeffs, W):
    return _join(c.kappa * W, c.rho * W, W)


def apply_A(c: Coeffs, i: int, W):
    """A_i(U) W for i in {1, 2, 3}."""
    j = i - 1
    vi, Hi = c.v[j], c.H[j]
    HW = c.H[0] * W[4] + c.H[1] * W[5] + c.H[2] * W[6]
    out = [c.kappa * vi * W[0] + W[1 + j]]
    for k in range(3):
        row = c.rho * vi * W[1 + k] - Hi * W[4 + k]
        if k == j:
            row = row + W[0] + HW
        out.append(row)
    for k in range(3):
        out.append(c.H[k] * W[1 + j] - Hi * W[1 + k] + vi * W[4 + k])
    out.append(vi * W[7])
    return np.stack(np.broadcast_arrays(*out))


def apply_dA0(c: Coeffs, V, W):
    """(d/ds) A0(U + sV) W at s = 0."""
    drho = c.rho_p * V[0] + c.rho_S * V[7]
    dkap = c.kap_p * V[0] + c.kap_S * V[7]
    return _join(dkap * W, drho * W, 0 * W)


def apply_dA(c: Coeffs, i: int, V, W):
    j = i - 1
    vi, dvi, dHi = c.v[j], V[1 + j], V[4 + j]
    drho = c.rho_p * V[0] + c.rho_S * V[7]
    dkap = c.kap_p * V[0] + c.kap_S * V[7]
    dHW = V[4] * W[4] + V[5] * W[5] + V[6] * W[6]
    out = [(dkap * vi + c.kappa * dvi) * W[0]]
    for k in range(3):
        row = (drho * vi + c.rho * dvi) * W[1 + k] - dHi * W[4 + k]
        if k == j:
            row = row + dHW
        out.append(row)
    for k in range(3):
        out.append(V[4 + k] * W[1 + j] - dHi * W[1 + k] + dvi * W[4 + k])
    out.append(dvi * W[7])
    return np.stack(np.broadcast_arrays(*out))


def apply_tildeA1(c: Coeffs, DPhi, W):
    """(A1 - Phi_t A0 - Phi_2 A2 - Phi_3 A3) W / Phi_1 with DPhi = (Phi_t, Phi_1, Phi_2, Phi_3)."""
    out = apply_A(c, 1, W) - DPhi[0] * apply_A0(c, W) - DPhi[2] * apply_A(c, 2, W)
    out = out - DPhi[3] * apply_A(c, 3, W)
    return out / DPhi[1]


def apply_dtildeA1(c: Coeffs, DPhi, V, W):
    out = apply_dA(c, 1, V, W) - DPhi[0] * apply_dA0(c, V, W) - DPhi[2] * apply_dA(c, 2, V, W)
    out = out - DPhi[3] * apply_dA(c, 3, V, W)
    return out / DPhi[1]


def dense(apply, shape=()):
    """Assemble the (..., 8, 8) matrix of a linear map given on (8, ...) arrays."""
    cols = []
    for k in range(8):
        e = np.zeros((8,) + tuple(shape))
        e[k] = 1.0
        cols.append(apply(e))
    M = np.stack(cols, axis=1)  # (8, 8, ...)
    return np.moveaxis(M, (0, 1), (-2, -1))


# ---------------------------------------------------------------------------
# pointwise assembly
# ---------------------------------------------------------------------------

def _vec(u):
    return u.vector() if isinstance(u, FluidState) else np.asarray(u, float)


def _coeffs_checked(c: Constitutive, u):
    vec = _vec(u)
    ok, _ = check_hyperbolicity(c, vec)
    if not ok:
        raise HyperbolicityViolated("state outside the hyperbolicity band")
    return Coeffs(vec, c)


def assemble_A0(c: Constitutive, u):
    cf = _coeffs_checked(c, u)
    return dense(lambda W: apply_A0(cf, W))


def assemble_Ai(c: Constitutive, u, i: int):
    if i not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    cf = _coeffs_checked(c, u)
    return dense(lambda W: apply_A(cf, i, W))


def assemble_tildeA1(c: Constitutive, u, dphi, dtPhi=0.0):
    """Lifted normal matrix at a point; dphi = (Phi_1, Phi_2, Phi_3)."""
    d1, d2, d3 = dphi
    if abs(d1) < 1e-6:
        raise DegenerateJacobian("d1 Phi vanishes")
    cf = _coeffs_checked(c, u)
    return dense(lambda W: apply_tildeA1(cf, (dtPhi, d1, d2, d3), W))


def characteristic_speeds(c: Constitutive, u, xi):
    """Generalized eigenvalues of (sum xi_i A_i, A0); returned complex."""
    A = sum(x * assemble_Ai(c, u, i + 1) for i, x in enumerate(xi))
    return sla.eig(A, assemble_A0(c, u), right=False)


# ---------------------------------------------------------------------------
# boundary matrix
# ---------------------------------------------------------------------------

@dataclass
class BoundaryMatrix:
    M: np.ndarray

    @property
    def inertia(self):
        return boundary_inertia(self)


def contact_boundary_matrix(closure, u_plus, u_minus, slopes=(0.0, 0.0), dt_phi=None):
    """diag(-tildeA1+, tildeA1-) on the interface for the given states.

    slopes = (d2 phi, d3 phi); dt_phi defaults to v+ . N (kinematic condition).
    """
    cp, cm = as_pair(closure)
    up, um = _vec(u_plus), _vec(u_minus)
    s2, s3 = slopes
    N = np.array([1.0, -s2, -s3])
    if dt_phi is None:
        dt_phi = up[1:4] @ N
    Ap = assemble_tildeA1(cp, up, (1.0, s2, s3), dt_phi)
    Am = assemble_tildeA1(cm, um, (-1.0, s2, s3), dt_phi)
    M = np.zeros((16, 16))
    M[:8, :8] = -Ap
    M[8:, 8:] = Am
    return BoundaryMatrix(M)


def eigen_inertia(lam, scale, zero_tol=ZERO_TOL, band=AMBIGUITY_TOL):
    lam = np.asarray(lam)
    a = np.abs(lam)
    if np.any((a >= zero_tol * scale) & (a <= band * scale)):
        raise IllConditionedSpectrum("eigenvalue inside the ambiguity band")
    zero = a < zero_tol * scale
    return int(np.sum((lam > 0) & ~zero)), int(np.sum((lam < 0) & ~zero)), int(np.sum(zero))


def boundary_inertia(bm):
    M = bm.M if isinstance(bm, BoundaryMatrix) else np.asarray(bm)
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))
    scale = max(np.linalg.norm(M, 2), 1e-300)
    return eigen_inertia(lam, scale)


PLANAR_COMPONENTS = [0, 1, 2, 4, 5, 7]


def reduce_planar(bm):
    """Drop v3 and H3 from both blocks of a 16x16 boundary matrix."""
    M = bm.M if isinstance(bm, BoundaryMatrix) else np.asarray(bm)
    idx = PLANAR_COMPONENTS + [8 + i for i in PLANAR_COMPONENTS]
    return BoundaryMatrix(M[np.ix_(idx, idx)])


def bc_count():
    """Number of interface conditions: six incoming characteristics plus one for phi."""
    return BC_COUNT


def bc_count_from_inertia(inertia):
    """Boundary conditions required by an inertia: one per incoming mode plus phi."""
    return inertia[1] + 1


def random_contact_pair(rng, closure=None, slope_scale=0.5, kappa_min=0.2):
    """Random admissible contact states (u+, u-, slopes) with |H.N| >= kappa_min."""
    from .eos_state import random_states
    closure = closure or Constitutive()
    while True:
        up = random_states(rng, 1, closure)[0]
        slopes = slope_scale * rng.standard_normal(2)
        N = np.array([1.0, -slopes[0], -slopes[1]])
        if abs(up[4:7] @ N) >= kappa_min:
            break
    um = up.copy()
    um[0] = up[0] * rng.uniform(0.7, 1.3)
    um[7] = up[7] + rng.choice([-1, 1]) * rng.uniform(0.1, 0.5)
    return up, um, slopes
