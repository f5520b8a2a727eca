"""Nonlinear operators, the basic state and the linearized (effective) operators.

Pairs of side fields are stacked on a leading axis of length 2 (index 0 is
the plus side): volume perturbations have shape (2, 8, nt, n1+1, n2[, n3]),
interface fields (nt, n2[, n3]) and boundary residuals (7, nt, n2[, n3]).
"""
from __future__ import annotations

import numpy as np

from .eos_state import as_pair, check_hyperbolicity
from .errors import AdmissibilityLost, SingularTransform
from .geometry import (CutoffChi, Mesh, curvature, curvature_linearized,
                       curvature_second, lift, normal, tangents)
from .symbols import (Coeffs, apply_A, apply_A0, apply_dA, apply_dA0,
                      apply_dtildeA1, apply_tildeA1, dense)


# ---------------------------------------------------------------------------
# nonlinear operators
# ---------------------------------------------------------------------------

def _interior_side(c, DPs, DUs):
    out = apply_A0(c, DUs[0]) + apply_tildeA1(c, DPs, DUs[1]) + apply_A(c, 2, DUs[2])
    return out + apply_A(c, 3, DUs[3])


def nonlinear_interior(U, phi, mesh: Mesh, closure, cutoff=CutoffChi(), check=True):
    """L(U, Phi) U = A0 dt U + tildeA1 d1 U + A2 d2 U + A3 d3 U on both sides."""
    lm = lift(phi, mesh, cutoff, check=check)
    cl = as_pair(closure)
    out = []
    for s in range(2):
        DUs = [mesh.D(U[s], k) for k in range(4)]
        out.append(_interior_side(Coeffs(U[s], cl[s]), lm.DPhi[:, s], DUs))
    return np.stack(out)


def jump(Ut):
    return Ut[0] - Ut[1]


def nonlinear_boundary(U, phi, mesh: Mesh, sfrak):
    """The seven interface conditions evaluated at x1 = 0."""
    Ut = mesh.trace(U)
    j = jump(Ut)
    N = normal(phi, mesh)
    t1, t2 = tangents(phi, mesh)
    rows = [j[0] - sfrak * curvature(phi, mesh)]
    rows += [j[1], j[2], j[3]]
    rows += [np.sum(j[4:7] * t1, 0), np.sum(j[4:7] * t2, 0)]
    rows.append(mesh.D(phi, 0, surface=True) - np.sum(Ut[0, 1:4] * N, 0))
    return np.stack(np.broadcast_arrays(*rows))


# ---------------------------------------------------------------------------
# W-transform blocks
# ---------------------------------------------------------------------------

def J_apply(P2, P3, W):
    """V = J W for slopes (P2, P3) = (d2 Psi, d3 Psi)."""
    n2 = 1 + P2 ** 2 + P3 ** 2
    w4, w5, w6 = W[4], W[5], W[6]
    H1 = (P2 * w4 + P3 * w5 + w6) / n2
    H2 = ((1 + P3 ** 2) * w4 - P2 * P3 * w5 - P2 * w6) / n2
    H3 = (-P2 * P3 * w4 + (1 + P2 ** 2) * w5 - P3 * w6) / n2
    v1 = W[1] + P2 * W[2] + P3 * W[3]
    return np.stack(np.broadcast_arrays(W[0], v1, W[2], W[3], H1, H2, H3, W[7]))


def J_inverse_apply(P2, P3, V):
    """W = J^{-1} V: (p, v.N, v2, v3, H.tau1, H.tau2, H.N, S)."""
    vN = V[1] - P2 * V[2] - P3 * V[3]
    Ht1 = P2 * V[4] + V[5]
    Ht2 = P3 * V[4] + V[6]
    HN = V[4] - P2 * V[5] - P3 * V[6]
    return np.stack(np.broadcast_arrays(V[0], vN, V[2], V[3], Ht1, Ht2, HN, V[7]))


def J_transpose_apply(P2, P3, X):
    n2 = 1 + P2 ** 2 + P3 ** 2
    x4, x5, x6 = X[4], X[5], X[6]
    w4 = (P2 * x4 + (1 + P3 ** 2) * x5 - P2 * P3 * x6) / n2
    w5 = (P3 * x4 - P2 * P3 * x5 + (1 + P2 ** 2) * x6) / n2
    w6 = (x4 - P2 * x5 - P3 * x6) / n2
    return np.stack(np.broadcast_arrays(X[0], X[1], P2 * X[1] + X[2], P3 * X[1] + X[3],
                                        w4, w5, w6, X[7]))


# ---------------------------------------------------------------------------
# basic state
# ---------------------------------------------------------------------------

class BasicState:
    """Background (U, phi) about which the problem is linearized."""

    def __init__(self, U, phi, mesh: Mesh, closure, sfrak=1.0, cutoff=CutoffChi(),
                 kappa=None, check_lift=True):
        self.U = np.asarray(U)
        self.phi = np.asarray(phi)
        self.mesh = mesh
        self.closure = as_pair(closure)
        self.sfrak = sfrak
        self.cutoff = cutoff
        self.lmap = lift(self.phi, mesh, cutoff, check=check_lift)
        self.DPhi = self.lmap.DPhi
        self.Psi = self.lmap.Psi
        self.coeffs = [Coeffs(self.U[s], self.closure[s]) for s in range(2)]
        self.DU = np.stack([mesh.D(self.U, k) for k in range(4)])
        self.Ub = mesh.trace(self.U)
        self.N = normal(self.phi, mesh)
        self.tau = tangents(self.phi, mesh)
        # d1 U / d1 Phi on the interface, per side
        self.q = mesh.trace(self.DU[1] / self.DPhi[1][:, None])
        HN = np.sum(self.Ub[:, 4:7] * self.N[None], axis=1)
        self.kappa = float(np.min(np.abs(HN))) if kappa is None else kappa

    @classmethod
    def from_background(cls, bg, mesh: Mesh, closure, sfrak=1.0, cutoff=CutoffChi()):
        steady = mesh.with_time(1, mesh.dt)
        U = np.empty((2, 8) + steady.vol_shape)
        U[...] = bg.pair().reshape((2, 8) + (1,) * len(steady.vol_shape))
        return cls(U, np.zeros(steady.surf_shape), steady, closure, sfrak, cutoff)

    # -- admissibility --------------------------------------------------------
    def check(self):
        """Residuals of the basic-state requirements."""
        m = self.mesh
        hyp = all(check_hyperbolicity(self.closure[s], self.U[s])[0] for s in range(2))
        j = jump(self.Ub)
        kin = m.D(self.phi, 0, surface=True) - np.sum(self.Ub[0, 1:4] * self.N, 0)
        HN = np.sum(self.Ub[:, 4:7] * self.N[None], axis=1)
        return {
            "hyperbolic": hyp,
            "min_HN": float(np.min(np.abs(HN))),
            "jump_v": float(np.max(np.abs(j[1:4]))),
            "jump_H": float(np.max(np.abs(j[4:7]))),
            "kinematic": float(np.max(np.abs(kin))),
        }

    def require_admissible(self, kappa=None, tol=1e-10):
        r = self.check()
        kappa = self.kappa if kappa is None else kappa
        if not r["hyperbolic"]:
            raise AdmissibilityLost("hyperbolicity fails on the basic state")
        if r["min_HN"] < 0.5 * kappa:
            raise AdmissibilityLost("normal magnetic field below kappa/2")
        if max(r["jump_v"], r["jump_H"], r["kinematic"]) > tol:
            raise AdmissibilityLost("interface constraints violated")
        return r

    # -- boundary coefficients ------------------------------------------------
    @property
    def a(self):
        """Coefficients a1..a7 on the interface, shape (7, nt, ...)."""
        qp, qm = self.q
        d = qp - qm
        t1, t2 = self.tau
        a1 = -d[0]
        a2 = -np.sum(self.N * d[1:4], 0)
        a3, a4 = -d[2], -d[3]
        a5 = -np.sum(t1 * d[4:7], 0)
        a6 = -np.sum(t2 * d[4:7], 0)
        a7 = -np.sum(qp[1:4] * self.N, 0)
        return np.stack(np.broadcast_arrays(a1, a2, a3, a4, a5, a6, a7))

    # -- interior operators ---------------------------------------------------
    def _m(self, mesh):
        return self.mesh if mesh is None else mesh

    def nonlinear(self):
        return np.stack([_interior_side(self.coeffs[s], self.DPhi[:, s], self.DU[:, s])
                         for s in range(2)])

    def principal(self, V, mesh=None):
        """L(U, Phi) V."""
        m = self._m(mesh)
        out = []
        for s in range(2):
            DV = [m.D(V[s], k) for k in range(4)]
            out.append(_interior_side(self.coeffs[s], self.DPhi[:, s], DV))
        return np.stack(out)

    def zero_order(self, V):
        """C(U, Phi) V: derivative of the matrices in direction V contracted with DU."""
        out = []
        for s in range(2):
            c, DP, DU = self.coeffs[s], self.DPhi[:, s], self.DU[:, s]
            r = apply_dA0(c, V[s], DU[0]) + apply_dtildeA1(c, DP, V[s], DU[1])
            r = r + apply_dA(c, 2, V[s], DU[2]) + apply_dA(c, 3, V[s], DU[3])
            out.append(r)
        return np.stack(out)

    def effective(self, V, mesh=None):
        return self.principal(V, mesh) + self.zero_order(V)

    def lift_perturbation(self, psi):
        """Psi = chi(x1) psi on both sides."""
        m = self.mesh
        x1 = m.x1.reshape((-1,) + (1,) * m.ntan)
        P = self.cutoff(x1) * np.expand_dims(psi, -(m.ntan + 1))
        return np.stack([P, P])

    def full_derivative(self, V, Psi, mesh=None):
        """Exact derivative of the discrete L(U, Phi) U in direction (V, Psi)."""
        m = self._m(mesh)
        out = self.effective(V, mesh)
        for s in range(2):
            c, DP, DU1 = self.coeffs[s], self.DPhi[:, s], self.DU[1, s]
            DPsi = [m.D(Psi[s], k) for k in range(4)]
            r = DPsi[0] * apply_A0(c, DU1) + DPsi[2] * apply_A(c, 2, DU1)
            r = r + DPsi[3] * apply_A(c, 3, DU1)
            out[s] -= (r + DPsi[1] * apply_tildeA1(c, DP, DU1)) / DP[1]
        return out

    def good_unknown(self, V, Psi):
        return V - (Psi / self.DPhi[1])[:, None] * self.DU[1]

    def from_good_unknown(self, Vdot, Psi):
        return Vdot + (Psi / self.DPhi[1])[:, None] * self.DU[1]

    def alinhac_remainder(self, Psi, mesh=None):
        """(Psi / d1 Phi) d1 L(U, Phi) U."""
        LU = self.nonlinear()
        return (Psi / self.DPhi[1])[:, None] * self.mesh.D(LU, 1)

    # -- boundary operators ---------------------------------------------------
    def _psi_derivs(self, psi, m):
        return [m.D(psi, k, surface=True) if k != 1 else None for k in range(4)]

    def boundary_derivative(self, V, psi, mesh=None):
        """Exact derivative of the discrete interface conditions in direction (V, psi)."""
        m = self._m(mesh)
        Vt = m.trace(V)
        j = jump(Vt)
        dpsi = self._psi_derivs(psi, m)
        t1, t2 = self.tau
        jH1 = self.Ub[0, 4] - self.Ub[1, 4]
        rows = [j[0] - self.sfrak * curvature_linearized(self.phi, psi, self.mesh)]
        rows += [j[1], j[2], j[3]]
        rows.append(np.sum(j[4:7] * t1, 0) + jH1 * dpsi[2])
        rows.append(np.sum(j[4:7] * t2, 0) + jH1 * dpsi[3])
        vb = self.Ub[0, 1:4]
        rows.append(dpsi[0] - np.sum(Vt[0, 1:4] * self.N, 0) + vb[1] * dpsi[2] + vb[2] * dpsi[3])
        return np.stack(np.broadcast_arrays(*rows))

    def boundary_effective(self, Vdot, psi, mesh=None):
        """Effective interface operator acting on the good unknown."""
        m = self._m(mesh)
        Vt = m.trace(Vdot)
        j = jump(Vt)
        dpsi = self._psi_derivs(psi, m)
        a = self.a
        t1, t2 = self.tau
        dq = self.q[0] - self.q[1]
        rows = [j[0] - a[0] * psi - self.sfrak * curvature_linearized(self.phi, psi, self.mesh)]
        rows += [j[k] + psi * dq[k] for k in (1, 2, 3)]
        rows.append(np.sum(j[4:7] * t1, 0) - a[4] * psi)
        rows.append(np.sum(j[4:7] * t2, 0) - a[5] * psi)
        vb = self.Ub[0, 1:4]
        rows.append(dpsi[0] + vb[1] * dpsi[2] + vb[2] * dpsi[3]
                    - np.sum(Vt[0, 1:4] * self.N, 0) + a[6] * psi)
        return np.stack(np.broadcast_arrays(*rows))

    def boundary_second(self, first, second, mesh=None):
        """Second derivative of the interface conditions, bilinear in (V1, psi1), (V2, psi2)."""
        m = self._m(mesh)
        (V1, p1), (V2, p2) = first, second
        T1, T2 = m.trace(V1), m.trace(V2)
        j1, j2 = jump(T1), jump(T2)
        d1 = self._psi_derivs(p1, m)
        d2 = self._psi_derivs(p2, m)
        zero = 0 * j1[0]
        rows = [-self.sfrak * curvature_second(self.phi, p1, p2, self.mesh), zero, zero, zero]
        rows.append(j1[4] * d2[2] + j2[4] * d1[2])
        rows.append(j1[4] * d2[3] + j2[4] * d1[3])
        rows.append(T1[0, 2] * d2[2] + T1[0, 3] * d2[3] + T2[0, 2] * d1[2] + T2[0, 3] * d1[3])
        return np.stack(np.broadcast_arrays(*rows))

    # -- W coordinates --------------------------------------------------------
    def slopes(self, s):
        return self.DPhi[2, s], self.DPhi[3, s]

    def to_W(self, V):
        W = np.stack([J_inverse_apply(*self.slopes(s), V[s]) for s in range(2)])
        if not np.all(np.isfinite(W)):
            raise SingularTransform("W transform produced non-finite values")
        return W

    def from_W(self, W):
        return np.stack([J_apply(*self.slopes(s), W[s]) for s in range(2)])

    def JT(self, X):
        return np.stack([J_transpose_apply(*self.slopes(s), X[s]) for s in range(2)])

    def J_dense(self):
        shape = self.DPhi.shape[2:]
        return np.stack([dense(lambda W, s=s: J_apply(*self.slopes(s), W), shape)
                         for s in range(2)])

    def bold_matrices(self):
        """Dense J^T A J blocks (..., 8, 8) per side and the zero-order block A4."""
        # fields are fixed after construction, so the dense blocks are cached
        if getattr(self, "_bold", None) is None:
            self._bold = self._build_bold()
        return self._bold

    def _build_bold(self):
        shape = self.DPhi.shape[2:]
        out = {"A0": [], "A1": [], "A2": [], "A3": []}
        for s in range(2):
            c, DP = self.coeffs[s], self.DPhi[:, s]
            sl = self.slopes(s)

            def wrap(f):
                return lambda W: J_transpose_apply(*sl, f(J_apply(*sl, W)))

            out["A0"].append(dense(wrap(lambda V: apply_A0(c, V)), shape))
            out["A1"].append(dense(wrap(lambda V: apply_tildeA1(c, DP, V)), shape))
            out["A2"].append(dense(wrap(lambda V: apply_A(c, 2, V)), shape))
            out["A3"].append(dense(wrap(lambda V: apply_A(c, 3, V)), shape))
        out = {k: np.stack(v) for k, v in out.items()}
        cols = []
        for k in range(8):
            e = np.zeros((2, 8) + shape)
            e[:, k] = 1.0
            cols.append(self.JT(self.effective(self.from_W(e))))
        A4 = np.stack(cols, axis=2)  # (2, 8, 8, ...)
        out["A4"] = np.moveaxis(A4, (1, 2), (-2, -1))
        return out

    def A1_split(self):
        """(A_(0), A_(1)) with A_(1) the sparse part that carries A1 on the interface."""
        bold = self.bold_matrices()["A1"]
        A1p = np.zeros_like(bold)
        for s, sign in ((0, 1.0), (1, -1.0)):
            H = self.U[s, 4:7]
            P2, P3 = self.slopes(s)
            HN = H[0] - P2 * H[1] - P3 * H[2]
            H2, H3 = np.broadcast_arrays(H[1], H[2], HN)[:2]
            HN = np.broadcast_to(HN, H2.shape)
            M = A1p[s]
            M[..., 0, 1] = M[..., 1, 0] = sign
            M[..., 1, 4] = M[..., 4, 1] = sign * H2
            M[..., 1, 5] = M[..., 5, 1] = sign * H3
            M[..., 2, 4] = M[..., 4, 2] = -sign * HN
            M[..., 3, 5] = M[..., 5, 3] = -sign * HN
        return bold - A1p, A1p


# ---------------------------------------------------------------------------
# module-level entry points
# ---------------------------------------------------------------------------

def good_unknown(V, Psi, bs: BasicState):
    return bs.good_unknown(V, Psi)


def effective_interior(bs: BasicState, vdot, mesh=None):
    return bs.effective(vdot, mesh)


def boundary_effective(bs: BasicState, vdot, psi, mesh=None):
    return bs.boundary_effective(vdot, psi, mesh)


def w_transform(bs: BasicState, V):
    W = bs.to_W(V)
    return W, W[:, :6], W[:, 6:]


def decompose_A1(bs: BasicState):
    return bs.A1_split()


def boundary_second_derivative(bs: BasicState, first, second, mesh=None):
    return bs.boundary_second(first, second, mesh)
