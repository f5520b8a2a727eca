"""Time-derivative traces of initial data, compatibility checks, approximate solutions."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from .diagnostics import sobolev_norm
from .eos_state import as_pair, check_hyperbolicity
from .errors import AdmissibilityLost, HyperbolicityViolated, StencilTooCoarse
from .geometry import CutoffChi, Mesh, _smooth_step, curvature, lift
from .linearization import _interior_side, nonlinear_boundary, nonlinear_interior
from .nash_moser import ApproxSolution
from .symbols import Coeffs, apply_A0, dense

MAX_LMAX = 2
# finite-difference steps for derivatives along the Taylor trajectory
FD_STEP = {1: 1e-3, 2: 3e-3, 3: 1e-2}
# centred stencils of fourth order: offsets and weights per derivative order
FD_STENCIL = {
    1: (np.arange(-2, 3), np.array([1, -8, 0, 8, -1]) / 12.0),
    2: (np.arange(-2, 3), np.array([-1, 16, -30, 16, -1]) / 12.0),
    3: (np.arange(-3, 4), np.array([1, -8, 13, 0, -13, 8, -1]) / 8.0),
}


@dataclass
class InitialData:
    """Steady fields U0 (2, 8, 1, n1+1, n2[, n3]) and interface phi0 (1, n2[, n3])."""
    U0: np.ndarray
    phi0: np.ndarray
    mesh: Mesh  # steady spatial mesh (nt = 1)
    closure: object
    sfrak: float = 1.0
    kappa: float | None = None

    def __post_init__(self):
        self.U0 = np.asarray(self.U0, float)
        self.phi0 = np.asarray(self.phi0, float)
        if self.mesh.nt != 1:
            self.mesh = self.mesh.with_time(1, self.mesh.dt)
        if self.kappa is None:
            from .geometry import normal
            HN = np.sum(self.mesh.trace(self.U0)[:, 4:7] * normal(self.phi0, self.mesh)[None], 1)
            self.kappa = float(np.abs(HN).min())

    @classmethod
    def from_background(cls, bg, mesh: Mesh, closure, sfrak=1.0):
        m = mesh.with_time(1, mesh.dt)
        U = np.empty((2, 8) + m.vol_shape)
        U[...] = bg.pair().reshape((2, 8) + (1,) * len(m.vol_shape))
        return cls(U, np.zeros(m.surf_shape), m, closure, sfrak)

    @property
    def M0(self):
        """Data size: H^2 of the fields plus H^3 of the interface."""
        U = self.U0 - self.U0.mean(axis=tuple(range(2, self.U0.ndim)), keepdims=True)
        return float(sobolev_norm(U, 2, self.mesh) + sobolev_norm(self.phi0, 3, self.mesh, "boundary"))

    def check(self):
        cl = as_pair(self.closure)
        ok = all(check_hyperbolicity(cl[s], self.U0[s])[0] for s in range(2))
        if not ok:
            raise HyperbolicityViolated("initial data leave the hyperbolicity band")
        if np.abs(self.phi0).max() > 0.25:
            raise AdmissibilityLost("|phi0| exceeds 1/4")
        return True


@dataclass
class TraceSet:
    """U_(l) (2, 8, 1, n1+1, ...) and phi_(l) (1, ...) for l = 0..len-1."""
    U: list
    phi: list
    lmax: int
    info: dict = field(default_factory=dict)

    def H_tau(self, l, mesh: Mesh):
        """d_t^l (H . tau_i) at t = 0 per side, shape (2, 2, 1, ...) (side, i)."""
        out = []
        for s in range(2):
            rows = []
            for i, k in enumerate((2, 3)):
                acc = 0.0
                for j in range(l + 1):
                    Hj = mesh.trace(self.U[j][s, 4:7])
                    dphi = mesh.D(self.phi[l - j], k, surface=True)
                    tau = [dphi, 0.0, 0.0]
                    if l - j == 0:
                        tau[1 + i] = 1.0
                    acc = acc + comb(l, j) * sum(Hj[c] * tau[c] for c in range(3))
                rows.append(acc * np.ones(mesh.surf_shape))
            out.append(np.stack(rows))
        return np.stack(out)


# ---------------------------------------------------------------------------
# time derivative from the symmetric system
# ---------------------------------------------------------------------------

def time_derivative(U, phi, phi_t, mesh: Mesh, closure, cutoff=CutoffChi()):
    """d_t U = -A0^{-1}(tildeA1 d1 U + A2 d2 U + A3 d3 U) on a steady mesh."""
    cl = as_pair(closure)
    lm = lift(phi, mesh, cutoff, check=False)
    DPhi = lm.DPhi.copy()
    x1 = mesh.x1.reshape((-1,) + (1,) * mesh.ntan)
    DPhi[0] = cutoff(x1) * np.expand_dims(phi_t, -(mesh.ntan + 1))
    out = []
    for s in range(2):
        c = Coeffs(U[s], cl[s])
        DU = [np.zeros_like(U[s])] + [mesh.D(U[s], k) for k in (1, 2, 3)]
        R = _interior_side(c, DPhi[:, s], DU)
        A0 = dense(lambda W: apply_A0(c, W), U.shape[2:])
        out.append(-np.moveaxis(np.linalg.solve(A0, np.moveaxis(R, 0, -1)[..., None])[..., 0], -1, 0))
    return np.stack(out)


def _kinematic(U, phi, mesh: Mesh):
    """v+ . N(phi) on the interface."""
    v = mesh.trace(U[0, 1:4])
    return v[0] - v[1] * mesh.D(phi, 2, surface=True) - v[2] * mesh.D(phi, 3, surface=True)


def _taylor(coeffs, t):
    return sum(c * t ** l / factorial(l) for l, c in enumerate(coeffs))


def _dt_at_zero(fn, order):
    """order-th derivative at t = 0 of fn(t) by a fourth-order centred stencil."""
    if order == 0:
        return fn(0.0)
    offs, w = FD_STENCIL[order]
    eta = FD_STEP[order]
    return sum(wi * fn(o * eta) for o, wi in zip(offs, w) if wi != 0) / eta ** order


def compute_traces(data: InitialData, lmax=1):
    """U_(l), phi_(l) for l = 0..lmax+1 via the chain rule along the Taylor trajectory."""
    m = data.mesh
    if lmax > MAX_LMAX or lmax < 0:
        raise StencilTooCoarse(f"trace order {lmax} exceeds the supported {MAX_LMAX}")
    if min(m.n1, m.n2) < 4 * (lmax + 2) or (m.n3 and m.n3 < 4 * (lmax + 2)):
        raise StencilTooCoarse("grid too coarse for the requested trace order")
    U = [data.U0]
    phi = [data.phi0, _kinematic(data.U0, data.phi0, m)]
    for l in range(lmax + 1):
        # U_(l+1) = d^l/dt^l G(U(t), phi(t), phi_t(t)); needs U up to l, phi up to l+1
        Uc, pc = list(U), list(phi)
        dpc = pc[1:]
        G = lambda t: time_derivative(_taylor(Uc, t), _taylor(pc, t), _taylor(dpc, t),
                                      m, data.closure)
        U.append(_dt_at_zero(G, l))
        # phi_(l+2) = d^(l+1)/dt^(l+1) (v+ . N)
        Uc = list(U)
        K = lambda t: _kinematic(_taylor(Uc, t), _taylor(pc, t), m)
        phi.append(_dt_at_zero(K, l + 1))
    return TraceSet(U, phi, lmax)


# ---------------------------------------------------------------------------
# compatibility
# ---------------------------------------------------------------------------

def check_compatibility(traces: TraceSet, data: InitialData, order=None):
    """Residuals of the pressure/curvature and continuity relations for l = 0..order."""
    m = data.mesh
    order = traces.lmax if order is None else order
    tol = 1e-8 * (1 + data.M0)
    rows = []
    for l in range(order + 1):
        Ul = traces.U[l]
        jp = m.trace(Ul[0, 0]) - m.trace(Ul[1, 0])
        pc = list(traces.phi)
        curv = _dt_at_zero(lambda t: curvature(_taylor(pc, t), m), l)
        r_p = float(np.abs(jp - data.sfrak * curv).max())
        jv = m.trace(Ul[0, 1:4]) - m.trace(Ul[1, 1:4])
        r_v = float(np.abs(jv).max())
        Ht = traces.H_tau(l, m)
        r_h = float(np.abs(Ht[0] - Ht[1]).max())
        worst = max(r_p, r_v, r_h)
        rows.append({"order": l, "pressure": r_p, "velocity": r_v, "tangential_H": r_h,
                     "pass": worst <= tol})
    return {"orders": rows, "tol": tol, "pass": all(r["pass"] for r in rows),
            "first_failure": next((r["order"] for r in rows if not r["pass"]), None)}


# ---------------------------------------------------------------------------
# approximate solution
# ---------------------------------------------------------------------------

def time_cutoff(t, T):
    """1 on [0, T], decaying smoothly to 0 at 2T."""
    return 1.0 - _smooth_step(np.asarray(t, float) / T - 1.0)


def build_approximate(data: InitialData, traces: TraceSet, T, nt=11, cutoff=CutoffChi()):
    """Taylor-in-time fields and interface with interface-trace corrections; f^a = -L(U^a)."""
    m0 = data.mesh
    m = m0.with_time(nt, T / (nt - 1))
    t = m.t
    tv = t.reshape((-1,) + (1,) * (m.ntan + 1))
    ts = t.reshape((-1,) + (1,) * m.ntan)
    cv, cs = time_cutoff(tv, T), time_cutoff(ts, T)
    U = sum((cv if l else 1.0) * tv ** l / factorial(l) * traces.U[l] for l in range(len(traces.U)))
    phi = sum((cs if l else 1.0) * ts ** l / factorial(l) * traces.phi[l][0] for l in range(len(traces.phi)))
    U = np.array(U, float)
    chi = cutoff(m.x1).reshape((-1,) + (1,) * m.ntan)
    ext = lambda g: np.expand_dims(g, -(m.ntan + 1)) * chi
    Ut = m.trace(U)
    # pressure, tangential velocity and the magnetic field first (minus side matched to plus)
    U[1, 0] += ext(Ut[0, 0] - Ut[1, 0] - data.sfrak * curvature(phi, m))
    for c in (2, 3, 4, 5, 6):
        U[1, c] += ext(Ut[0, c] - Ut[1, c])
    # normal velocity from the kinematic identity
    D = lambda u, k: m.D(u, k, surface=True)
    Ut = m.trace(U)
    w = D(phi, 0) + Ut[0, 2] * D(phi, 2) + Ut[0, 3] * D(phi, 3)
    for s in range(2):
        U[s, 1] += ext(w - Ut[s, 1])
    lm = lift(phi, m, cutoff, check=False)
    if np.any(lm.DPhi[1, 0] < 5 / 8) or np.any(lm.DPhi[1, 1] > -5 / 8):
        raise AdmissibilityLost("normal Jacobian of the approximate lift below 5/8")
    from .geometry import normal
    HN = np.sum(m.trace(U)[:, 4:7] * normal(phi, m)[None], 1)
    if np.abs(HN).min() < 0.75 * data.kappa:
        raise AdmissibilityLost("approximate normal magnetic field below 3/4 kappa")
    L = nonlinear_interior(U, phi, m, data.closure, cutoff, check=False)
    f = -L
    f[:, :, 0] = 0.0
    return ApproxSolution(U, phi, f, m, data.closure, data.sfrak, data.kappa)


def boundary_residual(approx: ApproxSolution):
    return nonlinear_boundary(approx.U, approx.phi, approx.mesh, approx.sfrak)


def initial_residual_derivatives(data: InitialData, traces: TraceSet, lmax=None):
    """max |d_t^l L(U^a, Phi^a)| at t = 0 for the Taylor fields, l = 0..lmax (continuous in t)."""
    m = data.mesh
    lmax = traces.lmax if lmax is None else lmax
    Uc, pc = list(traces.U), list(traces.phi)
    dUc, dpc = Uc[1:], pc[1:]

    def Lc(t):
        U = _taylor(Uc, t)
        Ut = _taylor(dUc, t)
        G = time_derivative(U, _taylor(pc, t), _taylor(dpc, t), m, data.closure)
        cl = as_pair(data.closure)
        return np.stack([apply_A0(Coeffs(U[s], cl[s]), Ut[s] - G[s]) for s in range(2)])

    return [float(np.abs(_dt_at_zero(Lc, l)).max()) for l in range(lmax + 1)]
