"""Time-marching solver for the effective linearized problem and its regularization.

The unknowns are the W coordinates on a slab [0, X1] x torus per side. Space
uses second-order differences (first-order one-sided closures in x1, so the
x1 operator is summation-by-parts); the seven interface conditions enter via
a simultaneous-approximation term solved pointwise at x1 = 0; the interface
perturbation psi is advanced together with W, with its fourth-order
regularization integrated exactly through an integrating factor.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import sobolev_norm
from .errors import (CFLViolated, ConfigInvalid, EpsilonOutOfRange, InertiaChanged,
                     NotCauchy, SolveDiverged)
from .geometry import Mesh, curvature_linearized
from .linearization import BasicState
from .regularization import assemble_J, biharmonic_symbol

DIVERGENCE_FACTOR = 1e6
SAFETY = 2.0  # target |lambda| dt for RK4, inside its stability region


@dataclass(frozen=True)
class Grid:
    nx1: int
    nx2: int
    nx3: int = 0
    X1: float = 8.0
    nt: int = 2
    dt: float = 0.01
    period: float = 2 * np.pi
    L: float = 4.0

    def __post_init__(self):
        if self.X1 < 2 * self.L:
            raise ConfigInvalid("slab depth must be at least twice the cutoff support")
        if self.nt < 1 or self.dt < 0:
            raise ConfigInvalid("bad time grid")

    def mesh(self):
        return Mesh(self.nx1, self.nx2, self.nx3, self.X1, self.period, self.nt, self.dt)

    @classmethod
    def from_mesh(cls, m: Mesh):
        return cls(m.n1, m.n2, m.n3, m.X1, m.nt, m.dt, m.period)


@dataclass
class LinearProblem:
    bs: BasicState
    mesh: Mesh
    f: np.ndarray | None = None  # (2, 8, nt, n1+1, ...) interior source
    g: np.ndarray | None = None  # (7, nt, ...) interface source
    epsilon: float = 1e-3
    coordinates: str = "good-unknown"  # or "W" (f already transformed, g must vanish)
    initial: tuple | None = None  # optional (W0 (2, 8, n1+1, ...), psi0 (...))
    far: str = "outflow"  # or "wall"
    eps0: float | None = None
    # source interpolation between time levels: "causal" reads levels <= the step end,
    # "centred" reads one level ahead (consistent with centred time differences)
    source_interp: str = "causal"

    def __post_init__(self):
        if self.coordinates not in ("good-unknown", "W"):
            raise ConfigInvalid(f"unknown coordinates {self.coordinates!r}")
        if self.far not in ("outflow", "wall"):
            raise ConfigInvalid(f"unknown far-end treatment {self.far!r}")
        if self.source_interp not in ("causal", "centred"):
            raise ConfigInvalid(f"unknown source interpolation {self.source_interp!r}")
        ntb = self.bs.U.shape[2]
        if ntb not in (1, self.mesh.nt):
            raise ConfigInvalid("basic state must be steady or share the time grid")


@dataclass
class LinearSolution:
    W: np.ndarray       # (2, 8, nt, n1+1, ...)
    psi: np.ndarray     # (nt, ...)
    Vdot: np.ndarray    # good unknown J W + V_natural
    mesh: Mesh
    epsilon: float
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# homogenization of the interface source
# ---------------------------------------------------------------------------

def natural_lift(g, mesh: Mesh, cutoff):
    """V_natural built from the components of g, extended by cutoff(x1)."""
    R = lambda comp: mesh.extend(comp, cutoff)
    z = np.zeros((2, 8) + mesh.vol_shape)
    z[0, 0] = R(g[0])
    z[0, 1] = -R(g[6])
    z[0, 5] = R(g[4])
    z[0, 6] = R(g[5])
    z[1, 1] = -R(g[1] + g[6])
    z[1, 2] = -R(g[2])
    z[1, 3] = -R(g[3])
    return z


def homogenize_boundary(prob: LinearProblem):
    """Return (problem with g = 0, V_natural)."""
    m = prob.mesh
    zero = np.zeros((2, 8) + m.vol_shape)
    if prob.g is None or not np.any(prob.g):
        return replace(prob, g=None), zero
    if prob.coordinates == "W":
        raise ConfigInvalid("interface sources must be given in good-unknown coordinates")
    Vn = natural_lift(prob.g, m, prob.bs.cutoff)
    f = zero if prob.f is None else prob.f
    return replace(prob, f=f - prob.bs.effective(Vn, m), g=None), Vn


# ---------------------------------------------------------------------------
# discrete operators on the component-last layout (2, n1+1, tan..., 8)
# ---------------------------------------------------------------------------

def _mv(M, x):
    return np.einsum("...ij,...j->...i", M, x)


def _sbp_d1(W, h):
    d = np.empty_like(W)
    d[:, 1:-1] = (W[:, 2:] - W[:, :-2]) / (2 * h)
    d[:, 0] = (W[:, 1] - W[:, 0]) / h
    d[:, -1] = (W[:, -1] - W[:, -2]) / h
    return d


def _dper(u, h, axis):
    return (np.roll(u, -1, axis) - np.roll(u, 1, axis)) / (2 * h)


def _to_last(W):
    return np.moveaxis(W, 1, -1)


def _to_first(W):
    return np.moveaxis(W, -1, 1)


class _Level:
    """Coefficients of the semi-discrete system at one basic-state time level."""

    def __init__(self, bs: BasicState, bold, J, l, eps, far, sfrak):
        m = bs.mesh
        take = lambda A: A[:, l]
        A0 = take(bold["A0"])
        self.A0 = A0
        self.A0inv = np.linalg.inv(A0)
        A1e = take(bold["A1"]) - eps * J[:, l]
        self.M1 = self.A0inv @ A1e
        self.M2 = self.A0inv @ take(bold["A2"])
        self.M3 = self.A0inv @ take(bold["A3"]) if m.n3 else None
        self.M4 = self.A0inv @ take(bold["A4"])
        h = m.h1
        tan = m.tan_shape
        # interface: incoming modes of A1 - eps J (positive eigenvalues)
        lam, R = np.linalg.eigh(A1e[:, 0])
        tol = 1e-3 * eps if eps > 0 else 1e-10
        npos = (lam > tol).sum(-1)
        if np.any(npos != 3):
            raise InertiaChanged(f"expected 3 incoming modes per side, found {np.unique(npos)}")
        # eigh sorts ascending: the last three are incoming
        Rin, Lin = R[..., -3:], lam[..., -3:]
        self.Rin = Rin
        B = np.concatenate([Rin[0, ..., :6, :], -Rin[1, ..., :6, :]], axis=-1)
        self.Kinv = np.linalg.inv(B)
        self.P = (2.0 / h) * (self.A0inv[:, 0] @ (Rin * Lin[..., None, :]))
        # far end
        lam, R = np.linalg.eigh(A1e[:, -1])
        Q = np.zeros((2,) + tan + (8, 8))
        for idx in np.ndindex(*((2,) + tan)):
            neg = lam[idx] < -tol
            Rn, Ln = R[idx][:, neg], lam[idx][neg]
            if far == "outflow":
                Q[idx] = (Rn * Ln) @ Rn.T
            else:
                # wall: v = 0 through the three strongly incoming modes; modes of
                # speed O(eps) created by the regularization are left free
                R3, L3 = R[idx][:, :3], lam[idx][:3]
                sel = np.zeros((3, 8))
                sel[[0, 1, 2], [1, 2, 3]] = 1.0
                Q[idx] = (R3 * L3) @ np.linalg.solve(R3[1:4], sel)
        self.Q = (2.0 / h) * (self.A0inv[:, -1] @ Q)
        a = bs.a[:, l]
        self.a = a
        self.vb = bs.Ub[0, 1:4, l]
        self.phi = bs.phi[l]
        self.sfrak = sfrak
        self.mesh = m

    def rhs(self, W, psi, fsrc=None):
        m = self.mesh
        ntan = m.ntan
        r = _mv(self.M1, _sbp_d1(W, m.h1)) + _mv(self.M2, _dper(W, m.h2, 2)) + _mv(self.M4, W)
        if self.M3 is not None:
            r = r + _mv(self.M3, _dper(W, m.h3, 3))
        r = -r
        if fsrc is not None:
            r = r + _mv(self.A0inv, fsrc)
        target = np.moveaxis(self.a[:6] * psi, 0, -1)
        target[..., 0] += self.sfrak * curvature_linearized(self.phi, psi, m)
        jump = W[0, 0, ..., :6] - W[1, 0, ..., :6]
        alpha = _mv(self.Kinv, target - jump)
        ap, am = alpha[..., :3], alpha[..., 3:]
        r[0, 0] += _mv(self.P[0], ap)
        r[1, 0] += _mv(self.P[1], am)
        W1 = W[0, 0, ..., 1] + _mv(self.Rin[0], ap)[..., 1]
        dpsi = W1 - self.vb[1] * _dper(psi, m.h2, 0) - self.a[6] * psi
        if ntan == 2:
            dpsi = dpsi - self.vb[2] * _dper(psi, m.h3, 1)
        r[:, -1] += _mv(self.Q, W[:, -1])
        return r, dpsi


class _Stepper:
    def __init__(self, bs: BasicState, eps, far="outflow"):
        self.bs = bs
        bold = bs.bold_matrices()
        Jp, Jm = assemble_J(bs)
        J = np.stack([Jp, Jm])
        ntb = bs.U.shape[2]
        self.levels = [_Level(bs, bold, J, l, eps, far, bs.sfrak) for l in range(ntb)]
        m = bs.mesh
        k2 = np.fft.fftfreq(m.n2, d=1.0 / m.n2) * (2 * np.pi / m.period)
        if m.n3:
            k3 = np.fft.rfftfreq(m.n3, d=1.0 / m.n3) * (2 * np.pi / m.period)
            sym = biharmonic_symbol(k2, m.h2)[:, None] + biharmonic_symbol(k3, m.h3)[None, :]
        else:
            k2 = np.fft.rfftfreq(m.n2, d=1.0 / m.n2) * (2 * np.pi / m.period)
            sym = biharmonic_symbol(k2, m.h2)
        self.sym = eps * sym
        self.tan = m.tan_shape
        self.eps = eps

    def expo(self, tau, psi):
        if not self.eps or tau == 0:
            return psi
        ax = tuple(range(-len(self.tan), 0))
        return np.fft.irfftn(np.exp(-tau * self.sym) * np.fft.rfftn(psi, axes=ax), s=self.tan, axes=ax)

    def F(self, t, W, psi, src):
        """Right side at time t; src(t) gives the source in the component-last layout."""
        fs = src(t) if src is not None else None
        if len(self.levels) == 1:
            return self.levels[0].rhs(W, psi, fs)
        s = t / self.bs.mesh.dt
        if abs(s - round(s)) < 1e-12:
            return self.levels[int(round(s))].rhs(W, psi, fs)
        idx, w = time_stencil(s, len(self.levels))
        # the right side is linear in the coefficients, so interpolating outputs is exact
        out = [self.levels[i].rhs(W, psi, fs) for i in idx]
        return (sum(wi * o[0] for wi, o in zip(w, out)),
                sum(wi * o[1] for wi, o in zip(w, out)))

    def step(self, t, W, psi, h, src):
        E = self.expo
        k1, q1 = self.F(t, W, psi, src)
        k2, q2 = self.F(t + h / 2, W + h / 2 * k1, E(h / 2, psi + h / 2 * q1), src)
        k3, q3 = self.F(t + h / 2, W + h / 2 * k2, E(h / 2, psi) + h / 2 * q2, src)
        k4, q4 = self.F(t + h, W + h * k3, E(h, psi) + h * E(h / 2, q3), src)
        Wn = W + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        pn = E(h, psi) + h / 6 * (E(h, q1) + 2 * E(h / 2, q2 + q3) + q4)
        return Wn, pn

    def spectral_radius(self, iters=40, seed=0):
        """Power-iteration estimate of the largest eigenvalue modulus of the source-free right side."""
        rng = np.random.default_rng(seed)
        m = self.bs.mesh
        W = rng.standard_normal((2, m.n1 + 1) + self.tan + (8,))
        psi = rng.standard_normal(self.tan)
        rho = 0.0
        for lev in (self.levels[0], self.levels[-1]):
            w, p = W.copy(), psi.copy()
            for _ in range(iters):
                nrm = np.sqrt(np.sum(w * w) + np.sum(p * p))
                w, p = w / nrm, p / nrm
                w, p = lev.rhs(w, p)
                rho = max(rho, float(np.sqrt(np.sum(w * w) + np.sum(p * p))))
        return rho

    def energy(self, W):
        m = self.bs.mesh
        A0 = self.levels[0].A0
        q = np.einsum("...i,...ij,...j->...", W, A0, W)
        w = np.full(m.n1 + 1, m.h1)
        w[0] = w[-1] = 0.5 * m.h1
        q = np.tensordot(q, w, axes=([1], [0]))
        return float(np.sum(q) * m.h2 * (m.h3 if m.n3 else 1.0))


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------

def time_stencil(s, nt, causal=False):
    """Nodes and weights of cubic Lagrange interpolation at fractional level s.

    causal=True uses nodes l-2..l+1 only, so the interpolant never reads a later
    level; negative nodes stand for the vanishing past and the caller treats them as zero.
    """
    l = int(min(max(np.floor(s), 0), nt - 2))
    if causal:
        nodes = np.arange(l - 2, l + 2)
    elif nt < 4:
        nodes = np.array([l, l + 1])
    else:
        l0 = min(max(l - 1, 0), nt - 4)
        nodes = np.arange(l0, l0 + 4)
    w = [np.prod([(s - b) / (a - b) for b in nodes if b != a]) for a in nodes]
    return list(nodes), w


def _check_eps(prob: LinearProblem):
    if prob.epsilon <= 0 or (prob.eps0 is not None and prob.epsilon > prob.eps0):
        raise EpsilonOutOfRange(f"epsilon={prob.epsilon} outside (0, eps0]")


def solve_regularized(prob: LinearProblem, grid: Grid | None = None, substep=None,
                      stepper=None) -> LinearSolution:
    """March the regularized problem from zero (or the given) initial state."""
    _check_eps(prob)
    m = prob.mesh
    if grid is not None and grid.mesh() != m:
        raise ConfigInvalid("grid and problem mesh differ")
    if m.nt < 2 or m.dt <= 0:
        raise ConfigInvalid("need at least two time levels")
    hom, Vn = homogenize_boundary(prob)
    bs = prob.bs
    if bs.mesh.with_time(1, 0.0) != m.with_time(1, 0.0):
        raise ConfigInvalid("basic state and problem live on different spatial grids")
    st = stepper or _Stepper(_on_time_grid(bs, m), prob.epsilon, prob.far)

    # bold source in the component-last layout
    if hom.f is None:
        fb = None
    else:
        fW = hom.f if prob.coordinates == "W" else bs.JT(hom.f)
        fb = np.moveaxis(np.moveaxis(fW, 2, 0), 2, -1)  # (nt, 2, n1+1, tan..., 8)
        if not np.any(fb):
            fb = None

    causal = prob.source_interp == "causal"

    def src(t):
        if fb is None:
            return None
        s = t / m.dt
        if abs(s - round(s)) < 1e-12:
            return fb[int(round(s))]
        idx, w = time_stencil(s, m.nt, causal=causal)
        # sources vanish before t = 0
        return sum(wi * fb[i] for i, wi in zip(idx, w) if i >= 0)

    rho = st.spectral_radius()
    dt_stable = SAFETY / max(rho, 1e-300)
    if substep is not None and substep > dt_stable:
        raise CFLViolated(f"substep {substep:.3g} exceeds the stable step {dt_stable:.3g}")
    h = substep or dt_stable
    nsub = max(1, int(np.ceil(m.dt / h - 1e-12)))
    h = m.dt / nsub

    shape = (2, m.n1 + 1) + m.tan_shape + (8,)
    if prob.initial is not None:
        W = _to_last(np.asarray(prob.initial[0], float)).copy()
        psi = np.asarray(prob.initial[1], float).copy()
    else:
        W, psi = np.zeros(shape), np.zeros(m.tan_shape)
    Wout = np.empty((m.nt,) + shape)
    Pout = np.empty((m.nt,) + m.tan_shape)
    Wout[0], Pout[0] = W, psi
    scale = max(np.sqrt(np.sum(fb ** 2) * m.dt) if fb is not None else 0.0,
                float(np.sqrt(np.sum(W ** 2) + np.sum(psi ** 2))))
    energy = [st.energy(W)]
    t = 0.0
    for n in range(1, m.nt):
        for _ in range(nsub):
            if scale == 0.0:
                break
            W, psi = st.step(t, W, psi, h, src)
            t += h
        t = n * m.dt
        nrm = float(np.sqrt(np.sum(W ** 2) + np.sum(psi ** 2)))
        if not np.isfinite(nrm) or nrm > DIVERGENCE_FACTOR * max(scale, 1e-300) and scale > 0:
            raise SolveDiverged(f"solution norm {nrm:.3g} at level {n}")
        Wout[n], Pout[n] = W, psi
        energy.append(st.energy(W))
    Wf = np.moveaxis(Wout, -1, 0)            # (8, nt, 2, n1+1, tan)
    Wf = np.moveaxis(Wf, 2, 0)               # (2, 8, nt, n1+1, tan)
    Vdot = bs.from_W(Wf) + Vn
    info = {"substeps": nsub, "dt_stable": dt_stable, "spectral_radius": rho,
            "energy": np.array(energy), "V_natural": Vn}
    return LinearSolution(Wf, Pout, Vdot, m, prob.epsilon, info)


def _on_time_grid(bs: BasicState, m: Mesh):
    """The basic state with its mesh carrying the problem time step."""
    if bs.U.shape[2] == 1 or np.isclose(bs.mesh.dt, m.dt):
        return bs
    raise ConfigInvalid("basic-state time step differs from the problem")


def solve_effective(prob: LinearProblem, grid: Grid | None = None, eps_schedule=None,
                    check_cauchy=True):
    """Solve along a decreasing epsilon schedule and report H1 Cauchy differences."""
    sched = list(eps_schedule or [prob.epsilon])
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ConfigInvalid("epsilon schedule must be strictly decreasing")
    sols = [solve_regularized(replace(prob, epsilon=e), grid) for e in sched]
    m = prob.mesh
    diffs = [float(sobolev_norm(b.W - a.W, 1, m)) for a, b in zip(sols, sols[1:])]
    if check_cauchy and any(d1 > d0 for d0, d1 in zip(diffs, diffs[1:])):
        raise NotCauchy(f"H1 differences not decreasing: {diffs}")
    last = sols[-1]
    # first-order extrapolation in epsilon: W(0) ~ W_last + (W_last - W_prev) e_last/(e_prev - e_last)
    if len(sols) > 1:
        r = sched[-1] / (sched[-2] - sched[-1])
        extrap = float(sobolev_norm(r * (last.W - sols[-2].W), 1, m))
    else:
        extrap = float("nan")
    last.info.update(cauchy=diffs, schedule=sched, extrapolation_error=extrap,
                     solutions=sols)
    return last


# ---------------------------------------------------------------------------
# constant-coefficient normal-mode oracle
# ---------------------------------------------------------------------------

W_PERM = [0, 1, 2, 3, 5, 6, 4, 7]  # V index of each W component on a flat interface


def lgl(N):
    """Legendre-Gauss-Lobatto nodes, weights and differentiation matrix on [-1, 1]."""
    from numpy.polynomial import legendre as leg
    c = np.zeros(N + 1)
    c[-1] = 1.0
    inner = leg.legroots(leg.legder(c))
    x = np.concatenate([[-1.0], np.sort(inner), [1.0]])
    PN = leg.legval(x, c)
    w = 2.0 / (N * (N + 1) * PN ** 2)
    D = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        for j in range(N + 1):
            if i != j:
                D[i, j] = PN[i] / (PN[j] * (x[i] - x[j]))
    D[0, 0] = -N * (N + 1) / 4.0
    D[N, N] = N * (N + 1) / 4.0
    return x, w, D


@dataclass
class ModeSpectrum:
    k: tuple
    eigvals: np.ndarray
    vectors: np.ndarray | None
    nodes: np.ndarray
    psi_fraction: np.ndarray


def normal_modes(bg, c, sfrak, k, N=48, X=8.0, vectors=False):
    """Temporal eigenvalues of Fourier modes exp(i k.x') on a two-sided slab of depth X.

    The slab is closed by walls (v = 0) at x1 = X; the interface rows are the
    linearized contact conditions with the surface-tension term -s|k|^2 psi.
    Discretization: Legendre-Gauss-Lobatto collocation, Galerkin-projected
    onto the constraint subspace in the energy inner product.
    """
    from .errors import NoDecayingBasis
    from .symbols import assemble_A0, assemble_Ai

    k2, k3 = (float(k[0]), float(k[1]) if len(k) > 1 else 0.0)
    if not (np.isfinite(k2) and np.isfinite(k3)):
        raise NoDecayingBasis("non-finite wavevector")
    if bg.H_bar[0] == 0.0:
        raise NoDecayingBasis("tangential field: contact modes degenerate")
    cl = c if isinstance(c, (tuple, list)) else (c, c)
    xi, wq, Dq = lgl(N)
    x = 0.5 * X * (xi + 1)
    w = 0.5 * X * wq
    D = (2.0 / X) * Dq
    n = N + 1
    P = np.eye(8)[W_PERM].T  # V = P W
    blocks, A0s = [], []
    for s, side in enumerate("+-"):
        u = bg.vector(side)
        A0 = P.T @ assemble_A0(cl[s], u) @ P
        A1 = P.T @ assemble_Ai(cl[s], u, 1) @ P * (1 if s == 0 else -1)
        A2 = P.T @ assemble_Ai(cl[s], u, 2) @ P
        A3 = P.T @ assemble_Ai(cl[s], u, 3) @ P
        A0i = np.linalg.inv(A0)
        op = -(np.kron(D, A0i @ A1) + np.kron(np.eye(n), A0i @ (1j * k2 * A2 + 1j * k3 * A3)))
        blocks.append(op)
        A0s.append(A0)
    kk = k2 ** 2 + k3 ** 2
    has_psi = kk > 0
    nW = 8 * n
    size = 2 * nW + (1 if has_psi else 0)
    L = np.zeros((size, size), complex)
    L[:nW, :nW] = blocks[0]
    L[nW:2 * nW, nW:2 * nW] = blocks[1]
    vt = bg.v_bar[1] * k2 + bg.v_bar[2] * k3
    if has_psi:
        L[-1, 1] = 1.0  # W1 of the plus side at x1 = 0
        L[-1, -1] = -1j * vt
    G = np.zeros((size, size))
    G[:nW, :nW] = np.kron(np.diag(w), A0s[0])
    G[nW:2 * nW, nW:2 * nW] = np.kron(np.diag(w), A0s[1])
    if has_psi:
        G[-1, -1] = sfrak * kk
    rows = []
    for j in range(6):
        r = np.zeros(size)
        r[j], r[nW + j] = 1.0, -1.0
        if j == 0 and has_psi:
            r[-1] = sfrak * kk  # [p] = -s|k|^2 psi
        rows.append(r)
    for s in range(2):
        for j in (1, 2, 3):
            r = np.zeros(size)
            r[s * nW + 8 * N + j] = 1.0
            rows.append(r)
    import scipy.linalg as sla
    Z = sla.null_space(np.array(rows))
    M = Z.conj().T @ G @ L @ Z
    C = np.linalg.cholesky(Z.T @ G @ Z)
    # standard (non-Hermitian) eigenproblem of C^-1 M C^-H: real parts are measured, not imposed
    S = sla.solve_triangular(C, sla.solve_triangular(C, M.conj().T, lower=True).conj().T, lower=True)
    lam, y = np.linalg.eig(S)
    vec = sla.solve_triangular(C.conj().T, y, lower=False)
    if not has_psi:
        lam = np.concatenate([lam, [0.0]])
    order = np.argsort(np.abs(lam.imag))
    lam = lam[order]
    full = None
    frac = np.zeros(len(lam))
    if has_psi:
        vec = vec[:, order]
        full = Z @ vec
        en = np.sum(full.conj() * (G @ full), axis=0).real
        frac = (sfrak * kk * np.abs(full[-1]) ** 2) / np.maximum(en, 1e-300)
    return ModeSpectrum((k2, k3), lam, full if vectors else None, x, frac)


def mode_to_grid(spec: ModeSpectrum, vec, mesh: Mesh, k_int: int):
    """Real part of an oracle mode sampled on the slab grid, as an initial (W, psi)."""
    from scipy.interpolate import BarycentricInterpolator
    n = len(spec.nodes)
    x2 = mesh.x2
    phase = np.exp(1j * k_int * x2)
    W = np.zeros((2, 8, mesh.n1 + 1, mesh.n2))
    for s in range(2):
        vals = vec[s * 8 * n:(s + 1) * 8 * n].reshape(n, 8)
        for j in range(8):
            re = BarycentricInterpolator(spec.nodes, vals[:, j].real)(mesh.x1)
            im = BarycentricInterpolator(spec.nodes, vals[:, j].imag)(mesh.x1)
            W[s, j] = np.real((re + 1j * im)[:, None] * phase[None, :])
    psi = np.real(vec[-1] * phase)
    return W, psi
