"""Smoothing operators and the Nash-Moser iteration driver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammainc

from .errors import AdmissibilityLost, ArchiveIncomplete, LinearSolveFailed
from .geometry import Mesh, _smooth_step

# ---------------------------------------------------------------------------
# smoothing operators
# ---------------------------------------------------------------------------

GAMMA_SHAPE = 6
N_RATES = 5  # one more than the number of vanishing moments


def lowpass(r):
    """Radial profile: 1 for r <= 1, 0 for r >= 2, smooth in between."""
    return 1.0 - _smooth_step(np.asarray(r, float) - 1.0)


def _mixture_weights(n=N_RATES):
    """w_a with sum w_a = 1 and sum w_a a^-r = 0 for r = 1..n-1 (rates a = 1..n)."""
    a = np.arange(1, n + 1, dtype=float)
    V = np.array([a ** (-r) for r in range(n)])
    rhs = np.zeros(n)
    rhs[0] = 1.0
    return np.linalg.solve(V, rhs)


def _hestenes(n=5):
    """c_k with u(-s) ~ sum_k c_k u(k s) exact for polynomials of degree < n."""
    k = np.arange(1, n + 1, dtype=float)
    V = np.array([k ** r for r in range(n)])
    return np.linalg.solve(V, np.array([(-1.0) ** r for r in range(n)]))


_MIX = _mixture_weights()
_HEST = _hestenes()


INTERP_NODES = np.arange(-2, 2)  # causal cubic: nodes j-2 .. j+1 on the interval [t_j, t_j+1]


def _lagrange_coeffs(nodes=INTERP_NODES):
    """Power-basis coefficients (low to high) of the Lagrange basis in sigma."""
    out = []
    for i, xi in enumerate(nodes):
        c = np.array([1.0])
        for k, xk in enumerate(nodes):
            if k != i:
                c = np.polynomial.polynomial.polymul(c, np.array([-xk, 1.0]) / (xi - xk))
        out.append(c)
    return np.array(out)


_LAG = _lagrange_coeffs()


def _gamma_moments(q, lam, lo, hi, rmax):
    """int_lo^hi s^r Gamma(q, lam) pdf ds for r = 0..rmax."""
    out = np.empty(rmax + 1)
    rising = 1.0
    for r in range(rmax + 1):
        out[r] = rising / lam ** r * (gammainc(q + r, lam * hi) - gammainc(q + r, lam * lo))
        rising *= q + r
    return out


def causal_time_weights(nt, dt, theta, kappa_t, q=GAMMA_SHAPE):
    """Lower-triangular (nt, nt) matrix of the causal mollifier.

    Data are interpolated by a backward-biased cubic on each step (values before
    the first node count as zero), so the discrete operator reproduces cubics
    wherever the kernel has seen no past.
    """
    if nt == 1:
        return np.ones((1, 1))
    P = np.polynomial.polynomial
    deg = len(INTERP_NODES) - 1
    Wt = np.zeros((nt, nt))
    for a, wa in zip(range(1, len(_MIX) + 1), _MIX):
        lam = a * theta * kappa_t * dt  # rate in units of dt
        for d in range(1, nt):
            # interval with s in [(d-1), d] (dt units) contributes to row n from j = n - d
            mom = _gamma_moments(q, lam, d - 1.0, float(d), deg)
            # sigma = d - u on this interval; compose each basis polynomial
            w = np.array([np.dot(_compose(c, d), mom)
                          for c in _LAG])
            for n in range(d, nt):
                j = n - d
                for node, wi in zip(INTERP_NODES, w):
                    if j + node >= 0:
                        Wt[n, j + node] += wa * wi
    return Wt


def _compose(c, d):
    """Coefficients in u of p(d - u) for p with coefficients c in sigma."""
    P = np.polynomial.polynomial
    out = np.zeros(len(c))
    base = np.array([1.0])
    lin = np.array([float(d), -1.0])
    for k, ck in enumerate(c):
        term = ck * base
        out[:len(term)] += term
        base = P.polymul(base, lin)
    return out


@dataclass
class Smoother:
    """S_theta = S_t o S_x' o S_x1 on volume fields; S_t o S_x' on interface fields."""
    mesh: Mesh
    directions: tuple = ("t", "x1", "tan")
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def kappa_t(self):
        T = max((self.mesh.nt - 1) * self.mesh.dt, 1e-300)
        return 2 * np.pi / T

    @property
    def kappa_1(self):
        return 2 * np.pi / self.mesh.X1

    def time_weights(self, theta):
        key = ("t", float(theta))
        if key not in self._cache:
            m = self.mesh
            self._cache[key] = causal_time_weights(m.nt, m.dt, theta, self.kappa_t)
        return self._cache[key]

    # -- directional pieces --------------------------------------------------
    def smooth_t(self, u, theta, surface=False):
        m = self.mesh
        ax = -(m.ntan + 1) if surface else -(m.ntan + 2)
        if u.shape[ax] == 1:
            return u
        Wt = self.time_weights(theta)
        return np.moveaxis(np.tensordot(Wt, np.moveaxis(u, ax, 0), axes=(1, 0)), 0, ax)

    def smooth_tan(self, u, theta):
        m = self.mesh
        axes = tuple(range(-m.ntan, 0))
        k2 = np.fft.fftfreq(m.n2, d=1.0 / m.n2) * (2 * np.pi / m.period)
        if m.n3:
            k3 = np.fft.rfftfreq(m.n3, d=1.0 / m.n3) * (2 * np.pi / m.period)
            kk = np.sqrt(k2[:, None] ** 2 + k3[None, :] ** 2)
        else:
            kk = np.abs(np.fft.rfftfreq(m.n2, d=1.0 / m.n2) * (2 * np.pi / m.period))
        filt = lowpass(kk / theta)
        shape = tuple(u.shape[a] for a in axes)
        return np.fft.irfftn(filt * np.fft.rfftn(u, axes=axes), s=shape, axes=axes)

    def smooth_x1(self, u, theta):
        m = self.mesh
        ax = -(m.ntan + 1)
        v = np.moveaxis(u, ax, -1)
        n = v.shape[-1]
        M = max(1, (n - 1) // 5)
        i = np.arange(1, M + 1)
        taper = 1.0 - _smooth_step(i / (M + 1))
        left = sum(c * v[..., k * i] for k, c in zip(range(1, 6), _HEST)) * taper
        right = sum(c * v[..., n - 1 - k * i] for k, c in zip(range(1, 6), _HEST)) * taper
        ext = np.concatenate([left[..., ::-1], v, right], axis=-1)
        ntot = 2 * ext.shape[-1]
        om = np.abs(2 * np.pi * np.fft.rfftfreq(ntot, d=m.h1))
        filt = lowpass(om / (theta * self.kappa_1))
        sm = np.fft.irfft(filt * np.fft.rfft(ext, n=ntot, axis=-1), n=ntot, axis=-1)
        sm = sm[..., M:M + n]
        # keep the interface trace so that jumps are smoothed only tangentially
        zeta = 1.0 - _smooth_step(theta * self.kappa_1 * m.x1)
        sm = sm - zeta * (sm[..., :1] - v[..., :1])
        return np.moveaxis(sm, -1, ax)

    def __call__(self, u, theta, surface=False):
        if theta < 1:
            raise ValueError("smoothing scale must be >= 1")
        return self._apply(u, theta, surface)

    def _apply(self, u, theta, surface=False):
        u = np.asarray(u, float)
        if not surface and "x1" in self.directions:
            u = self.smooth_x1(u, theta)
        if "tan" in self.directions:
            u = self.smooth_tan(u, theta)
        if "t" in self.directions:
            u = self.smooth_t(u, theta, surface)
        return u

    def dtheta(self, u, theta, surface=False, rel=1e-3):
        d = rel * theta
        return (self._apply(u, theta + d, surface) - self._apply(u, theta - d, surface)) / (2 * d)


def smooth(u, theta, mesh: Mesh, surface=False):
    return Smoother(mesh)(u, theta, surface)


# ---------------------------------------------------------------------------
# property sweep for the smoothing family
# ---------------------------------------------------------------------------

THETAS = (1, 2, 4, 8, 16, 32, 64)


def random_past_vanishing_fields(mesh: Mesh, n, rng, kmax=6, lag=2):
    """Smooth random volume fields (2, nt, n1+1, n2[, n3]) that vanish on the first `lag` time nodes."""
    t = mesh.t.reshape((-1,) + (1,) * (mesh.ntan + 1))
    _, x1, x2, x3 = mesh.coords()
    T = max(mesh.t[-1], 1e-300)
    t0 = mesh.t[min(lag, mesh.nt - 1)] if mesh.nt > 1 else 0.0
    ramp = np.where(t > t0, ((t - t0) / T) ** 6, 0.0) if mesh.nt > 1 else np.ones_like(t)
    out = []
    for _ in range(n):
        sides = []
        for _s in range(2):
            f = 0.0
            for _m in range(3):
                k2 = rng.integers(0, kmax + 1)
                k3 = rng.integers(0, kmax + 1) if mesh.n3 else 0
                ph = rng.uniform(0, 2 * np.pi)
                tan = np.cos(k2 * x2 + k3 * x3 + ph)
                c, w = rng.uniform(1.0, mesh.X1 - 1.0), rng.uniform(1.0, 2.0)
                a = rng.normal() / (1 + k2 + k3)
                f = f + a * np.exp(-((x1 - c) / w) ** 2) * tan * (1 + rng.normal() * t / T)
            sides.append(f * ramp)
        out.append(np.stack(sides))
    return out


def smoother_properties(mesh: Mesh, fields, thetas=THETAS, orders=range(5)):
    """Ratios LHS / (theta^p ||u||_j) for the boundedness, approximation, scale-derivative
    and interface-jump inequalities. Keys map to arrays (len(fields), len(thetas))."""
    from .diagnostics import sobolev_norm
    S = Smoother(mesh)
    orders = list(orders)
    nrm = lambda u, m: float(sobolev_norm(u, m, mesh))
    snrm = lambda u, m: float(sobolev_norm(u, m, mesh, "boundary"))
    out = {}
    shape = (len(fields), len(thetas))
    for i, u in enumerate(fields):
        uj = {j: nrm(u, j) for j in orders}
        ju = mesh.trace(u[0]) - mesh.trace(u[1])
        jj = {j: snrm(ju, j) for j in orders}
        for it, th in enumerate(thetas):
            su = S(u, th)
            du = S.dtheta(u, th)
            jsu = mesh.trace(su[0]) - mesh.trace(su[1])
            sl = {l: nrm(su, l) for l in orders}
            el = {l: nrm(su - u, l) for l in orders}
            dl = {l: nrm(du, l) for l in orders}
            jl = {l: snrm(jsu, l) for l in orders}
            for j in orders:
                for l in orders:
                    def put(name, val, ref, p):
                        arr = out.setdefault((name, j, l), np.zeros(shape))
                        arr[i, it] = val / (th ** p * ref) if ref > 0 else 0.0
                    put("bounded", sl[l], uj[j], max(l - j, 0))
                    if l <= j:
                        put("approx", el[l], uj[j], l - j)
                    put("dtheta", dl[l], uj[j], l - j - 1)
                    put("jump", jl[l], jj[j], max(l + 1 - j, 0))
    return out


CERT_BOUND = 10.0


def reference_scale(mesh: Mesh, name, j, l):
    """Theta-independent scale 2^l kappa^e of each inequality from the per-direction frequency units."""
    S = Smoother(mesh)
    kap = [S.kappa_t, 1.0] if name == "jump" else [S.kappa_t, S.kappa_1, 1.0]
    if mesh.nt == 1:
        kap = kap[1:]
    e = l - j
    if name in ("bounded", "jump"):
        e = max(e, 0)
    k = max(kap) if e >= 0 else min(kap)
    return 2.0 ** l * k ** e


def certify(ratios, mesh: Mesh, bound=CERT_BOUND):
    """Fit one constant per inequality over all scales, fields and orders; pass iff it is at most `bound`."""
    rep = {}
    for (name, j, l), arr in ratios.items():
        c = float(arr.max()) / reference_scale(mesh, name, j, l)
        r = rep.setdefault(name, {"C": 0.0, "worst_orders": None})
        if c >= r["C"]:
            r["C"], r["worst_orders"] = c, (j, l)
    for r in rep.values():
        r["pass"] = r["C"] <= bound
    return rep


def past_vanishing_defect(mesh: Mesh, fields, thetas=THETAS, lag=2):
    """Largest |S u| on the time nodes where every field vanishes."""
    S = Smoother(mesh)
    worst = 0.0
    for u in fields:
        for th in thetas:
            worst = max(worst, float(np.abs(S(u, th)[:, :lag + 1]).max()))
    return worst


# ---------------------------------------------------------------------------
# the iteration
# ---------------------------------------------------------------------------

GAUSS4 = np.polynomial.legendre.leggauss(4)


@dataclass
class ApproxSolution:
    """Approximate solution (U^a, phi^a) on the time window with its residual forcing f^a."""
    U: np.ndarray
    phi: np.ndarray
    f: np.ndarray
    mesh: Mesh
    closure: object
    sfrak: float = 1.0
    kappa: float | None = None

    def interior(self, V=0.0, psi=0.0, check=False):
        from .linearization import nonlinear_interior
        return nonlinear_interior(self.U + V, self.phi + psi, self.mesh, self.closure, check=check)

    def boundary(self, V=0.0, psi=0.0):
        from .linearization import nonlinear_boundary
        return nonlinear_boundary(self.U + V, self.phi + psi, self.mesh, self.sfrak)

    def basic_state(self, V=0.0, psi=0.0, check_lift=False):
        from .linearization import BasicState
        return BasicState(self.U + V, self.phi + psi, self.mesh, self.closure, self.sfrak,
                          kappa=self.kappa, check_lift=check_lift)


def theta_schedule(theta0, n):
    return math.sqrt(theta0 ** 2 + n)


@dataclass
class IterationState:
    mesh: Mesh
    V: np.ndarray
    psi: np.ndarray
    n: int = 0
    theta0: float = 32.0
    alpha: float = 7.0
    small: float | None = None  # smallness parameter of the step envelope
    f_hist: list = field(default_factory=list)
    g_hist: list = field(default_factory=list)
    e_hist: list = field(default_factory=list)
    et_hist: list = field(default_factory=list)
    log: list = field(default_factory=list)

    @classmethod
    def start(cls, mesh: Mesh, theta0=32.0, alpha=7.0):
        V = np.zeros((2, 8) + mesh.vol_shape)
        return cls(mesh, V, np.zeros(mesh.surf_shape), 0, theta0, alpha)

    @property
    def alpha_tilde(self):
        return self.alpha + 3

    @property
    def theta(self):
        return theta_schedule(self.theta0, self.n)

    @property
    def delta(self):
        return theta_schedule(self.theta0, self.n + 1) - self.theta

    @property
    def E(self):
        return sum(self.e_hist) if self.e_hist else np.zeros_like(self.V)

    @property
    def Et(self):
        return sum(self.et_hist) if self.et_hist else np.zeros((7,) + self.mesh.surf_shape)


def compute_sources(st: IterationState, f_a, smoother: Smoother | None = None):
    """f_n = S(f^a - E_n) - sum f_k, g_n = -S(Et_n) - sum g_k."""
    if not (len(st.e_hist) == len(st.et_hist) == len(st.f_hist) == len(st.g_hist) == st.n):
        raise ArchiveIncomplete(f"archives hold {len(st.e_hist)} errors at step {st.n}")
    S = smoother or Smoother(st.mesh)
    th = st.theta
    f = S(f_a - st.E, th)
    if st.f_hist:
        f = f - sum(st.f_hist)
    g = -np.stack([S(c, th, surface=True) for c in st.Et])
    if st.g_hist:
        g = g - sum(st.g_hist)
    return f, g


def telescoping_defect(st: IterationState, f_a, smoother: Smoother | None = None):
    """|| sum_{k<=n} f_k + S E_n - S f^a || and || sum g_k + S Et_n ||, at the last completed step."""
    if st.n == 0:
        return 0.0, 0.0
    S = smoother or Smoother(st.mesh)
    th = theta_schedule(st.theta0, st.n - 1)
    E = sum(st.e_hist[:-1]) if st.n > 1 else 0.0 * st.V
    Et = sum(st.et_hist[:-1]) if st.n > 1 else np.zeros((7,) + st.mesh.surf_shape)
    d = sum(st.f_hist) + S(E, th) - S(f_a, th)
    dg = sum(st.g_hist) + np.stack([S(c, th, surface=True) for c in Et])
    return float(np.abs(d).max()), float(np.abs(dg).max())


def _chi_profile(mesh: Mesh, cutoff):
    return cutoff(mesh.x1).reshape((-1,) + (1,) * mesh.ntan)


def modified_state(st: IterationState, approx: ApproxSolution, smoother: Smoother | None = None):
    """(V_{n+1/2}, psi_{n+1/2}): smoothed iterates corrected to satisfy the basic-state constraints."""
    from .geometry import CutoffChi
    m = st.mesh
    S = smoother or Smoother(m)
    th = st.theta
    V = S(st.V, th)
    psi = S(st.psi, th, surface=True)
    chi = _chi_profile(m, CutoffChi())
    # tangential velocity and magnetic field: split the interface jump evenly
    for c in (2, 3, 4, 5, 6):
        jmp = m.trace(V[0, c]) - m.trace(V[1, c])
        half = 0.5 * np.expand_dims(jmp, -(m.ntan + 1)) * chi
        V[0, c] -= half
        V[1, c] += half
    # normal velocity from the kinematic identity
    D = lambda u, k: m.D(u, k, surface=True)
    va = m.trace(approx.U[0, 2:4])
    vh = m.trace(V[0, 2:4])
    w = D(psi, 0)
    for i, k in enumerate((2, 3)):
        if k == 3 and not m.n3:
            continue
        w = w + (va[i] + vh[i]) * D(psi, k) + vh[i] * D(approx.phi, k)
    for s in range(2):
        V[s, 1] += np.expand_dims(w - m.trace(V[s, 1]), -(m.ntan + 1)) * chi
    return V, psi


def _admissible_state(approx: ApproxSolution, V, psi, tol=1e-10):
    from .errors import LiftInadmissible
    try:
        bs = approx.basic_state(V, psi, check_lift=True)
    except LiftInadmissible as e:
        raise AdmissibilityLost(str(e)) from e
    bs.require_admissible(approx.kappa, tol=tol)
    return bs


def _gauss_remainder(fn):
    """int_0^1 (1 - tau) fn(tau) dtau by 4-point Gauss quadrature."""
    x, w = GAUSS4
    tau = 0.5 * (x + 1)
    return sum(0.5 * wi * (1 - ti) * fn(ti) for ti, wi in zip(tau, w))


def error_terms(st: IterationState, approx: ApproxSolution, step: dict, eta=1e-4):
    """Components of the interior and interface errors of one step.

    `step` holds V, psi (old iterate), SV, Spsi (smoothed), Vh, psih (modified),
    dV, dpsi, Vdot, f, g. Returns a dict of components and the exact totals.
    """
    from .geometry import CutoffChi
    m = st.mesh
    chi = _chi_profile(m, CutoffChi())
    lift = lambda p: np.stack([chi * np.expand_dims(p, -(m.ntan + 1))] * 2)
    V, psi, dV, dpsi = step["V"], step["psi"], step["dV"], step["dpsi"]
    dPsi = lift(dpsi)

    def Lp(W, p):
        return approx.basic_state(W, p).full_derivative(dV, dPsi)

    def Bp(W, p):
        return approx.basic_state(W, p).boundary_derivative(dV, dpsi)

    def L2(tau):
        W, p = V + tau * dV, psi + tau * dpsi
        return (Lp(W + eta * dV, p + eta * dpsi) - Lp(W - eta * dV, p - eta * dpsi)) / (2 * eta)

    def B2(tau):
        bs = approx.basic_state(V + tau * dV, psi + tau * dpsi)
        return bs.boundary_second((dV, dpsi), (dV, dpsi))

    bh = approx.basic_state(step["Vh"], step["psih"])
    out = {
        "e1": _gauss_remainder(L2),
        "e2": Lp(V, psi) - Lp(step["SV"], step["Spsi"]),
        "e3": Lp(step["SV"], step["Spsi"]) - Lp(step["Vh"], step["psih"]),
        "e4": bh.alinhac_remainder(dPsi),
        "et1": _gauss_remainder(B2),
        "et2": Bp(V, psi) - Bp(step["SV"], step["Spsi"]),
        "et3": Bp(step["SV"], step["Spsi"]) - Bp(step["Vh"], step["psih"]),
    }
    out["defect"] = bh.effective(step["Vdot"]) - step["f"]
    out["defect_b"] = bh.boundary_effective(step["Vdot"], dpsi) - step["g"]
    return out


@dataclass
class NMConfig:
    epsilon: float = 1e-3
    theta0: float = 32.0
    alpha: float = 7.0
    max_iter: int = 8
    tol: float = 0.0
    envelope_action: str = "log"  # or "stop"
    envelope_factor: float = 2.0
    components: bool = False
    far: str = "outflow"
    source_interp: str = "centred"


def residual_norm(st_V, st_psi, approx: ApproxSolution, L0=None, order=3):
    """|| L(V, Psi) - f^a ||_{H^order} with L(V, Psi) = L(U^a + V) - L(U^a)."""
    from .diagnostics import sobolev_norm
    L0 = approx.interior() if L0 is None else L0
    r = approx.interior(st_V, st_psi) - L0 - approx.f
    return float(sobolev_norm(r, order, approx.mesh))


def _step_norm(dV, dpsi, m: Mesh, order=3):
    from .diagnostics import sobolev_norm
    return float(np.sqrt(sobolev_norm(dV, order, m) ** 2
                         + sobolev_norm(dpsi, order, m, "boundary") ** 2))


def iterate(st: IterationState, approx: ApproxSolution, cfg: NMConfig = NMConfig(),
            smoother: Smoother | None = None, L0=None, B0=None):
    """One Nash-Moser step; returns the state at n+1 (archives appended in place)."""
    from .errors import ArtifactError
    from .linsolve import LinearProblem, solve_effective
    m = st.mesh
    S = smoother or Smoother(m)
    L0 = approx.interior() if L0 is None else L0
    B0 = approx.boundary() if B0 is None else B0
    f, g = compute_sources(st, approx.f, S)
    Vh, psih = modified_state(st, approx, S)
    bh = _admissible_state(approx, Vh, psih)
    prob = LinearProblem(bh, m, f=f, g=g, epsilon=cfg.epsilon, far=cfg.far,
                         source_interp=cfg.source_interp)
    try:
        sol = solve_effective(prob, eps_schedule=[cfg.epsilon])
    except ArtifactError as e:
        raise LinearSolveFailed(f"{type(e).__name__}: {e}") from e
    dpsi = sol.psi
    dPsi = bh.lift_perturbation(dpsi)
    dV = bh.from_good_unknown(sol.Vdot, dPsi)
    Vn, psin = st.V + dV, st.psi + dpsi
    Lold = approx.interior(st.V, st.psi) - L0
    Lnew = approx.interior(Vn, psin) - L0
    Bold = approx.boundary(st.V, st.psi) - B0
    Bnew = approx.boundary(Vn, psin) - B0
    # exact totals: solver defects fold into the archived errors
    e = Lnew - Lold - f
    et = Bnew - Bold - g
    rec = {"n": st.n, "theta": st.theta, "delta": st.delta,
           "step_norm": _step_norm(dV, dpsi, m), "substeps": sol.info["substeps"]}
    if cfg.components:
        step = dict(V=st.V, psi=st.psi, SV=S(st.V, st.theta), Spsi=S(st.psi, st.theta, True),
                    Vh=Vh, psih=psih, dV=dV, dpsi=dpsi, Vdot=sol.Vdot, f=f, g=g)
        comp = error_terms(st, approx, step)
        inner = comp["e1"] + comp["e2"] + comp["e3"] + comp["e4"] + comp["defect"]
        bnd = comp["et1"] + comp["et2"] + comp["et3"] + comp["defect_b"]
        rec["components"] = {k: float(np.abs(v).max()) for k, v in comp.items()}
        rec["decomposition_gap"] = float(np.abs(inner - e).max())
        rec["decomposition_gap_b"] = float(np.abs(bnd - et).max())
    # step envelope eps theta^(3-alpha-1) Delta, with eps fixed by the first step
    env_shape = st.theta ** (3 - st.alpha - 1) * st.delta
    if st.small is None:
        st.small = rec["step_norm"] / env_shape if env_shape > 0 else 0.0
    rec["envelope"] = st.small * env_shape
    rec["envelope_ok"] = rec["step_norm"] <= cfg.envelope_factor * rec["envelope"] + 1e-300
    nxt = IterationState(m, Vn, psin, st.n + 1, st.theta0, st.alpha, st.small,
                         st.f_hist + [f], st.g_hist + [g], st.e_hist + [e], st.et_hist + [et],
                         st.log + [rec])
    return nxt


def save_checkpoint(st: IterationState, directory, initial_residual=None):
    """Write iterates and archives (npz) plus a JSON header for step st.n."""
    import json
    from pathlib import Path
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    arrays = {"V": st.V, "psi": st.psi}
    for name in ("f_hist", "g_hist", "e_hist", "et_hist"):
        for k, a in enumerate(getattr(st, name)):
            arrays[f"{name}_{k}"] = a
    np.savez(d / f"step_{st.n:04d}.npz", **arrays)
    head = {"n": st.n, "theta0": st.theta0, "alpha": st.alpha, "small": st.small,
            "initial_residual": initial_residual, "log": _plain(st.log)}
    (d / f"step_{st.n:04d}.json").write_text(json.dumps(head, indent=1, sort_keys=True))


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.generic,)):
        return x.item()
    return x


def load_checkpoint(directory, mesh: Mesh, n=None):
    """Latest (or step n) checkpoint as (IterationState, initial residual); None if absent."""
    import json
    from pathlib import Path
    d = Path(directory)
    heads = sorted(d.glob("step_*.json"))
    if n is not None:
        heads = [h for h in heads if h.stem == f"step_{n:04d}"]
    if not heads:
        return None
    head = json.loads(heads[-1].read_text())
    z = np.load(heads[-1].with_suffix(".npz"))
    k = head["n"]
    hist = {name: [z[f"{name}_{i}"] for i in range(k)]
            for name in ("f_hist", "g_hist", "e_hist", "et_hist")}
    st = IterationState(mesh, z["V"], z["psi"], k, head["theta0"], head["alpha"], head["small"],
                        log=head["log"], **hist)
    return st, head["initial_residual"]


def driver(approx: ApproxSolution, cfg: NMConfig = NMConfig(), callback=None,
           checkpoint_dir=None, resume=False):
    """Iterate until max_iter, the residual tolerance or (optionally) an envelope violation.

    With checkpoint_dir every completed step is saved; resume=True continues from
    the latest saved step.
    """
    m = approx.mesh
    S = Smoother(m)
    L0, B0 = approx.interior(), approx.boundary()
    loaded = load_checkpoint(checkpoint_dir, m) if (resume and checkpoint_dir) else None
    if loaded is None:
        st = IterationState.start(m, cfg.theta0, cfg.alpha)
        res = [residual_norm(st.V, st.psi, approx, L0)]
        tele = []
    else:
        st, r0 = loaded
        res = [r0] + [r["residual"] for r in st.log]
        tele = [tuple(r["telescoping"]) for r in st.log]
    reason = "max_iter"
    while st.n < cfg.max_iter:
        st = iterate(st, approx, cfg, S, L0, B0)
        res.append(residual_norm(st.V, st.psi, approx, L0))
        tele.append(telescoping_defect(st, approx.f, S))
        st.log[-1]["residual"] = res[-1]
        st.log[-1]["telescoping"] = tele[-1]
        if checkpoint_dir is not None:
            save_checkpoint(st, checkpoint_dir, res[0])
        if callback is not None:
            callback(st)
        if res[-1] <= cfg.tol:
            reason = "tolerance"
            break
        if cfg.envelope_action == "stop" and not st.log[-1]["envelope_ok"]:
            reason = "envelope"
            break
    return {"state": st, "residuals": res, "telescoping": tele, "stop": reason}
