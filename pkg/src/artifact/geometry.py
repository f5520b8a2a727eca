"""Half-space mesh, finite differences, interface geometry and the cutoff lift.

Volume fields have shape (..., nt, n1+1, n2[, n3]) and interface fields
(..., nt, n2[, n3]). The normal coordinate x1 covers [0, X1] with n1 cells
and a node on the interface; tangential directions are periodic. nt == 1
marks a steady field (zero time derivative).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateJacobian, LiftInadmissible

CHI_L = 4.0


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def diff_periodic(u, h, axis):
    return (np.roll(u, -1, axis) - np.roll(u, 1, axis)) / (2.0 * h)


def diff_open(u, h, axis):
    """Central differences with second-order one-sided closures at both ends."""
    u = np.moveaxis(u, axis, -1)
    n = u.shape[-1]
    if n == 1:
        d = np.zeros_like(u)
    elif n == 2:
        d = np.repeat((u[..., 1:] - u[..., :1]) / h, 2, axis=-1)
    else:
        d = np.empty_like(u)
        d[..., 1:-1] = (u[..., 2:] - u[..., :-2]) / (2 * h)
        d[..., 0] = (-3 * u[..., 0] + 4 * u[..., 1] - u[..., 2]) / (2 * h)
        d[..., -1] = (3 * u[..., -1] - 4 * u[..., -2] + u[..., -3]) / (2 * h)
    return np.moveaxis(d, -1, axis)


TIME_ORDER = 4


def fd_weights(x0, nodes):
    """First-derivative weights at x0 for the given (unit-spaced) nodes."""
    nodes = np.asarray(nodes, float)
    k = np.arange(len(nodes))
    V = (nodes[None, :] - x0) ** k[:, None]
    rhs = np.zeros(len(nodes))
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


def _open_stencils(order):
    half = order // 2
    centre = fd_weights(0.0, np.arange(-half, half + 1))
    edge = [fd_weights(float(i), np.arange(order + 1)) for i in range(half)]
    return centre, edge


_OPEN = {p: _open_stencils(p) for p in (4, 6)}


def diff_open_high(u, h, axis, order=6):
    """Central differences of the given even order with one-sided closures of the same order.

    Falls back to lower orders when the axis is too short.
    """
    n = u.shape[axis]
    while order > 2 and n < order + 1:
        order -= 2
    if order <= 2:
        return diff_open(u, h, axis)
    u = np.moveaxis(u, axis, -1)
    centre, edge = _OPEN[order]
    half = order // 2
    d = np.zeros_like(u)
    for j, c in enumerate(centre):
        d[..., half:n - half] += c * u[..., j:n - 2 * half + j]
    head, tail = u[..., :order + 1], u[..., -order - 1:][..., ::-1]
    for i, w in enumerate(edge):
        d[..., i] = head @ w
        d[..., n - 1 - i] = -(tail @ w)
    return np.moveaxis(d / h, -1, axis)


def diff_open4(u, h, axis):
    return diff_open_high(u, h, axis, 4)


@dataclass(frozen=True)
class Mesh:
    n1: int
    n2: int
    n3: int = 0
    X1: float = 8.0
    period: float = 2 * np.pi
    nt: int = 1
    dt: float = 0.0

    @property
    def ntan(self):
        return 2 if self.n3 else 1

    @property
    def h1(self):
        return self.X1 / self.n1

    @property
    def h2(self):
        return self.period / self.n2

    @property
    def h3(self):
        return self.period / self.n3 if self.n3 else np.inf

    @property
    def tan_shape(self):
        return (self.n2, self.n3) if self.n3 else (self.n2,)

    @property
    def vol_shape(self):
        return (self.nt, self.n1 + 1) + self.tan_shape

    @property
    def surf_shape(self):
        return (self.nt,) + self.tan_shape

    def with_time(self, nt, dt):
        return Mesh(self.n1, self.n2, self.n3, self.X1, self.period, nt, dt)

    @property
    def t(self):
        return np.arange(self.nt) * self.dt

    @property
    def x1(self):
        return np.linspace(0.0, self.X1, self.n1 + 1)

    @property
    def x2(self):
        return -0.5 * self.period + np.arange(self.n2) * self.h2

    @property
    def x3(self):
        return -0.5 * self.period + np.arange(self.n3) * self.h3 if self.n3 else np.zeros(1)

    # broadcastable coordinate arrays for volume fields
    def coords(self):
        """(t, x1, x2, x3) broadcastable against a volume field."""
        k = self.ntan
        t = self.t.reshape((-1,) + (1,) * (k + 1))
        x1 = self.x1.reshape((-1,) + (1,) * k)
        if k == 1:
            return t, x1, self.x2, np.zeros(1)
        return t, x1, self.x2[:, None], self.x3

    def surf_coords(self):
        k = self.ntan
        t = self.t.reshape((-1,) + (1,) * k)
        if k == 1:
            return t, self.x2, np.zeros(1)
        return t, self.x2[:, None], self.x3

    def _axis(self, k, surface):
        n = self.ntan
        if k == 0:
            return -(n + 1) if surface else -(n + 2)
        if k == 1:
            if surface:
                raise ValueError("no normal axis on the interface")
            return -(n + 1)
        return -n + (k - 2)

    def D(self, u, k, surface=False):
        """Partial derivative along t (k=0), x1 (k=1), x2 (k=2) or x3 (k=3)."""
        if k == 3 and not self.n3:
            return np.zeros_like(u)
        ax = self._axis(k, surface)
        if k == 0:
            if u.shape[ax] == 1:
                return np.zeros_like(u)
            # time: fourth order with same-order closures, so the truncation error
            # changes little between the interior and the two ends of the window
            return diff_open_high(u, self.dt, ax, TIME_ORDER)
        if k == 1:
            return diff_open(u, self.h1, ax)
        return diff_periodic(u, self.h2 if k == 2 else self.h3, ax)

    def trace(self, u):
        """Restriction of a volume field to x1 = 0."""
        return np.take(u, 0, axis=-(self.ntan + 1))

    def extend(self, g, profile=None):
        """Constant-in-x1 extension of an interface field, optionally times profile(x1)."""
        ax = -(self.ntan + 1)
        out = np.expand_dims(g, ax)
        out = np.repeat(out, self.n1 + 1, axis=ax)
        if profile is not None:
            out = out * profile(self.x1).reshape((-1,) + (1,) * self.ntan)
        return out


# ---------------------------------------------------------------------------
# cutoff and lift
# ---------------------------------------------------------------------------

def _smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1 - s, 1)), 0.0)
    return a / (a + b)


def chi(s, L=CHI_L):
    """Even cutoff: 1 on [-1, 1], 0 outside [-L, L], max |chi'| = 2/(L-1)."""
    return 1.0 - _smooth_step((np.abs(s) - 1.0) / (L - 1.0))


def dchi(s, L=CHI_L, h=1e-6):
    return (chi(s + h, L) - chi(s - h, L)) / (2 * h)


@dataclass(frozen=True)
class CutoffChi:
    L: float = CHI_L

    def __call__(self, s):
        return chi(s, self.L)

    def max_slope(self, n=20001):
        s = np.linspace(0, self.L + 1, n)
        return float(np.max(np.abs(dchi(s, self.L))))


@dataclass
class InterfaceField:
    phi: np.ndarray
    mesh: Mesh

    def __post_init__(self):
        self.phi = np.asarray(self.phi)
        if self.phi.shape[-self.mesh.ntan - 1:] != self.mesh.surf_shape[-self.mesh.ntan - 1:]:
            raise ValueError("phi does not match the interface grid")

    @property
    def admissible(self):
        return float(np.max(np.abs(self.phi))) <= 0.25


def gradient(phi, mesh: Mesh):
    """Tangential gradient (d2 phi, d3 phi); the x3 slope is zero in planar mode."""
    return mesh.D(phi, 2, surface=True), mesh.D(phi, 3, surface=True)


def normal(phi, mesh: Mesh):
    """N = (1, -d2 phi, -d3 phi), stacked on the leading axis."""
    p2, p3 = gradient(phi, mesh)
    return np.stack([np.ones_like(p2), -p2, -p3])


def tangents(phi, mesh: Mesh):
    p2, p3 = gradient(phi, mesh)
    one, zero = np.ones_like(p2), np.zeros_like(p2)
    return np.stack([p2, one, zero]), np.stack([p3, zero, one])


def unit_normal(phi, mesh: Mesh):
    N = normal(phi, mesh)
    return N / np.sqrt(np.sum(N * N, axis=0))


# curvature in compact divergence form: fluxes live on cell faces

def _face_slopes(phi, mesh: Mesh):
    """For each tangential axis a, the slope vector zeta on the faces j+1/2 of axis a."""
    axes = [-mesh.ntan + j for j in range(mesh.ntan)]
    hs = [mesh.h2, mesh.h3][:mesh.ntan]
    out = []
    for a, (ax, h) in enumerate(zip(axes, hs)):
        comps = []
        for b, (bx, hb) in enumerate(zip(axes, hs)):
            if a == b:
                comps.append((np.roll(phi, -1, ax) - phi) / h)
            else:
                c = diff_periodic(phi, hb, bx)
                comps.append(0.5 * (c + np.roll(c, -1, ax)))
        out.append(comps)
    return out, axes, hs


def _flux(z):
    n = np.sqrt(1 + sum(c * c for c in z))
    return [c / n for c in z]


def _dflux(z, w):
    n2 = 1 + sum(c * c for c in z)
    n = np.sqrt(n2)
    zw = sum(a * b for a, b in zip(z, w))
    return [(b - zw * a / n2) / n for a, b in zip(z, w)]


def _d2flux(z, w1, w2):
    n2 = 1 + sum(c * c for c in z)
    n3 = n2 ** 1.5
    zw1 = sum(a * b for a, b in zip(z, w1))
    zw2 = sum(a * b for a, b in zip(z, w2))
    w12 = sum(a * b for a, b in zip(w1, w2))
    return [-(w12 * a + zw2 * b1 + zw1 * b2) / n3 + 3 * zw1 * zw2 * a / (n3 * n2)
            for a, b1, b2 in zip(z, w1, w2)]


def _divergence(fluxes, axes, hs):
    out = 0.0
    for a, (ax, h) in enumerate(zip(axes, hs)):
        f = fluxes[a][a]
        out = out + (f - np.roll(f, 1, ax)) / h
    return out


def curvature(phi, mesh: Mesh):
    """Twice the mean curvature, D.(D phi / sqrt(1 + |D phi|^2))."""
    z, axes, hs = _face_slopes(phi, mesh)
    return _divergence([_flux(za) for za in z], axes, hs)


def curvature_linearized(phi0, psi, mesh: Mesh):
    """Exact derivative of the discrete curvature at phi0 in direction psi."""
    z, axes, hs = _face_slopes(phi0, mesh)
    w, _, _ = _face_slopes(psi, mesh)
    return _divergence([_dflux(za, wa) for za, wa in zip(z, w)], axes, hs)


def curvature_second(phi0, psi1, psi2, mesh: Mesh):
    """Second variation of the discrete curvature at phi0."""
    z, axes, hs = _face_slopes(phi0, mesh)
    w1, _, _ = _face_slopes(psi1, mesh)
    w2, _, _ = _face_slopes(psi2, mesh)
    return _divergence([_d2flux(za, a, b) for za, a, b in zip(z, w1, w2)], axes, hs)


# ---------------------------------------------------------------------------
# lifted map and flattened derivatives
# ---------------------------------------------------------------------------

@dataclass
class LiftedMap:
    """Phi[0] = x1 + chi phi, Phi[1] = -x1 + chi phi; DPhi[k] holds d_k Phi."""
    Phi: np.ndarray
    Psi: np.ndarray
    DPhi: np.ndarray
    mesh: Mesh


def lift(phi, mesh: Mesh, cutoff: CutoffChi = CutoffChi(), check=True) -> LiftedMap:
    phi = np.asarray(phi)
    if check and np.max(np.abs(phi)) > 0.25:
        raise LiftInadmissible("|phi| exceeds 1/4")
    x1 = mesh.x1.reshape((-1,) + (1,) * mesh.ntan)
    w = cutoff(x1)
    Psi1 = w * np.expand_dims(phi, -(mesh.ntan + 1))
    Psi = np.stack([Psi1, Psi1])
    ones = np.ones_like(Psi1)
    Phi = Psi + np.stack([x1 * ones, -x1 * ones])
    DPhi = np.stack([mesh.D(Phi, k) for k in range(4)])
    if check:
        d1 = np.real(DPhi[1])
        if np.any(d1[0] < 0.5) or np.any(d1[1] > -0.5):
            raise LiftInadmissible("normal Jacobian bounds violated")
    return LiftedMap(Phi, Psi, DPhi, mesh)


def flat_derivatives(lmap: LiftedMap, u, side: int):
    """(d_t^Phi u, d_1^Phi u, d_2^Phi u, d_3^Phi u) on one side (0 = plus)."""
    m = lmap.mesh
    DP = lmap.DPhi[:, side]
    if np.any(np.abs(DP[1]) < 1e-6):
        raise DegenerateJacobian("d1 Phi vanishes")
    d1 = m.D(u, 1) / DP[1]
    out = [m.D(u, 0) - DP[0] * d1, d1]
    out += [m.D(u, k) - DP[k] * d1 for k in (2, 3)]
    return tuple(out)


def div_flat(lmap: LiftedMap, H, side: int):
    """Flattened divergence of a vector field H (3, ...) on one side."""
    m = lmap.mesh
    DP = lmap.DPhi[:, side]
    if np.any(np.abs(DP[1]) < 1e-6):
        raise DegenerateJacobian("d1 Phi vanishes")
    out = m.D(H[0], 1) / DP[1]
    for k in (2, 3):
        out = out + m.D(H[k - 1], k) - DP[k] / DP[1] * m.D(H[k - 1], 1)
    return out
