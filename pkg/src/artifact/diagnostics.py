"""Discrete Sobolev norms, estimate-shape certificates and constraint monitors."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import OrderTooHigh
from .geometry import Mesh

MAX_ORDER = 4


def _weights(n, h):
    """Trapezoidal weights on n nodes (a single node gets weight 1)."""
    if n == 1:
        return np.ones(1)
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _quadrature(sq, mesh: Mesh, region, time_integrated):
    """Integrate a squared field over the trailing grid axes."""
    k = mesh.ntan
    out = sq
    for _ in range(k):
        out = out.sum(-1)
    tan_cell = mesh.h2 * (mesh.h3 if k == 2 else 1.0)
    out = out * tan_cell
    if region == "interior":
        out = np.tensordot(out, _weights(mesh.n1 + 1, mesh.h1), axes=([-1], [0]))
    if time_integrated:
        nt = out.shape[-1]
        w = _weights(nt, mesh.dt) if nt > 1 else np.ones(1)
        out = np.tensordot(out, w, axes=([-1], [0]))
    return out


def _directions(mesh: Mesh, region, tangential, u):
    ks = [0, 1, 2, 3] if region == "interior" else [0, 2, 3]
    if tangential:
        ks = [k for k in ks if k != 1]
    if not mesh.n3:
        ks = [k for k in ks if k != 3]
    taxis = -(mesh.ntan + 2) if region == "interior" else -(mesh.ntan + 1)
    if u.shape[taxis] == 1:
        ks = [k for k in ks if k != 0]
    return ks


def sobolev_sq(u, m, mesh: Mesh, region="interior", tangential=False, time_integrated=True):
    """Sum over |beta| <= m of ||D^beta u||^2 with central differences."""
    if m > MAX_ORDER:
        raise OrderTooHigh(f"order {m} exceeds the stencil limit {MAX_ORDER}")
    u = np.asarray(u)
    surf = region != "interior"
    ks = _directions(mesh, region, tangential, u)
    cache = {(): u}
    total = 0.0
    for order in range(m + 1):
        for beta in combinations_with_replacement(ks, order):
            if beta not in cache:
                cache[beta] = mesh.D(cache[beta[:-1]], beta[-1], surface=surf)
            total = total + _quadrature(np.abs(cache[beta]) ** 2, mesh, region, time_integrated)
    # sum over leading component axes
    return np.sum(total) if time_integrated else total


def sobolev_norm(u, m, mesh: Mesh, region="interior", tangential=False, time_integrated=True):
    """Discrete H^m norm on the slab (region='interior') or on the interface ('boundary')."""
    sq = sobolev_sq(u, m, mesh, region, tangential, time_integrated)
    if not time_integrated:
        lead = sq.ndim - 1
        sq = sq.sum(axis=tuple(range(lead))) if lead else sq
    return np.sqrt(sq)


def tangential_norm(u, m, mesh: Mesh, region="interior", time_integrated=True):
    return sobolev_norm(u, m, mesh, region, True, time_integrated)


def weighted_normal_norm(u, mesh: Mesh, sigma):
    """||sigma(x1) d1 u|| over the slab and time window."""
    x1 = mesh.x1.reshape((-1,) + (1,) * mesh.ntan)
    return np.sqrt(np.sum(_quadrature(np.abs(sigma(x1) * mesh.D(u, 1)) ** 2, mesh, "interior", True)))


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass
class NormReport:
    interior: dict = field(default_factory=dict)
    tangential: dict = field(default_factory=dict)
    boundary: dict = field(default_factory=dict)
    weighted: float = 0.0


def norm_report(u, mesh: Mesh, sigma=None, orders=(0, 1, 2, 3)):
    rep = NormReport()
    for m in orders:
        rep.interior[m] = float(sobolev_norm(u, m, mesh))
        rep.tangential[m] = float(tangential_norm(u, m, mesh))
        rep.boundary[m] = float(sobolev_norm(mesh.trace(u), m, mesh, "boundary"))
    if sigma is not None:
        rep.weighted = float(weighted_normal_norm(u, mesh, sigma))
    return rep


def estimate_ratio(sol, f, g=None):
    """(LHS, RHS, R) for the H1 estimate shape: solution and interface norms over source norms.

    The fractional interface norm of g is replaced by the next integer order.
    """
    m = sol.mesh
    psi = sol.psi
    Dpsi = [m.D(psi, k, surface=True) for k in (2, 3)] if m.n3 else [m.D(psi, 2, surface=True)]
    lhs = float(sobolev_norm(sol.Vdot, 1, m))
    lhs += float(sobolev_norm(np.stack([psi] + Dpsi), 1, m, "boundary"))
    rhs = float(sobolev_norm(f, 1, m)) if f is not None else 0.0
    if g is not None:
        rhs += float(sobolev_norm(g, 2, m, "boundary"))
    if rhs == 0.0:
        return lhs, rhs, 0.0
    return lhs, rhs, lhs / rhs


def energy_certificate(ratios, tol=0.2):
    """Stability of the estimate ratio across rescalings and refinements."""
    r = np.asarray([x for x in ratios if x > 0], float)
    if r.size == 0:
        return {"trivial": True, "pass": True, "C": 0.0, "spread": 0.0}
    spread = float(r.max() / r.min() - 1.0)
    return {"trivial": False, "pass": spread <= tol, "C": float(r.max()), "spread": spread}


def tame_certificate(basic_norms, solution_norms, tol=0.3):
    """Affine fit of solution norms against basic-state norms."""
    x = np.asarray(basic_norms, float)
    y = np.asarray(solution_norms, float)
    if np.ptp(x) == 0:
        return {"slope": 0.0, "intercept": float(y.mean()), "max_rel_residual": 0.0, "pass": True}
    slope, icpt = np.polyfit(x, y, 1)
    fit = slope * x + icpt
    rel = float(np.max(np.abs(y - fit) / np.maximum(np.abs(y), 1e-300)))
    return {"slope": float(slope), "intercept": float(icpt), "max_rel_residual": rel,
            "pass": rel <= tol}


def constraint_monitor(sol, bs):
    """Time series of ||xi(t)||_{L2} and of the interface mismatch ||[H].N||_{L2(Sigma)}."""
    from .regularization import divergence_xi
    m = sol.mesh
    xi = divergence_xi(bs, sol.W)
    xi_series = sobolev_norm(xi, 0, m, time_integrated=False)
    Ht = m.trace(sol.Vdot[:, 4:7])
    jump = np.sum((Ht[0] - Ht[1]) * bs.N, axis=0)
    mism = sobolev_norm(jump, 0, m, "boundary", time_integrated=False)
    return np.atleast_1d(xi_series), np.atleast_1d(mism)


def drift_constant(xi_max, h, dt, eps, f_norm):
    """C in max_t ||xi|| <= C (h + dt + eps) ||f||."""
    return xi_max / ((h + dt + eps) * f_norm)
