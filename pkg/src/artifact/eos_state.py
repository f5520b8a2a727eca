"""Constitutive closures, pointwise MHD states and the constant contact background.

State vectors use the ordering (p, v1, v2, v3, H1, H2, H3, S) everywhere in the
package; arrays carry the 8 components on their leading axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ConfigInvalid, HyperbolicityViolated, InvalidBackground,
                     NonPositivePressure)

NCOMP = 8
P, V1, V2, V3, H1, H2, H3, S = range(8)
VEL = slice(1, 4)
MAG = slice(4, 7)


# ---------------------------------------------------------------------------
# closures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constitutive:
    """Closure rho(p, S) with the hyperbolicity band (rho_star, rho_upper).

    law="gamma" is the polytropic law rho = p**(1/gamma) exp(-S/gamma);
    law="table" delegates to a TabulatedClosure passed as `table`.
    """
    gamma: float = 2.0
    rho_star: float = 1e-3
    rho_upper: float = 1e3
    law: str = "gamma"
    table: object = None

    def __post_init__(self):
        if self.law not in ("gamma", "table"):
            raise ConfigInvalid(f"unknown closure law {self.law!r}")
        if self.law == "gamma" and not self.gamma > 1.0:
            raise ConfigInvalid("gamma must exceed 1 (isothermal limit excluded)")
        if self.law == "table" and self.table is None:
            raise ConfigInvalid("tabulated closure needs a table")
        if not 0 <= self.rho_star < self.rho_upper:
            raise ConfigInvalid("need 0 <= rho_star < rho_upper")

    # the functions below are complex-safe for the gamma law
    def rho(self, p, S):
        if self.law == "table":
            return self.table.rho(p, S)
        _check_pressure(p)
        g = self.gamma
        return p ** (1.0 / g) * np.exp(-S / g)

    def drho(self, p, S):
        """Partial derivatives (rho_p, rho_S)."""
        if self.law == "table":
            return self.table.drho(p, S)
        r = self.rho(p, S)
        return r / (self.gamma * p), -r / self.gamma

    def kappa(self, p, S):
        """1/(rho a^2), the (p, p) entry of the symmetrizer."""
        if self.law == "table":
            r = self.table.rho(p, S)
            return self.table.drho(p, S)[0] / r
        _check_pressure(p)
        return 1.0 / (self.gamma * p)

    def dkappa(self, p, S):
        if self.law == "table":
            return self.table.dkappa(p, S)
        return -1.0 / (self.gamma * p ** 2), 0.0 * p

    def energy(self, p, S):
        """Specific internal energy e(p, S)."""
        if self.law == "table":
            return self.table.energy(p, S)
        return p / ((self.gamma - 1.0) * self.rho(p, S))


class TabulatedClosure:
    """Closure sampled on a (p, S) grid, interpolated by bicubic splines."""

    def __init__(self, p_nodes, S_nodes, rho_table, e_table=None):
        from scipy.interpolate import RectBivariateSpline
        self._rho = RectBivariateSpline(p_nodes, S_nodes, rho_table)
        self._e = None if e_table is None else RectBivariateSpline(p_nodes, S_nodes, e_table)

    def _ev(self, spl, p, S, dx=0, dy=0):
        p, S = np.broadcast_arrays(np.asarray(p, float), np.asarray(S, float))
        return spl.ev(p.ravel(), S.ravel(), dx=dx, dy=dy).reshape(p.shape)

    def rho(self, p, S):
        _check_pressure(p)
        return self._ev(self._rho, p, S)

    def drho(self, p, S):
        return self._ev(self._rho, p, S, dx=1), self._ev(self._rho, p, S, dy=1)

    def dkappa(self, p, S):
        r = self.rho(p, S)
        rp, rs = self.drho(p, S)
        rpp = self._ev(self._rho, p, S, dx=2)
        rps = self._ev(self._rho, p, S, dx=1, dy=1)
        return rpp / r - rp ** 2 / r ** 2, rps / r - rp * rs / r ** 2

    def energy(self, p, S):
        if self._e is None:
            raise ConfigInvalid("tabulated closure has no energy table")
        return self._ev(self._e, p, S)


def _check_pressure(p):
    if np.any(np.real(p) <= 0):
        raise NonPositivePressure("pressure must be positive")


def as_pair(closure):
    """Normalize a closure argument to a (plus, minus) pair."""
    if isinstance(closure, (tuple, list)):
        return tuple(closure)
    return (closure, closure)


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------

def density(c: Constitutive, p, S):
    return c.rho(p, S)


def sound_speed(c: Constitutive, p, S):
    r = c.rho(p, S)
    if np.any((r <= c.rho_star) | (r >= c.rho_upper)):
        raise HyperbolicityViolated("density outside the hyperbolicity band")
    return np.sqrt(1.0 / (r * c.kappa(p, S)))


@dataclass
class FluidState:
    p: float
    v: np.ndarray
    H: np.ndarray
    S: float
    side: str = "+"

    def __post_init__(self):
        self.v = np.asarray(self.v, float).reshape(3)
        self.H = np.asarray(self.H, float).reshape(3)
        if self.side not in ("+", "-"):
            raise ValueError("side must be '+' or '-'")

    def vector(self):
        return np.concatenate([[self.p], self.v, self.H, [self.S]])

    @classmethod
    def from_vector(cls, u, side="+"):
        u = np.asarray(u, float)
        return cls(u[0], u[1:4], u[4:7], u[7], side)

    @property
    def total_pressure(self):
        return self.p + 0.5 * self.H @ self.H


def check_hyperbolicity(c: Constitutive, u):
    """Return (valid, margin) where margin is the distance of rho to the band edges."""
    vec = u.vector() if isinstance(u, FluidState) else np.asarray(u)
    if np.any(vec[P] <= 0):
        return False, -np.inf
    r = c.rho(vec[P], vec[S])
    margin = np.minimum(r - c.rho_star, c.rho_upper - r)
    ok = bool(np.all(margin > 0))
    return ok, float(np.min(margin))


# ---------------------------------------------------------------------------
# constant contact background
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BackgroundState:
    p_bar: float = 1.0
    v_bar: tuple = (0.0, 0.0, 0.0)
    H_bar: tuple = (1.0, 0.0, 0.0)
    S_plus: float = 0.0
    S_minus: float = 0.5

    def __post_init__(self):
        v = np.asarray(self.v_bar, float)
        H = np.asarray(self.H_bar, float)
        if v.shape != (3,) or H.shape != (3,):
            raise InvalidBackground("v_bar and H_bar must be 3-vectors")
        if v[0] != 0.0:
            raise InvalidBackground("normal velocity must vanish")
        if H[0] == 0.0:
            raise InvalidBackground("normal magnetic field must be nonzero")
        if self.S_plus == self.S_minus:
            raise InvalidBackground("entropies must differ across the contact")
        if not self.p_bar > 0:
            raise InvalidBackground("pressure must be positive")

    def vector(self, side="+"):
        Sv = self.S_plus if side == "+" else self.S_minus
        return np.concatenate([[self.p_bar], self.v_bar, self.H_bar, [Sv]])

    def pair(self):
        """(2, 8) array, index 0 is the + side."""
        return np.stack([self.vector("+"), self.vector("-")])


def random_states(rng, n, closure=None, p_range=(0.5, 2.0), v_scale=1.0,
                  H_scale=1.0, S_range=(-0.5, 0.5)):
    """Draw n random states (n, 8) inside the hyperbolicity band of `closure`."""
    closure = closure or Constitutive()
    out = np.empty((n, NCOMP))
    out[:, P] = rng.uniform(*p_range, n)
    out[:, VEL] = v_scale * rng.standard_normal((n, 3))
    out[:, MAG] = H_scale * rng.standard_normal((n, 3))
    out[:, S] = rng.uniform(*S_range, n)
    ok, _ = check_hyperbolicity(closure, out.T)
    if not ok:
        raise HyperbolicityViolated("sampling ranges leave the hyperbolicity band")
    return out
