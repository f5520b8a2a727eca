"""Jump relations across a moving interface, with optional surface tension.

Sides follow the package convention: the normal points into the "+" fluid and
[g] = g(+) - g(-).  Tension enters the momentum row as sfrak*Hcurv*n and the
energy row as sfrak*Hcurv*Vcal; with sfrak == 0 those terms are skipped, so
the classical relations are reproduced bit for bit.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .eos_state import Constitutive, FluidState
from .errors import ArtifactError, ConfigInvalid

CLASSES = ("contact_ST", "tangential_ST", "contact", "tangential", "none")
DEFAULT_TOL = 1e-8
ROW_NAMES = ("mass", "mom1", "mom2", "mom3", "ind1", "ind2", "ind3", "energy", "normal_H")


class Ambiguous(ArtifactError):
    """More than one discontinuity class fits within tolerance."""


@dataclass
class InterfaceSample:
    U_plus: FluidState
    U_minus: FluidState
    n: np.ndarray
    Vcal: float
    Hcurv: float = 0.0
    sfrak: float = 0.0
    closure: Constitutive = field(default_factory=Constitutive)

    def __post_init__(self):
        self.n = np.asarray(self.n, float).reshape(3)
        if abs(np.linalg.norm(self.n) - 1.0) > 1e-12:
            raise ConfigInvalid("interface normal must have unit length")
        if self.sfrak < 0:
            raise ConfigInvalid("tension coefficient must be nonnegative")

    @property
    def sides(self):
        return self.U_plus, self.U_minus

    def scale(self):
        """Magnitude used to make tolerances relative."""
        vals = [abs(self.Vcal), abs(self.sfrak * self.Hcurv)]
        for u in self.sides:
            vals.append(float(np.max(np.abs(u.vector()))))
        return 1.0 + max(vals)

    def shifted(self, w):
        """Same sample with a common velocity w added on both sides."""
        w = np.asarray(w, float)
        mv = lambda u: FluidState(u.p, u.v + w, u.H, u.S, u.side)
        return InterfaceSample(mv(self.U_plus), mv(self.U_minus), self.n, self.Vcal,
                               self.Hcurv, self.sfrak, self.closure)

    def with_tension(self, sfrak):
        return InterfaceSample(self.U_plus, self.U_minus, self.n, self.Vcal,
                               self.Hcurv, sfrak, self.closure)

    @classmethod
    def from_record(cls, rec: dict, closure=None):
        """Build from a JSON record {plus: {...}, minus: {...}, n, Vcal, Hcurv, sfrak}."""
        def st(d, side):
            return FluidState(d["p"], d["v"], d["H"], d["S"], side)
        return cls(st(rec["plus"], "+"), st(rec["minus"], "-"), rec["n"], rec["Vcal"],
                   rec.get("Hcurv", 0.0), rec.get("sfrak", 0.0), closure or Constitutive())


def _side_quantities(u: FluidState, c: Constitutive):
    rho = float(c.rho(u.p, u.S))
    E = float(c.energy(u.p, u.S)) + 0.5 * u.v @ u.v
    return rho, E


def rh_residual(s: InterfaceSample) -> np.ndarray:
    """Conservation-form jump residuals: mass, momentum(3), induction(3), energy, normal H."""
    n, V = s.n, s.Vcal
    mass = 0.0
    mom = np.zeros(3)
    ind = np.zeros(3)
    en = 0.0
    for u, sign in ((s.U_plus, 1.0), (s.U_minus, -1.0)):
        rho, E = _side_quantities(u, s.closure)
        v, H = u.v, u.H
        vn, Hn = v @ n, H @ n
        q = u.total_pressure
        mass += sign * (-V * rho + rho * vn)
        mom += sign * (-V * rho * v + rho * vn * v - Hn * H + q * n)
        ind += sign * (-V * H - np.cross(n, np.cross(v, H)))
        en += sign * (-V * (rho * E + 0.5 * H @ H)
                      + vn * (rho * E + u.p) + n @ np.cross(H, np.cross(v, H)))
    nH = (s.U_plus.H - s.U_minus.H) @ n
    if s.sfrak:
        mom = mom - s.sfrak * s.Hcurv * n
        en = en - s.sfrak * s.Hcurv * V
    return np.concatenate([[mass], mom, ind, [en], [nH]])


@dataclass
class FluxResiduals:
    j_plus: float
    j_minus: float
    j_jump: float
    normal_momentum: float
    tangential_momentum: np.ndarray
    normal_H: float
    tangential_induction: np.ndarray
    energy: float
    j_continuous: bool

    def vector(self):
        return np.concatenate([[self.j_jump, self.normal_momentum], self.tangential_momentum,
                               [self.normal_H], self.tangential_induction, [self.energy]])


def flux_form(s: InterfaceSample, tol=DEFAULT_TOL) -> FluxResiduals:
    """Jump relations written with the mass transfer flux j = rho (v.n - Vcal)."""
    n, V = s.n, s.Vcal
    P = np.eye(3) - np.outer(n, n)
    q = {}
    for key, u in (("+", s.U_plus), ("-", s.U_minus)):
        rho, E = _side_quantities(u, s.closure)
        vn, Hn = u.v @ n, u.H @ n
        q[key] = dict(rho=rho, E=E, vn=vn, Hn=Hn, vt=P @ u.v, Ht=P @ u.H,
                      j=rho * (vn - V), q=u.total_pressure, Hv=u.H @ u.v, H2=u.H @ u.H)
    jump = lambda f: f(q["+"]) - f(q["-"])
    j = 0.5 * (q["+"]["j"] + q["-"]["j"])
    Hn = 0.5 * (q["+"]["Hn"] + q["-"]["Hn"])
    jj = jump(lambda d: d["j"])
    tension = s.sfrak * s.Hcurv if s.sfrak else 0.0
    normal_mom = j * jump(lambda d: d["vn"]) + jump(lambda d: d["q"]) - tension
    tan_mom = j * jump(lambda d: d["vt"]) - Hn * jump(lambda d: d["Ht"])
    tan_ind = j * jump(lambda d: d["Ht"] / d["rho"]) - Hn * jump(lambda d: d["vt"])
    en = (j * jump(lambda d: d["E"] + d["H2"] / (2 * d["rho"]))
          + jump(lambda d: d["q"] * d["vn"] - d["Hv"] * d["Hn"]))
    if s.sfrak:
        en = en - tension * V
    return FluxResiduals(q["+"]["j"], q["-"]["j"], jj, normal_mom, tan_mom,
                         jump(lambda d: d["Hn"]), tan_ind, en,
                         bool(abs(jj) <= tol * s.scale()))


def class_residuals(s: InterfaceSample) -> dict:
    """Max-norm residual of each class's boundary conditions (normal-H condition excluded)."""
    n, V = s.n, s.Vcal
    up, um = s.U_plus, s.U_minus
    tension = s.sfrak * s.Hcurv if s.sfrak else 0.0
    kin_both = max(abs(up.v @ n - V), abs(um.v @ n - V))
    tang = max(abs(up.H @ n), abs(um.H @ n), abs(up.total_pressure - um.total_pressure - tension),
               kin_both)
    cont = max(abs(up.p - um.p - tension), float(np.max(np.abs(up.v - um.v))),
               float(np.max(np.abs(up.H - um.H))), abs(up.v @ n - V))
    return {"tangential": tang, "contact": cont}


@dataclass
class Classification:
    label: str
    candidates: list
    residuals: dict
    ambiguous: bool = False


def classify(s: InterfaceSample, tol=DEFAULT_TOL, strict=False) -> Classification:
    """Label the discontinuity; tension classes are used exactly when sfrak > 0."""
    sc = s.scale()
    thr = tol * sc
    res = class_residuals(s)
    Hn = min(abs(s.U_plus.H @ s.n), abs(s.U_minus.H @ s.n))
    fits = []
    if res["tangential"] <= thr:
        fits.append("tangential")
    if res["contact"] <= thr and Hn > thr:
        fits.append("contact")
    suffix = "_ST" if s.sfrak > 0 else ""
    cands = [c + suffix for c in fits]
    if len(cands) > 1 and strict:
        raise Ambiguous(f"several classes fit: {cands}")
    label = cands[0] if cands else "none"
    return Classification(label, cands, res, len(cands) > 1)


def classification_csv(samples, tol=DEFAULT_TOL) -> str:
    """CSV report: index, label, ambiguous flag and class residuals."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "label", "ambiguous", "res_contact", "res_tangential", "rh_max"])
    for i, s in enumerate(samples):
        c = classify(s, tol)
        w.writerow([i, c.label, int(c.ambiguous), f"{c.residuals['contact']:.6e}",
                    f"{c.residuals['tangential']:.6e}", f"{np.abs(rh_residual(s)).max():.6e}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# exact samples
# ---------------------------------------------------------------------------

def _unit(rng):
    x = rng.standard_normal(3)
    return x / np.linalg.norm(x)


def _tangent(rng, n):
    x = rng.standard_normal(3)
    return x - (x @ n) * n


def contact_sample(rng, sfrak=0.0, Hcurv=0.0, closure=None) -> InterfaceSample:
    """Exact contact data: continuous v and H with H.n != 0, [p] = sfrak*Hcurv, [S] != 0."""
    n = _unit(rng)
    v = rng.standard_normal(3)
    H = rng.standard_normal(3)
    H += (0.5 + rng.random()) * np.sign(H @ n or 1.0) * n
    pm = 1.0 + rng.random()
    pp = pm + sfrak * Hcurv
    if pp <= 0.1:
        pm += 0.2 - pp
        pp = 0.2
    Sp, Sm = rng.uniform(-0.5, 0.5, 2) + np.array([0.3, -0.3])
    return InterfaceSample(FluidState(pp, v, H, Sp, "+"), FluidState(pm, v, H, Sm, "-"),
                           n, float(v @ n), Hcurv, sfrak, closure or Constitutive())


def tangential_sample(rng, sfrak=0.0, Hcurv=0.0, closure=None) -> InterfaceSample:
    """Exact tangential data: H.n = 0 both sides, equal normal velocity, [q] = sfrak*Hcurv."""
    n = _unit(rng)
    vn = rng.standard_normal()
    vp = vn * n + _tangent(rng, n)
    vm = vn * n + _tangent(rng, n)
    Hp, Hm = _tangent(rng, n), _tangent(rng, n)
    pm = 1.0 + rng.random()
    pp = pm + 0.5 * (Hm @ Hm) - 0.5 * (Hp @ Hp) + sfrak * Hcurv
    if pp <= 0.1:
        pm += 0.2 - pp
        pp = 0.2
    Sp, Sm = rng.uniform(-0.5, 0.5, 2)
    return InterfaceSample(FluidState(pp, vp, Hp, Sp, "+"), FluidState(pm, vm, Hm, Sm, "-"),
                           n, float(vn), Hcurv, sfrak, closure or Constitutive())


def background_sample(bg=None, sfrak=0.0, Hcurv=0.0, closure=None) -> InterfaceSample:
    """The constant contact background across a flat interface (normal along x1)."""
    from .eos_state import BackgroundState
    bg = bg or BackgroundState()
    up = FluidState.from_vector(bg.vector("+"), "+")
    um = FluidState.from_vector(bg.vector("-"), "-")
    up.p = um.p + sfrak * Hcurv
    return InterfaceSample(up, um, [1.0, 0.0, 0.0], float(up.v[0]), Hcurv, sfrak,
                           closure or Constitutive())


def perturb(s: InterfaceSample, rng, size) -> InterfaceSample:
    """Random perturbation of both states and the normal speed (for near-solutions)."""
    def pert(u):
        x = u.vector() + size * rng.standard_normal(8)
        x[0] = max(x[0], 1e-3)
        return FluidState.from_vector(x, u.side)
    return InterfaceSample(pert(s.U_plus), pert(s.U_minus), s.n,
                           s.Vcal + size * rng.standard_normal(), s.Hcurv, s.sfrak, s.closure)


def enforce_mass_flux(s: InterfaceSample) -> InterfaceSample:
    """Adjust the + normal velocity so that the mass transfer flux is continuous."""
    rp, _ = _side_quantities(s.U_plus, s.closure)
    rm, _ = _side_quantities(s.U_minus, s.closure)
    jm = rm * (s.U_minus.v @ s.n - s.Vcal)
    vn_new = s.Vcal + jm / rp
    up = s.U_plus
    v = up.v + (vn_new - up.v @ s.n) * s.n
    return InterfaceSample(FluidState(up.p, v, up.H, up.S, "+"), s.U_minus, s.n, s.Vcal,
                           s.Hcurv, s.sfrak, s.closure)
