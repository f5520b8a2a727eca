"""Batch experiment runner: resolve a config, run one mode, write manifest and summary."""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ArtifactError, ConfigInvalid

MODES = ("check-symbols", "dispersion", "linsolve", "nash-moser", "compat", "jumps",
         "smoother-props")

DEFAULTS = {
    "mode": "check-symbols",
    "seed": 0,
    "out": "run_out",
    "grid": {"n1": 32, "n2": 32, "n3": 0, "X1": 8.0, "nt": 11, "T": 0.1},
    "background": {"p_bar": 1.0, "v_bar": [0.0, 0.0, 0.0], "H_bar": [1.0, 0.0, 0.0],
                   "S_plus": 0.0, "S_minus": 0.5},
    "closure": {"gamma": 2.0, "rho_star": 1e-3, "rho_upper": 1e3},
    "sfrak": 1.0,
    "epsilon": [1e-3],
    "far": "outflow",
    "source": {"kind": "zero", "amplitude": 1e-2},
    "nash_moser": {"theta0": 32.0, "alpha": 7.0, "max_iter": 5, "checkpoint": False,
                   "resume": False},
    "compat": {"lmax": 1, "T_values": [0.4, 0.2, 0.1]},
    "dispersion": {"kmax": 16, "N": 48},
    "jumps": {"samples": None, "count": 20, "tol": 1e-8},
    "smoother": {"fields": 5, "n1": 64, "n2": 32, "nt": 21, "dt": 0.005, "kmax": 4},
    "dump_symbols": False,
}


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigInvalid(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict) and base[k] and isinstance(v, dict):
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def resolve_config(file_cfg=None, **overrides) -> dict:
    """Defaults, then the config file, then non-None flag overrides."""
    cfg = _merge(DEFAULTS, file_cfg or {})
    for k, v in overrides.items():
        if v is None:
            continue
        if k == "dim":
            cfg["grid"]["n3"] = cfg["grid"]["n2"] if v == 3 else 0
        else:
            cfg[k] = v
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg["mode"] not in MODES:
        raise ConfigInvalid(f"unknown mode {cfg['mode']!r}; expected one of {MODES}")
    g = cfg["grid"]
    for k in ("n1", "n2", "nt"):
        if not isinstance(g[k], int) or g[k] < 1:
            raise ConfigInvalid(f"grid.{k} must be a positive integer")
    if g["n3"] < 0 or g["T"] <= 0 or g["X1"] <= 0:
        raise ConfigInvalid("grid sizes must be positive")
    eps = cfg["epsilon"]
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigInvalid("epsilon schedule must be positive and strictly decreasing")
    if cfg["source"]["kind"] not in ("zero", "bump"):
        raise ConfigInvalid("source.kind must be 'zero' or 'bump'")
    if cfg["sfrak"] < 0:
        raise ConfigInvalid("sfrak must be nonnegative")
    if cfg["nash_moser"]["theta0"] < 1:
        raise ConfigInvalid("theta0 must be at least 1")


def _mesh(cfg, nt=None):
    from .geometry import Mesh
    g = cfg["grid"]
    nt = g["nt"] if nt is None else nt
    dt = g["T"] / (nt - 1) if nt > 1 else 0.0
    return Mesh(g["n1"], g["n2"], g["n3"], g["X1"], nt=nt, dt=dt)


def _background(cfg):
    from .eos_state import BackgroundState, Constitutive
    b = cfg["background"]
    bg = BackgroundState(b["p_bar"], tuple(b["v_bar"]), tuple(b["H_bar"]), b["S_plus"],
                         b["S_minus"])
    return bg, Constitutive(**cfg["closure"])


def _bump(mesh, amp, center=2.5, width=0.5):
    _, x1, x2, x3 = mesh.coords()
    prof = np.exp(-((x1 - center) / width) ** 2) * np.cos(x2)
    if mesh.n3:
        prof = prof * np.cos(x3)
    return amp * prof


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def run_check_symbols(cfg, out: Path):
    from .symbols import assemble_A0, assemble_Ai, boundary_inertia, contact_boundary_matrix
    bg, cl = _background(cfg)
    up, um = bg.vector("+"), bg.vector("-")
    bm = contact_boundary_matrix(cl, up, um)
    summ = {"inertia": list(boundary_inertia(bm))}
    A0 = assemble_A0(cl, up)
    summ["A0_min_eig"] = float(np.linalg.eigvalsh(A0).min())
    summ["A_symmetric"] = bool(all(np.array_equal(assemble_Ai(cl, up, i),
                                                  assemble_Ai(cl, up, i).T) for i in (1, 2, 3)))
    if cfg["dump_symbols"]:
        dump = {"A0": A0.tolist(), "boundary_matrix": bm.M.tolist()}
        dump.update({f"A{i}": assemble_Ai(cl, up, i).tolist() for i in (1, 2, 3)})
        (out / "symbols.json").write_text(json.dumps(dump, indent=1))
    return summ


def run_dispersion(cfg, out: Path):
    from .linsolve import normal_modes
    bg, cl = _background(cfg)
    d = cfg["dispersion"]
    rows = []
    for k in range(1, d["kmax"] + 1):
        sp = normal_modes(bg, cl, cfg["sfrak"], (k, 0), N=d["N"])
        rows.append((k, float(sp.eigvals.real.max()), float(np.abs(sp.eigvals.imag).max())))
    _write_csv(out / "dispersion.csv", ["k", "max_re", "max_abs_im"], rows)
    return {"max_re_lambda": max(r[1] for r in rows), "k_values": [r[0] for r in rows]}


def run_linsolve(cfg, out: Path):
    from .diagnostics import sobolev_norm
    from .linearization import BasicState
    from .linsolve import LinearProblem, solve_effective
    bg, cl = _background(cfg)
    m = _mesh(cfg)
    bs = BasicState.from_background(bg, m, cl, sfrak=cfg["sfrak"])
    f = np.zeros((2, 8) + m.vol_shape)
    if cfg["source"]["kind"] == "bump":
        t = m.coords()[0]
        f[0, 0] = _bump(m, cfg["source"]["amplitude"]) * np.sin(np.pi * t / m.t[-1]) ** 2
    prob = LinearProblem(bs, m, f=f, epsilon=cfg["epsilon"][0], far=cfg["far"])
    sol = solve_effective(prob, eps_schedule=cfg["epsilon"])
    _write_field(out / "W_final", sol.W[:, :, -1])
    _write_field(out / "psi", sol.psi)
    return {"W_L2": float(sobolev_norm(sol.W, 0, m)), "W_H1": float(sobolev_norm(sol.W, 1, m)),
            "psi_max": float(np.abs(sol.psi).max()), "W_max": float(np.abs(sol.W).max()),
            "cauchy": sol.info["cauchy"], "substeps": sol.info["substeps"]}


def _initial_data(cfg, m):
    from .init_compat import InitialData
    bg, cl = _background(cfg)
    data = InitialData.from_background(bg, m, cl, sfrak=cfg["sfrak"])
    if cfg["source"]["kind"] == "bump":
        U0 = data.U0.copy()
        b = _bump(data.mesh, cfg["source"]["amplitude"])
        U0[0, 0] += b
        U0[0, 2] += b
        U0[1, 0] += b
        data = InitialData(U0, data.phi0, data.mesh, cl, cfg["sfrak"])
    return data


def run_compat(cfg, out: Path):
    from .diagnostics import sobolev_norm
    from .init_compat import (boundary_residual, build_approximate, check_compatibility,
                              compute_traces)
    m = _mesh(cfg, nt=1)
    data = _initial_data(cfg, m)
    tr = compute_traces(data, cfg["compat"]["lmax"])
    chk = check_compatibility(tr, data)
    rows = []
    for T in cfg["compat"]["T_values"]:
        ap = build_approximate(data, tr, T, nt=cfg["grid"]["nt"])
        rows.append((T, float(sobolev_norm(ap.f, 3, ap.mesh)),
                     float(np.abs(boundary_residual(ap)).max())))
    _write_csv(out / "fa_norms.csv", ["T", "fa_H3", "boundary_residual"], rows)
    return {"compatible": bool(chk["pass"]), "first_failure": chk.get("first_failure"),
            "fa_H3": [r[1] for r in rows], "boundary_residual": max(r[2] for r in rows)}


def run_nash_moser(cfg, out: Path):
    from .init_compat import build_approximate, compute_traces
    from .nash_moser import NMConfig, driver
    m = _mesh(cfg, nt=1)
    data = _initial_data(cfg, m)
    tr = compute_traces(data, 1)
    ap = build_approximate(data, tr, cfg["grid"]["T"], nt=cfg["grid"]["nt"])
    if cfg["source"]["kind"] == "zero":
        # background data: f^a vanishes up to roundoff; make it exactly zero
        ap.f = np.zeros_like(ap.f)
    nm = cfg["nash_moser"]
    res = driver(ap, NMConfig(epsilon=cfg["epsilon"][0], theta0=nm["theta0"], alpha=nm["alpha"],
                              max_iter=nm["max_iter"], far=cfg["far"]),
                 checkpoint_dir=out / "checkpoints" if nm["checkpoint"] else None,
                 resume=nm["resume"])
    st = res["state"]
    rows = [(r["n"], r["theta"], r["step_norm"], r["residual"]) for r in st.log]
    _write_csv(out / "iterations.csv", ["n", "theta", "step_norm", "residual"], rows)
    _write_field(out / "V_final", st.V)
    return {"residuals": res["residuals"],
            "telescoping": [max(t) for t in res["telescoping"]],
            "iterate_max": float(np.abs(st.V).max()), "psi_max": float(np.abs(st.psi).max()),
            "stop": res["stop"]}


def run_jumps(cfg, out: Path):
    from .jumps import (InterfaceSample, classification_csv, classify, contact_sample,
                        rh_residual, tangential_sample)
    _, cl = _background(cfg)
    j = cfg["jumps"]
    if j["samples"]:
        recs = json.loads(Path(j["samples"]).read_text())
        samples = [InterfaceSample.from_record(r, cl) for r in recs]
    else:
        rng = np.random.default_rng(cfg["seed"])
        samples = []
        for i in range(j["count"]):
            make = contact_sample if i % 2 == 0 else tangential_sample
            s = cfg["sfrak"] if i % 4 < 2 else 0.0
            samples.append(make(rng, s, float(rng.uniform(-2, 2)), cl))
    (out / "classification.csv").write_text(classification_csv(samples, j["tol"]))
    labels = [classify(s, j["tol"]).label for s in samples]
    return {"labels": labels,
            "max_rh_residual": max(float(np.abs(rh_residual(s)).max()) for s in samples)}


def run_smoother_props(cfg, out: Path):
    from .geometry import Mesh
    from .nash_moser import certify, past_vanishing_defect, random_past_vanishing_fields
    from .nash_moser import smoother_properties
    sm = cfg["smoother"]
    m = Mesh(sm["n1"], sm["n2"], X1=cfg["grid"]["X1"], nt=sm["nt"], dt=sm["dt"])
    rng = np.random.default_rng(cfg["seed"])
    fields = random_past_vanishing_fields(m, sm["fields"], rng, kmax=sm["kmax"])
    cert = certify(smoother_properties(m, fields), m)
    return {"certificate": {k: {"C": v["C"], "pass": bool(v["pass"])} for k, v in cert.items()},
            "past_vanishing_defect": float(past_vanishing_defect(m, fields))}


RUNNERS = {"check-symbols": run_check_symbols, "dispersion": run_dispersion,
           "linsolve": run_linsolve, "nash-moser": run_nash_moser, "compat": run_compat,
           "jumps": run_jumps, "smoother-props": run_smoother_props}


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_field(stem: Path, arr):
    """Raw little-endian float64 array plus a JSON header with shape and dtype."""
    a = np.ascontiguousarray(arr, dtype="<f8")
    stem.with_suffix(".bin").write_bytes(a.tobytes())
    stem.with_suffix(".json").write_text(json.dumps({"shape": list(a.shape), "dtype": "<f8",
                                                     "order": "C"}))


def code_version():
    """Package version plus a digest of the package sources."""
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return {"version": __version__, "source_sha256": h.hexdigest()}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def run(cfg: dict):
    """Run one resolved config; returns (exit status, summary dict)."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": cfg, "code": code_version(), "python": platform.python_version(),
                "numpy": np.__version__}
    t0 = time.perf_counter()
    status, summary = 0, {"mode": cfg["mode"], "seed": cfg["seed"]}
    try:
        np.random.seed(cfg["seed"])
        summary.update(RUNNERS[cfg["mode"]](cfg, out))
        summary["status"] = "ok"
    except ConfigInvalid as e:
        status, summary["status"], summary["error"] = 2, "ConfigInvalid", str(e)
    except ArtifactError as e:
        status, summary["status"], summary["error"] = 1, type(e).__name__, str(e)
    manifest["wall_seconds"] = time.perf_counter() - t0
    manifest["exit_status"] = status
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=1, sort_keys=True))
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=1, sort_keys=True))
    return status, summary


def build_parser():
    p = argparse.ArgumentParser(prog="artifact", description=__doc__)
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--dump-symbols", action="store_true", default=None,
                   help="write the symbol matrices (check-symbols mode)")
    dim = p.add_mutually_exclusive_group()
    dim.add_argument("--2d", dest="dim", action="store_const", const=2)
    dim.add_argument("--3d", dest="dim", action="store_const", const=3)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        file_cfg = json.loads(args.config.read_text()) if args.config else None
        cfg = resolve_config(file_cfg, mode=args.mode, out=args.out, seed=args.seed,
                             dump_symbols=args.dump_symbols, dim=args.dim)
    except (ConfigInvalid, OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    status, summary = run(cfg)
    print(json.dumps({"mode": cfg["mode"], "status": summary["status"], "out": cfg["out"]}))
    return status
