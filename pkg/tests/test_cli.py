import json
import subprocess
import sys

import pytest

from artifact.cli import DEFAULTS, main, resolve_config, run
from artifact.errors import ConfigInvalid


def _cfg(tmp_path, name, **over):
    cfg = json.loads(json.dumps(DEFAULTS))
    cfg.update(over)
    cfg["out"] = str(tmp_path / name)
    return cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigInvalid):
        resolve_config({"grid": {"nx": 3}})


def test_bad_epsilon_schedule():
    with pytest.raises(ConfigInvalid):
        resolve_config({"epsilon": [1e-3, 1e-2]})


def test_dim_flag():
    assert resolve_config(dim=3)["grid"]["n3"] == 32
    assert resolve_config(dim=2)["grid"]["n3"] == 0


def test_invalid_config_exit_code(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"mode": "nope"}))
    assert main(["--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_check_symbols_summary_deterministic(tmp_path):
    a = run(_cfg(tmp_path, "a", mode="check-symbols"))
    b = run(_cfg(tmp_path, "b", mode="check-symbols"))
    assert a[0] == b[0] == 0
    sa = (tmp_path / "a" / "summary.json").read_bytes()
    assert sa == (tmp_path / "b" / "summary.json").read_bytes()
    assert json.loads(sa)["status"] == "ok"
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["code"]["version"] == "0.1.0" and "wall_seconds" in man


def test_jumps_mode(tmp_path):
    status, summary = run(_cfg(tmp_path, "j", mode="jumps"))
    assert status == 0
    assert all(lbl != "none" for lbl in summary["labels"])
    assert (tmp_path / "j" / "classification.csv").exists()


def test_dispersion_mode_small(tmp_path):
    cfg = _cfg(tmp_path, "d", mode="dispersion")
    cfg["dispersion"] = {"kmax": 2, "N": 16}
    status, summary = run(cfg)
    assert status == 0
    assert (tmp_path / "d" / "dispersion.csv").exists()


def test_smoother_mode_small(tmp_path):
    cfg = _cfg(tmp_path, "s", mode="smoother-props")
    cfg["smoother"] = {"fields": 1, "n1": 16, "n2": 16, "nt": 11, "dt": 0.01, "kmax": 2}
    status, summary = run(cfg)
    assert status == 0
    assert summary["past_vanishing_defect"] == 0.0


def test_linsolve_zero_mode(tmp_path):
    cfg = _cfg(tmp_path, "l", mode="linsolve")
    cfg["grid"].update(n1=16, n2=16)
    status, _ = run(cfg)
    assert status == 0
    hdr = json.loads((tmp_path / "l" / "W_final.json").read_text())
    assert hdr["dtype"] == "<f8"


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "artifact", "--mode", "check-symbols",
                        "--out", str(tmp_path / "m"), "--seed", "3"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["status"] == "ok"
