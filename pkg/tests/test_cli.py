import json
import subprocess
import sys

import numpy as np
import pytest

from ctmkit.cli import main

PT_PAIR = {
    "model": "scalar",
    "grid": {"n": 2048, "half_width": 100.0},
    "centers": [
        {"potential": {"family": "poschl_teller", "params": {"n": 1}}, "v": 0.5, "y": 10.0},
        {"potential": {"family": "gaussian", "params": {"a": -1.0}}, "v": -0.5, "y": -10.0},
    ],
}


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "config.json"
    p.write_text(json.dumps(PT_PAIR))
    return p


def test_scatter_outputs(tmp_path, cfg):
    out = tmp_path / "s"
    assert main(["scatter", "--config", str(cfg), "--out", str(out), "--nk", "21"]) == 0
    rows = (out / "scattering.csv").read_text().splitlines()
    assert rows[0] == "center,k,re_r,im_r,re_s,im_s" and len(rows) == 1 + 2 * 21
    spec = json.loads((out / "spectrum.json").read_text())
    assert spec["centers"][0]["counts"]["ordinary"] == 1
    res = json.loads((out / "resonance.json").read_text())
    assert [c["resonant"] for c in res["centers"]] == [True, False]


def test_malformed_config_leaves_no_output(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": "scalar", "centers": [')
    out = tmp_path / "never"
    assert main(["scatter", "--config", str(bad), "--out", str(out)]) == 2
    assert not out.exists()
    assert "line 1" in capsys.readouterr().err


def test_invalid_config_values(tmp_path):
    doc = dict(PT_PAIR, centers=list(reversed(PT_PAIR["centers"])))
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    assert main(["evolve", "--config", str(p), "--psi0", "gaussian", "--t-final", "1", "--out", str(tmp_path / "e")]) == 2
    assert main(["scatter", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "m")]) == 2


def test_evolve_and_decompose(tmp_path, cfg):
    out = tmp_path / "e"
    assert main(["evolve", "--config", str(cfg), "--psi0", "mode:center=1,index=0", "--t-final", "1",
                 "--dt", "0.01", "--samples", "3", "--out", str(out)]) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["times"] == [0.0, 0.5, 1.0] and meta["diagnostics"]["norm_drift_max"] < 1e-12
    d = tmp_path / "d"
    assert main(["decompose", "--config", str(cfg), "--field", str(out / "psi_0000.csv"), "--out", str(d)]) == 0
    doc = json.loads((d / "decomposition.json").read_text())
    first = doc["modes"][0]
    assert (first["center"], first["index"]) == (1, 0)
    assert first["re"] == pytest.approx(1.0, abs=1e-8) and abs(first["im"]) < 1e-8
    assert (d / "phi.csv").exists()


def test_evolve_rejects_large_step(tmp_path, cfg):
    out = tmp_path / "e"
    assert main(["evolve", "--config", str(cfg), "--psi0", "gaussian:x0=0,width=2", "--t-final", "2",
                 "--dt", "5", "--out", str(out)]) == 3
    assert not out.exists()


def test_evolve_bad_field_spec(tmp_path, cfg):
    assert main(["evolve", "--config", str(cfg), "--psi0", "square", "--t-final", "1",
                 "--out", str(tmp_path / "e")]) == 2
    assert main(["evolve", "--config", str(cfg), "--psi0", "mode:center=2,index=7", "--t-final", "1",
                 "--out", str(tmp_path / "e")]) == 2


def test_verify_unknown_suite(tmp_path):
    assert main(["verify", "--suite", "nope", "--out", str(tmp_path)]) == 2


@pytest.mark.slow
def test_verify_config_suite(tmp_path):
    doc = {"model": "scalar", "grid": {"n": 1024, "half_width": 50.0},
           "centers": [{"potential": {"family": "gaussian", "params": {"a": -1.5}}}]}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    code = main(["verify", "--suite", "config", "--config", str(p), "--out", str(tmp_path / "v")])
    verdicts = [json.loads(f.read_text()) for f in sorted((tmp_path / "v").glob("*/verdict.json"))]
    assert len(verdicts) == 2
    assert code == sum(not v["pass"] for v in verdicts)


def test_console_entry_point_help():
    r = subprocess.run([sys.executable, "-m", "ctmkit.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("scatter", "evolve", "decompose", "verify"):
        assert cmd in r.stdout
