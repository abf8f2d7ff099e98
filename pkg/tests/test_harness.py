import json

import numpy as np
import pytest

from ctmkit import harness
from ctmkit.errors import ConfigError
from ctmkit.potentials import ScalarPotentialSpec, scalar_config


def make_result():
    return harness.ExperimentResult("demo", True, {"slope": np.float64(-0.5), "z": 1 + 2j},
                                    {"slope_max": 0.0}, [{"t": 0.0, "v": 1.0}, {"t": 1.0, "w": np.float32(2.0)}],
                                    {"seed": 3})


def test_result_files_are_deterministic(tmp_path):
    a = make_result().write(tmp_path / "a")
    b = make_result().write(tmp_path / "b")
    for name in ("metrics.csv", "verdict.json", "meta.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    verdict = json.loads((a / "verdict.json").read_text())
    assert verdict["pass"] is True and verdict["fitted"]["slope"] == -0.5
    assert (a / "metrics.csv").read_text().splitlines()[0] == "t,v,w"
    assert json.loads((a / "meta.json").read_text())["seed"] == 3


def test_line_format():
    assert make_result().line() == "[PASS] demo"


def test_unknown_suite():
    with pytest.raises(ConfigError):
        harness.run_suite("nope", echo=None)


def test_resonant_potential_refused():
    cfg = scalar_config([ScalarPotentialSpec.poschl_teller(1)], [0.0], [0.0])
    g = harness.default_grid(1024, 50.0)
    with pytest.raises(ConfigError):
        harness.decay_linfty_experiment(cfg, np.exp(-g.x**2), g)


def test_embed_zero_pads():
    small = harness.default_grid(64, 10.0)
    big = small.resized(4)
    f = np.exp(-small.x**2)
    e = harness.embed(f, small, big)
    e = np.atleast_2d(e)[0]
    assert np.count_nonzero(e) == np.count_nonzero(f)
    assert np.allclose(np.interp(small.x, big.x, e.real), f)


def test_free_gaussian_decay_table_is_flat():
    g = harness.mid_grid()
    cfg = scalar_config([ScalarPotentialSpec.zero()], [0.0], [0.0])
    psi0 = np.exp(-g.x**2 / 2)
    traj = harness.decay_run(cfg, psi0, g, dt=0.5)
    res = harness.decay_linfty_experiment(cfg, psi0, g, trajectory=traj)
    assert res.passed and abs(res.fitted["trend_slope"]) < 0.05
