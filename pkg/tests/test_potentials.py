import json

import numpy as np
import pytest

from ctmkit.core_grid import default_grid
from ctmkit.errors import ConfigError
from ctmkit.potentials import (ChargeTransferConfig, MatrixPotentialSpec, ScalarPotentialSpec, galilean_phase,
                               matrix_config, scalar_config, scalar_total_potential)


def test_families_evaluate():
    x = np.linspace(-3, 3, 7)
    assert np.allclose(ScalarPotentialSpec.poschl_teller(2)(x), -6 / np.cosh(x) ** 2)
    assert np.allclose(ScalarPotentialSpec.gaussian(-1.5, 2.0)(x), -1.5 * np.exp(-x**2 / 8))
    assert np.allclose(ScalarPotentialSpec.sech_square(-0.5, 0.25)(x), -0.5 / np.cosh(0.25 * x) ** 2)
    assert np.all(ScalarPotentialSpec.zero()(x) == 0)
    assert ScalarPotentialSpec.zero().is_zero


def test_unknown_family_rejected():
    with pytest.raises(ConfigError):
        ScalarPotentialSpec("square_well", {})


def test_config_roundtrip_and_digest():
    cfg = scalar_config([ScalarPotentialSpec.poschl_teller(1), ScalarPotentialSpec.gaussian(-1.0)],
                        [0.5, -0.5], [10.0, -10.0])
    doc = json.loads(json.dumps(cfg.to_dict()))
    again = ChargeTransferConfig.from_dict(doc)
    assert again.digest() == cfg.digest()
    assert cfg.m == 2 and cfg.min_dv == pytest.approx(1.0) and cfg.separation == pytest.approx(20.0)


@pytest.mark.parametrize("doc", [
    [],
    {"centers": []},
    {"centers": [{"v": 0.0}]},
    {"centers": [{"potential": {"family": "gaussian", "params": {"a": -1}}, "v": "fast"}]},
    {"model": "matrix", "centers": [{"potential": {"family": "gaussian"}}]},
])
def test_malformed_configs(doc):
    with pytest.raises(ConfigError):
        ChargeTransferConfig.from_dict(doc)


def test_ordering_enforced():
    p = ScalarPotentialSpec.gaussian(-1.0)
    with pytest.raises(ConfigError):
        scalar_config([p, p], [0.5, -0.5], [-10.0, 10.0])


def test_total_potential_is_sum_of_moving_centers():
    g = default_grid(1024, 40.0)
    p, q = ScalarPotentialSpec.poschl_teller(1), ScalarPotentialSpec.gaussian(-1.0)
    cfg = scalar_config([p, q], [1.0, -1.0], [5.0, -5.0])
    t = 1.5
    ref = p(g.x - 5.0 - t) + q(g.x + 5.0 + t)
    assert np.max(np.abs(scalar_total_potential(cfg, t, g.x) - ref)) < 1e-14


def test_galilean_phase():
    cfg = scalar_config([ScalarPotentialSpec.zero()], [0.8], [0.0])
    x = np.linspace(-1, 1, 5)
    th = galilean_phase(cfg.centers[0], 2.0, x, with_omega=False)
    assert np.allclose(th, 0.4 * x - 0.64 * 2.0 / 4)


def test_matrix_config_builds():
    mp = MatrixPotentialSpec(ScalarPotentialSpec.sech_square(-4.0, 1.0), ScalarPotentialSpec.sech_square(2.0, 1.0), 1.0)
    cfg = matrix_config([mp], [0.0], [0.0])
    assert cfg.model == "matrix" and cfg.m == 1
