import numpy as np
import pytest

from ctmkit.core_grid import default_grid, lp_norm
from ctmkit.dispersive_map import (bump_profile, build_profile_sequence, coercivity_report, decompose,
                                   domain_exclusions, evaluate_S, mode_catalog, mode_field, norm_comparability,
                                   reconstruct)
from ctmkit.errors import ConfigError
from ctmkit.evolution import propagate
from ctmkit.potentials import ScalarPotentialSpec, scalar_config


@pytest.fixture(scope="module")
def g():
    return default_grid()


def test_bump_is_compact_and_normalized(g):
    b = bump_profile(g, 1.0, 0.5)
    assert np.all(b[np.abs(g.k - 1.0) >= 0.5] == 0)
    assert np.max(np.abs(b)) == pytest.approx(1.0, abs=1e-3)


def test_exclusions_follow_resonance_and_velocity(g):
    assert domain_exclusions(scalar_config([ScalarPotentialSpec.poschl_teller(1)], [0.0], [0.0]), g) == []
    ex = domain_exclusions(scalar_config([ScalarPotentialSpec.gaussian(-1.5)], [0.6], [0.0]), g)
    assert ex == [(pytest.approx(0.3), 0.3)]


@pytest.mark.parametrize("v", [0.0, 0.6])
def test_single_center_S_is_an_exact_solution(g, v):
    cfg = scalar_config([ScalarPotentialSpec.gaussian(-1.5)], [v], [0.0])
    phi = bump_profile(g, 1.3, 0.5) + bump_profile(g, -1.5, 0.5, 2.0, 0.3j)
    prof = build_profile_sequence(phi, cfg, g)
    S0 = evaluate_S(prof, cfg, 0.0, g)
    S3 = evaluate_S(prof, cfg, 3.0, g)
    tr = propagate(cfg, S0, 3.0, 0.0025, g, n_samples=2)
    assert lp_norm(tr.at(-1) - S3, g) / lp_norm(S3, g) < 1e-5


@pytest.mark.parametrize("v", [0.0, 0.6])
def test_single_center_roundtrip(g, v):
    cfg = scalar_config([ScalarPotentialSpec.gaussian(-1.5)], [v], [0.0])
    phi = bump_profile(g, 1.3, 0.5) + bump_profile(g, -1.5, 0.5, 2.0, 0.3j)
    S0 = evaluate_S(build_profile_sequence(phi, cfg, g), cfg, 0.0, g)
    dec = decompose(S0, cfg, g)
    assert dec.residual < 1e-10
    assert np.linalg.norm(dec.profile.input[0] - phi) / np.linalg.norm(phi) < 1e-8
    assert np.max(np.abs(dec.coefficients)) < 1e-6


def test_pure_mode_decomposes_to_its_weight(g):
    cfg = scalar_config([ScalarPotentialSpec.poschl_teller(1), ScalarPotentialSpec.gaussian(-1.0)],
                        [0.5, -0.5], [10.0, -10.0])
    r = mode_catalog(cfg)[0]
    f = (0.7 - 0.2j) * mode_field(cfg, r, 0.0, g)
    dec = decompose(f, cfg, g)
    assert dec.coefficient(1, 0) == pytest.approx(0.7 - 0.2j, abs=1e-8)
    assert np.max(np.abs(reconstruct(dec, cfg, g) - f)) < 1e-8


def test_close_centers_refused(g):
    p = ScalarPotentialSpec.gaussian(-1.0)
    cfg = scalar_config([p, p], [0.5, -0.5], [3.0, -3.0])
    with pytest.raises(ConfigError):
        decompose(np.zeros(g.n, complex), cfg, g)


def test_profile_csv(tmp_path, g):
    cfg = scalar_config([ScalarPotentialSpec.gaussian(-1.5)], [0.0], [0.0])
    prof = build_profile_sequence(bump_profile(g, 1.0, 0.5), cfg, g)
    prof.to_csv(tmp_path / "phi.csv")
    assert (tmp_path / "phi.csv").read_text().splitlines()[0] == "k,re_phi1,im_phi1"


@pytest.mark.slow
def test_coercivity_and_norm_comparability(g):
    cfg = scalar_config([ScalarPotentialSpec.gaussian(-1.5), ScalarPotentialSpec.gaussian(-1.0)],
                        [0.5, -0.5], [10.0, -10.0])
    rep = coercivity_report(cfg, g, n_samples=5, seed=1)
    for n in ("H0", "H1", "H2"):
        assert np.isfinite(rep[n]["spread"]) and rep[n]["min"] > 0
    phi = bump_profile(g, 1.3, 0.5)
    nc = norm_comparability(build_profile_sequence(phi, cfg, g), cfg, g, [0.0, 5.0, 10.0])
    assert 1.0 <= nc["C"] < 2.0
