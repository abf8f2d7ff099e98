import json

import numpy as np
import pytest

from ctmkit.core_grid import default_grid, lp_norm
from ctmkit.dispersive_map import mode_catalog, mode_field
from ctmkit.errors import ConfigError, NumericalError
from ctmkit.evolution import (check_dt, construct_wave_solution, derivative4, fit_exponential,
                              generalized_mode_check, mode_coefficients, mode_generator, pairing, propagate)
from ctmkit.potentials import MatrixPotentialSpec, ScalarPotentialSpec, matrix_config, scalar_config


@pytest.fixture(scope="module")
def g():
    return default_grid()


def free_gaussian(x, t):
    # exact solution of i u_t = -u_xx with u(0) = exp(-x^2/2)
    z = 1 + 2j * t
    return np.exp(-x**2 / (2 * z)) / np.sqrt(z)


def test_free_flow_is_exact(g):
    cfg = scalar_config([ScalarPotentialSpec.zero()], [0.0], [0.0])
    tr = propagate(cfg, free_gaussian(g.x, 0.0), 3.0, 0.5, g, n_samples=4)
    for i, t in enumerate(tr.times):
        assert np.max(np.abs(tr.at(i) - free_gaussian(g.x, t))) < 1e-12


def test_static_bound_state_phase(g):
    cfg = scalar_config([ScalarPotentialSpec.poschl_teller(1)], [0.0], [0.0])
    Z = 1 / (np.sqrt(2) * np.cosh(g.x))
    tr = propagate(cfg, Z, 2.0, 0.0025, g, n_samples=3)
    # lam = -1, so psi(t) = Z e^{it}
    assert lp_norm(tr.at(-1) - Z * np.exp(2j), g) < 1e-5


def test_moving_bound_state_is_boosted(g):
    v = 0.5
    cfg = scalar_config([ScalarPotentialSpec.poschl_teller(1)], [v], [0.0])
    Z = lambda x: 1 / (np.sqrt(2) * np.cosh(x))
    t = 2.0
    exact = Z(g.x - v * t) * np.exp(1j * (v * g.x / 2 - v**2 * t / 4)) * np.exp(1j * t)
    tr = propagate(cfg, Z(g.x) * np.exp(1j * v * g.x / 2), t, 0.0025, g, n_samples=2)
    assert lp_norm(tr.at(-1) - exact, g) < 1e-5


def test_scalar_flow_is_unitary_and_reversible(g):
    cfg = scalar_config([ScalarPotentialSpec.gaussian(-1.5), ScalarPotentialSpec.poschl_teller(1)],
                        [0.5, -0.5], [8.0, -8.0])
    psi0 = np.exp(-(g.x - 2) ** 2) * np.exp(0.7j * g.x)
    fwd = propagate(cfg, psi0, 4.0, 0.01, g, n_samples=5)
    assert fwd.diagnostics["norm_drift_max"] < 1e-12
    back = propagate(cfg, fwd.at(-1), 0.0, 0.01, g, t0=4.0, n_samples=2)
    assert lp_norm(back.at(-1) - psi0, g) < 1e-10


def test_second_order_convergence(g):
    cfg = scalar_config([ScalarPotentialSpec.gaussian(-1.5)], [0.5], [0.0])
    psi0 = np.exp(-g.x**2) * np.exp(1j * g.x)
    ref = propagate(cfg, psi0, 1.0, 0.0025, g, n_samples=2).at(-1)
    e1 = lp_norm(propagate(cfg, psi0, 1.0, 0.04, g, n_samples=2).at(-1) - ref, g)
    e2 = lp_norm(propagate(cfg, psi0, 1.0, 0.02, g, n_samples=2).at(-1) - ref, g)
    assert np.log2(e1 / e2) == pytest.approx(2.0, abs=0.15)


def test_dt_guard(g):
    cfg = scalar_config([ScalarPotentialSpec.poschl_teller(1)], [0.0], [0.0])
    with pytest.raises(NumericalError):
        check_dt(cfg, 1.0, g)
    with pytest.raises(NumericalError):
        propagate(cfg, np.exp(-g.x**2), 2.0, 1.0, g)
    with pytest.raises(ConfigError):
        propagate(cfg, np.exp(-g.x**2), 2.0, 0.0, g)


def test_mode_coefficient_follows_eigenvalue(g):
    cfg = scalar_config([ScalarPotentialSpec.poschl_teller(1), ScalarPotentialSpec.poschl_teller(2)],
                        [0.5, -0.5], [10.0, -10.0])
    refs = mode_catalog(cfg)
    psi0 = sum(w * mode_field(cfg, r, 0.0, g) for w, r in zip([1.0, 0.5j, -0.3], refs))
    t = 2.0
    tr = propagate(cfg, psi0, t, 0.0025, g, n_samples=2)
    mc = mode_coefficients(tr.at(-1), t, cfg, g)
    for w, r, a in zip([1.0, 0.5j, -0.3], refs, mc.a):
        assert abs(a - w * np.exp(-1j * r.lam * t)) < 2e-5
    assert mc.gram_condition < 10


def test_time_step_writes_reproducible_csv(tmp_path, g):
    cfg = scalar_config([ScalarPotentialSpec.gaussian(-1.0)], [0.0], [0.0])
    tr = propagate(cfg, np.exp(-g.x**2), 0.5, 0.01, g, n_samples=3)
    a, b = tr.to_csv(tmp_path / "a"), tr.to_csv(tmp_path / "b")
    for name in ("psi_0000.csv", "psi_0002.csv", "meta.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    meta = json.loads((a / "meta.json").read_text())
    assert meta["config_hash"] == cfg.digest() and meta["times"] == [0.0, 0.25, 0.5]
    head = (a / "psi_0000.csv").read_text().splitlines()[0]
    assert head == "x,re_psi1,im_psi1,re_psi2,im_psi2"


def test_fit_exponential_recovers_rate():
    t = np.linspace(0, 10, 21)
    f = fit_exponential(t, 3.0 * np.exp(-0.7 * t))
    assert f.beta == pytest.approx(0.7) and f.A == pytest.approx(3.0) and f.r2 == pytest.approx(1.0)
    assert f.beta_ci[0] <= 0.7 <= f.beta_ci[1]


def test_derivative4_order():
    errs = []
    for h in (0.1, 0.05):
        t = np.arange(0, 3, h)
        d = derivative4(np.sin(t), h)
        assert np.all(np.isnan(d[:2])) and np.all(np.isnan(d[-2:]))
        errs.append(np.max(np.abs(d[2:-2] - np.cos(t[2:-2]))))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.3)


def nls():
    return MatrixPotentialSpec(ScalarPotentialSpec.sech_square(-4.0, 1.0), ScalarPotentialSpec.sech_square(2.0, 1.0), 1.0)


@pytest.fixture(scope="module")
def nls_single():
    return matrix_config([nls()], [0.0], [0.0])


def test_sigma3_pairing_sign(g):
    f = np.stack([np.exp(-g.x**2), np.exp(-g.x**2)])
    assert abs(pairing(f, f, g)) < 1e-14
    h = np.stack([np.exp(-g.x**2), np.zeros(g.n)])
    assert pairing(h, h, g).real == pytest.approx(np.sqrt(np.pi / 2))


def test_jordan_generator(g, nls_single):
    refs = mode_catalog(nls_single)
    Lam = mode_generator(nls_single, refs, g)
    gens = [j for j, r in enumerate(refs) if r.kind == "generalized"]
    assert gens
    # every generalized vector is mapped onto the kernel, and the kernel to 0
    kers = [j for j, r in enumerate(refs) if r.kind == "kernel"]
    assert np.max(np.abs(Lam[:, kers])) < 1e-6
    for j in gens:
        assert np.max(np.abs(Lam[gens, j])) < 1e-6 and np.max(np.abs(Lam[kers, j])) > 0.1


@pytest.mark.slow
def test_generalized_kernel_grows_linearly(g, nls_single):
    gen = [r for r in mode_catalog(nls_single) if r.kind == "generalized"][0]
    tr = propagate(nls_single, mode_field(nls_single, gen, 0.0, g), 4.0, 0.005, g, n_samples=9)
    chk = generalized_mode_check(tr, index=gen.index)
    assert chk["slope"] == pytest.approx(1.0, abs=0.02) and chk["r2"] > 0.999


def test_kernel_vector_is_stationary(g, nls_single):
    ker = [r for r in mode_catalog(nls_single) if r.kind == "kernel"][0]
    Z = mode_field(nls_single, ker, 0.0, g)
    tr = propagate(nls_single, Z, 2.0, 0.005, g, n_samples=2)
    # lam = 0: only the co-moving phase changes
    Zt = mode_field(nls_single, ker, 2.0, g)
    assert lp_norm(tr.at(-1) - Zt, g) / lp_norm(Z, g) < 1e-3


def test_wave_solution_requires_separation(g):
    cfg = scalar_config([ScalarPotentialSpec.gaussian(-1.0), ScalarPotentialSpec.gaussian(-1.0)],
                        [0.1, -0.1], [5.0, -5.0])
    with pytest.raises(ConfigError):
        construct_wave_solution(np.zeros(g.n, complex), cfg, 10.0, g)
