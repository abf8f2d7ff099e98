import numpy as np
import pytest

from ctmkit.core_grid import (SpatialGrid, default_grid, dft, idft, k_norm, localization_windows, lp_norm,
                              weighted_norm, window_boundaries)
from ctmkit.errors import ConfigError


def test_grid_shape_and_spacing():
    g = default_grid(1024, 10.0)
    assert g.x.size == g.k.size == 1024
    assert g.dx == pytest.approx(20.0 / 1024)
    assert g.dk == pytest.approx(2 * np.pi / 20.0)
    assert g.k[g.n // 2] == 0.0


def test_non_power_of_two_rejected():
    with pytest.raises(ConfigError):
        SpatialGrid(-1.0, 1.0, 1000)
    with pytest.raises(ConfigError):
        SpatialGrid(1.0, -1.0, 64)


def test_dft_of_gaussian_matches_closed_form():
    g = default_grid(1024, 20.0)
    fh = dft(np.exp(-g.x**2 / 2), g)
    assert np.max(np.abs(fh - np.exp(-g.k**2 / 2))) < 1e-12


def test_dft_roundtrip_and_plancherel():
    g = default_grid(512, 15.0)
    rng = np.random.default_rng(1)
    f = np.exp(-g.x**2 / 4) * (rng.normal() + 1j * g.x)
    fh = dft(f, g)
    assert np.max(np.abs(idft(fh, g) - f)) < 1e-13
    assert k_norm(fh, g) == pytest.approx(lp_norm(f, g), rel=1e-12)


def test_lp_norms_of_gaussian():
    g = default_grid(2048, 20.0)
    f = np.exp(-g.x**2 / 2)
    assert lp_norm(f, g, 1) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
    assert lp_norm(f, g, 2) == pytest.approx(np.pi**0.25, rel=1e-12)
    assert lp_norm(f, g, np.inf) == pytest.approx(1.0)


def test_weighted_norm_moves_with_center():
    g = default_grid(2048, 40.0)
    f = np.exp(-(g.x - 3.0) ** 2)
    a = weighted_norm(f, g, center=1.0, velocity=1.0, t=2.0, exponent=2.0)
    b = weighted_norm(np.exp(-g.x**2), g, exponent=2.0)
    assert a == pytest.approx(b, rel=1e-10)
    with pytest.raises(ConfigError):
        weighted_norm(f, g, p=3)


def test_windows_partition_unity():
    g = default_grid(1024, 50.0)
    b = window_boundaries([10.0, 0.0, -10.0], [1.0, 0.0, -1.0], 2.0)
    assert np.allclose(b, [5.0 + 1.0, -5.0 - 1.0])
    chi = localization_windows([10.0, 0.0, -10.0], [1.0, 0.0, -1.0], 2.0, g)
    assert np.all(chi.sum(axis=0) == 1)
    with pytest.raises(ConfigError):
        window_boundaries([0.0, 1.0], [1.0, 0.0], 0.0)
