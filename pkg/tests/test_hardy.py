import numpy as np
import pytest

from ctmkit.core_grid import SpatialGrid, lp_norm
from ctmkit.hardy import decay_fit, interaction_norm, p_minus, p_plus


@pytest.fixture(scope="module")
def line():
    return SpatialGrid(-32.0, 32.0, 4096)


def test_projections_split_identity(line):
    rng = np.random.default_rng(0)
    f = np.exp(-line.x**2) * (rng.normal() + 1j * np.sin(3 * line.x))
    assert np.max(np.abs(p_plus(f, line) + p_minus(f, line) - f)) < 1e-14
    pf = p_plus(f, line)
    assert np.max(np.abs(p_plus(pf, line) - pf)) < 1e-14
    assert np.max(np.abs(p_minus(pf, line))) < 1e-14


def test_cauchy_kernel_is_in_the_plus_space(line):
    # (x + i)^-2 extends analytically to the upper half-plane, (x - i)^-2 to the lower
    f = 1.0 / (line.x + 1j) ** 2
    assert lp_norm(p_minus(f, line), line) / lp_norm(f, line) < 0.01  # finite-box truncation of the tail
    g = np.conj(f)
    assert lp_norm(p_plus(g, line), line) / lp_norm(g, line) < 0.01


def test_interaction_vanishes_without_coefficient(line):
    f = p_plus(np.exp(-line.x**2) * np.exp(2j * line.x), line)
    # a shift by a whole number of box frequencies keeps the spectrum positive
    y0 = 100 * 2 * np.pi / line.length
    assert interaction_norm(y0, lambda k: np.ones_like(k), 0.0, f, line) < 1e-12


def test_interaction_decays_with_distance(line):
    f = p_plus(np.exp(-line.x**2 / 2) * np.exp(1j * line.x), line)
    coeff = lambda k: 1.0 / (k + 2j)  # pole in the lower half-plane
    norms = [interaction_norm(y, coeff, 0.0, f, line) for y in (5.0, 10.0, 20.0)]
    assert norms[0] > norms[1] > norms[2]
    slope, _, r2 = decay_fit([5.0, 10.0, 20.0], norms)
    assert slope < 0 and r2 > 0.9


def test_interaction_rejects_bad_input(line):
    f = np.zeros(line.n, complex)
    with pytest.raises(ValueError):
        interaction_norm(-1.0, np.ones_like, 0.0, f, line)
    with pytest.raises(ValueError):
        interaction_norm(1.0, np.ones_like, 0.0, f, line, sign="*")


def test_decay_fit_exact_line():
    y = np.array([1.0, 2.0, 4.0])
    slope, icpt, r2 = decay_fit(y, 3.0 * np.exp(-0.5 * y))
    assert slope == pytest.approx(-0.5) and icpt == pytest.approx(np.log(3.0)) and r2 == pytest.approx(1.0)
