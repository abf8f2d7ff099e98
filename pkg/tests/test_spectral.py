import numpy as np
import pytest

from ctmkit.errors import NumericalError
from ctmkit.potentials import MatrixPotentialSpec, ScalarPotentialSpec
from ctmkit.spectral import (born_reflection, detect_threshold_resonance, discrete_spectrum, jost_solutions,
                             matrix_rs, scattering_coefficients)

K = np.concatenate([-np.geomspace(20, 1e-3, 40), np.geomspace(1e-3, 20, 40)])


def pt_transmission(n, k):
    # reflectionless well -n(n+1) sech^2: s(k) = prod_j (k + i j) / (k - i j)
    out = np.ones_like(k, dtype=complex)
    for j in range(1, n + 1):
        out *= (k + 1j * j) / (k - 1j * j)
    return out


@pytest.mark.parametrize("n", [1, 2])
def test_poschl_teller_closed_form(n):
    d = scattering_coefficients(ScalarPotentialSpec.poschl_teller(n), K)
    assert np.max(np.abs(d.r)) < 1e-8
    assert np.max(np.abs(d.s - pt_transmission(n, K))) < 1e-8


@pytest.mark.parametrize("pot", [ScalarPotentialSpec.gaussian(-1.5), ScalarPotentialSpec.gaussian(2.0, 0.7),
                                 ScalarPotentialSpec.sech_square(-1.3, 0.8)])
def test_unitarity(pot):
    d = scattering_coefficients(pot, K)
    assert d.unitarity_error < 1e-8
    # even potential: s(-k) = conj s(k)
    assert np.max(np.abs(d.s[:40][::-1] - np.conj(d.s[40:]))) < 1e-10


def test_born_limit_for_weak_gaussian():
    a, k = 0.02, 1.0
    d = scattering_coefficients(ScalarPotentialSpec.gaussian(a), [k])
    born = abs(a) * np.sqrt(2 * np.pi) * np.exp(-2 * k**2) / (2 * k)
    assert abs(d.r[0]) == pytest.approx(born, rel=0.05)
    assert abs(born_reflection(ScalarPotentialSpec.gaussian(a), k)) == pytest.approx(born, rel=1e-6)


def test_jost_solution_is_plane_wave_outside():
    k = np.array([0.7])
    pot = ScalarPotentialSpec.gaussian(-1.0)
    X = pot.x_max
    x = np.linspace(-X, X, 2001)
    js = jost_solutions(pot, k, x)
    right, left = x > X - 1, x < -X + 1
    assert np.max(np.abs(js.fp[0, right] - np.exp(0.7j * x[right]))) < 1e-10
    assert np.max(np.abs(js.fm[0, left] - np.exp(-0.7j * x[left]))) < 1e-10
    # the Wronskian of two solutions does not depend on x
    w = js.fp[0] * js.dfm[0] - js.dfp[0] * js.fm[0]
    assert np.max(np.abs(w - w[0])) < 1e-9 * abs(w[0])


@pytest.mark.parametrize("n, expected", [(1, [-1.0]), (2, [-4.0, -1.0]), (3, [-9.0, -4.0, -1.0])])
def test_poschl_teller_eigenvalues(n, expected):
    lam = np.sort(discrete_spectrum(ScalarPotentialSpec.poschl_teller(n)).eigenvalues.real)
    assert np.max(np.abs(lam - expected)) < 1e-8


def test_slow_well_eigenvalues():
    r = 0.25
    lam = np.sort(discrete_spectrum(ScalarPotentialSpec.sech_square(-6 * r**2, r), dx=0.2, n=1024).eigenvalues.real)
    assert np.max(np.abs(lam - np.array([-4 * r**2, -r**2]))) < 1e-7


def test_bound_state_shape():
    st = discrete_spectrum(ScalarPotentialSpec.poschl_teller(1)).states[0]
    x = np.linspace(-8, 8, 161)
    Z = st.evaluate(x)
    Z = Z * np.sign(Z[80].real)
    assert np.max(np.abs(Z - 1 / (np.sqrt(2) * np.cosh(x)))) < 1e-8


def test_resonance_detection():
    assert detect_threshold_resonance(ScalarPotentialSpec.poschl_teller(1)).resonant
    assert detect_threshold_resonance(ScalarPotentialSpec.zero()).resonant
    rep = detect_threshold_resonance(ScalarPotentialSpec.gaussian(-1.5))
    assert not rep.resonant and rep.wronskian > 0.1


def test_unitarity_guard():
    with pytest.raises(NumericalError):
        scattering_coefficients(ScalarPotentialSpec.gaussian(-1.5), K, tol=0.0)


def nls_linearization():
    return MatrixPotentialSpec(ScalarPotentialSpec.sech_square(-4.0, 1.0), ScalarPotentialSpec.sech_square(2.0, 1.0), 1.0)


def test_nls_matrix_spectrum_counts():
    sp = discrete_spectrum(nls_linearization())
    c = sp.counts
    assert (c["K1"], c["K2"], c["ordinary"]) == (2, 4, 0)
    assert sp.symmetric


def test_nls_matrix_reflectionless():
    r, s = matrix_rs(nls_linearization(), np.array([0.5, 1.0, 2.0]))
    assert np.max(np.abs(r)) < 1e-6
    assert np.max(np.abs(np.abs(s) - 1)) < 1e-6
