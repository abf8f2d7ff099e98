import os
import subprocess
import sys

import numpy as np
from scipy.linalg import expm

from ctmkit import _kernels


def test_backend_reports_choice():
    assert _kernels.backend() in ("numba", "numpy")


def test_expm2_matches_dense_exponential():
    rng = np.random.default_rng(3)
    n = 16
    a = rng.normal(size=n)
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    c = rng.normal(size=n) + 1j * rng.normal(size=n)
    a[0], b[0], c[0] = 0.0, 0.0, 0.0  # nilpotent branch
    p1 = rng.normal(size=n) + 1j * rng.normal(size=n)
    p2 = rng.normal(size=n) + 1j * rng.normal(size=n)
    h = 0.3
    o1, o2 = _kernels.expm2_apply(p1, p2, a.astype(complex), b, c, h)
    for j in range(n):
        E = expm(-1j * h * np.array([[a[j], b[j]], [c[j], -a[j]]]))
        ref = E @ np.array([p1[j], p2[j]])
        assert abs(o1[j] - ref[0]) < 1e-13 and abs(o2[j] - ref[1]) < 1e-13


def test_compiled_and_numpy_paths_agree():
    rng = np.random.default_rng(4)
    n = 64
    a = rng.normal(size=n).astype(complex)
    b, c = rng.normal(size=n) + 0j, rng.normal(size=n) + 0j
    p1, p2 = rng.normal(size=n) + 0j, rng.normal(size=n) + 0j
    x = _kernels.expm2_apply(p1, p2, a, b, c, 0.1)
    y = _kernels.numpy_impl["expm2_apply"](p1, p2, a, b, c, 0.1)
    assert np.max(np.abs(np.asarray(x) - np.asarray(y))) < 1e-13
    q = np.array([3.0, 1.0, -0.5, -2.0])
    kg = np.linspace(-5, 5, 2001)
    s1, _ = _kernels.product_scan(q, kg)
    s2, _ = _kernels.numpy_impl["product_scan"](q, kg)
    assert abs(s1 - s2) < 1e-14 * s2


def test_disable_switch_changes_backend_not_results():
    code = ("import numpy as np; from ctmkit import _kernels; from ctmkit.spectral import scalar_rs;"
            "from ctmkit.potentials import ScalarPotentialSpec as P;"
            "r, s = scalar_rs(P.gaussian(-1.5), np.array([0.3, 1.0, 4.0]));"
            "print(_kernels.backend(), repr(s.tolist()))")
    env = dict(os.environ, CTM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout
    name, vals = out.split(" ", 1)
    assert name == "numpy"
    from ctmkit.potentials import ScalarPotentialSpec
    from ctmkit.spectral import scalar_rs
    _, s = scalar_rs(ScalarPotentialSpec.gaussian(-1.5), np.array([0.3, 1.0, 4.0]))
    assert np.max(np.abs(np.array(eval(vals)) - s)) < 1e-12
