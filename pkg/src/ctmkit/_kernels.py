"""Hot loops with a compiled (numba) path and a pure-numpy fallback.

Set ``CTM_DISABLE_NUMBA=1`` to force the numpy implementations.  Both paths
return identical results up to floating point reassociation; the benchmark in
``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("CTM_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes")

try:  # pragma: no cover - exercised implicitly
    if _DISABLE:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# panel-wise Picard sweep for y'' + k^2 y = V y

def _volterra_sweep_np(vpan, kern, chom, shom, dcos, ce, se, kse, y0, dy0, tol, maxit, store):
    nk, npts = chom.shape
    npan = vpan.shape[0]
    Y = np.empty((nk, npan + 1), dtype=np.complex128)
    DY = np.empty((nk, npan + 1), dtype=np.complex128)
    NODES = np.empty((nk, npan, npts) if store else (1, 1, 1), dtype=np.complex128)
    Y[:, 0] = y0
    DY[:, 0] = dy0
    ya = y0.astype(np.complex128).copy()
    dya = dy0.astype(np.complex128).copy()
    worst = 0
    for p in range(npan):
        vj = vpan[p]
        K = kern * vj[None, None, :]
        yh = ya[:, None] * chom + dya[:, None] * shom
        y = yh.copy()
        it = 0
        while True:
            it += 1
            ynew = yh + np.einsum("kij,kj->ki", K, y)
            upd = np.max(np.abs(ynew - y))
            scale = max(np.max(np.abs(ynew)), 1e-300)
            y = ynew
            if upd <= tol * scale:
                break
            if it >= maxit:
                return Y, DY, NODES, it, p
        worst = max(worst, it)
        if store:
            NODES[:, p, :] = y
        yb = y[:, -1]
        dyb = kse * ya + ce * dya + np.einsum("kj,kj->k", dcos * vj[None, :], y)
        ya, dya = yb, dyb
        Y[:, p + 1] = ya
        DY[:, p + 1] = dya
    return Y, DY, NODES, worst, -1


def _volterra_sweep_nb(vpan, kern, chom, shom, dcos, ce, se, kse, y0, dy0, tol, maxit, store):
    nk, npts = chom.shape
    npan = vpan.shape[0]
    Y = np.empty((nk, npan + 1), dtype=np.complex128)
    DY = np.empty((nk, npan + 1), dtype=np.complex128)
    if store:
        NODES = np.empty((nk, npan, npts), dtype=np.complex128)
    else:
        NODES = np.empty((1, 1, 1), dtype=np.complex128)
    worst = 0
    yh = np.empty(npts, dtype=np.complex128)
    y = np.empty(npts, dtype=np.complex128)
    ynew = np.empty(npts, dtype=np.complex128)
    for q in range(nk):
        ya = complex(y0[q])
        dya = complex(dy0[q])
        Y[q, 0] = ya
        DY[q, 0] = dya
        for p in range(npan):
            for i in range(npts):
                yh[i] = ya * chom[q, i] + dya * shom[q, i]
                y[i] = yh[i]
            it = 0
            while True:
                it += 1
                upd = 0.0
                scale = 1e-300
                for i in range(npts):
                    acc = yh[i]
                    for j in range(npts):
                        acc += kern[q, i, j] * vpan[p, j] * y[j]
                    ynew[i] = acc
                    d = abs(acc - y[i])
                    if d > upd:
                        upd = d
                    a = abs(acc)
                    if a > scale:
                        scale = a
                for i in range(npts):
                    y[i] = ynew[i]
                if upd <= tol * scale:
                    break
                if it >= maxit:
                    return Y, DY, NODES, it, p
            if it > worst:
                worst = it
            if store:
                for i in range(npts):
                    NODES[q, p, i] = y[i]
            acc = kse[q] * ya + ce[q] * dya
            for j in range(npts):
                acc += dcos[q, j] * vpan[p, j] * y[j]
            ya = y[npts - 1]
            dya = acc
            Y[q, p + 1] = ya
            DY[q, p + 1] = dya
    return Y, DY, NODES, worst, -1


# ---------------------------------------------------------------------------
# pointwise exp(-i dt M) for traceless M = [[a, b], [c, -a]]

def _expm2_apply_np(psi1, psi2, a, b, c, dt):
    mu = np.sqrt((a * a + b * c).astype(np.complex128))
    cs = np.cos(dt * mu)
    small = np.abs(mu) < 1e-8
    safe = np.where(small, 1.0, mu)
    sn = np.where(small, dt * (1.0 - (dt * mu) ** 2 / 6.0), np.sin(dt * mu) / safe)
    o1 = (cs - 1j * sn * a) * psi1 - 1j * sn * b * psi2
    o2 = -1j * sn * c * psi1 + (cs + 1j * sn * a) * psi2
    return o1, o2


def _expm2_apply_nb(psi1, psi2, a, b, c, dt):
    n = psi1.shape[0]
    o1 = np.empty(n, dtype=np.complex128)
    o2 = np.empty(n, dtype=np.complex128)
    for i in range(n):
        ai = complex(a[i])
        mu = np.sqrt(ai * ai + complex(b[i]) * complex(c[i]))
        cs = np.cos(dt * mu)
        if abs(mu) < 1e-8:
            sn = dt * (1.0 - (dt * mu) ** 2 / 6.0)
        else:
            sn = np.sin(dt * mu) / mu
        o1[i] = (cs - 1j * sn * ai) * psi1[i] - 1j * sn * b[i] * psi2[i]
        o2[i] = -1j * sn * c[i] * psi1[i] + (cs + 1j * sn * ai) * psi2[i]
    return o1, o2


# ---------------------------------------------------------------------------
# sup over a k-grid of prod_j 1/(1+|k+q_j|)

def _product_scan_np(q, kgrid):
    logp = -np.log1p(np.abs(kgrid[:, None] + q[None, :])).sum(axis=1)
    i = int(np.argmax(logp))
    return np.exp(logp[i]), kgrid[i]


def _product_scan_nb(q, kgrid):
    best = -np.inf
    arg = 0.0
    for i in range(kgrid.shape[0]):
        s = 0.0
        for j in range(q.shape[0]):
            s -= np.log1p(abs(kgrid[i] + q[j]))
        if s > best:
            best = s
            arg = kgrid[i]
    return np.exp(best), arg


if HAVE_NUMBA:
    volterra_sweep = njit(cache=True)(_volterra_sweep_nb)
    expm2_apply = njit(cache=True)(_expm2_apply_nb)
    product_scan = njit(cache=True)(_product_scan_nb)
else:
    volterra_sweep = _volterra_sweep_np
    expm2_apply = _expm2_apply_np
    product_scan = _product_scan_np

# always reachable for cross-checks and the benchmark
numpy_impl = {
    "volterra_sweep": _volterra_sweep_np,
    "expm2_apply": _expm2_apply_np,
    "product_scan": _product_scan_np,
}
