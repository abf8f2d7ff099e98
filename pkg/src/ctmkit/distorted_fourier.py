"""Distorted Fourier transforms for single centers placed anywhere on a grid.

A transform kernel K(xi, k) (xi = x - center) is stored as a dense table on the
grid points with |xi| <= X, where the potential is not negligible, together
with its free continuation a e^{ik xi} + b e^{-ik xi} outside.  The outer
parts are summed with one FFT each, so a synthesis or analysis costs
O(n_k n_inner + n log n).

Kernel conventions, with f_+, f_- the Jost solutions and k a signed band node:

    scalar  syn   f_-(xi, -k) / sqrt(2 pi)          (left-normalized waves)
            ana   s(-k) f_+(xi, -k) / sqrt(2 pi)    (its left inverse)
            eig   e(xi, k) = s(|k|) [f_+(xi, k) or f_-(xi, |k|)] / sqrt(2 pi)
    matrix  Fstar F(xi, -k),  Gstar G(xi, -k) = F(-xi, -k),
            Ghat  F(-xi, -k) / s(-k),  Fhat  F(xi, -k) / s(-k)   (all / sqrt(2 pi))

The k = 0 node takes the symmetric limit of the two sides (the e family uses
the k -> 0+ side, see ScalarBasis._build).
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .core_grid import SQRT2PI, SpatialGrid, dft, idft
from .errors import ConfigError, SingularDivisionError
from .potentials import MatrixPotentialSpec, ScalarPotentialSpec
from .spectral import (
    JostTable,
    MatrixEigenfunctions,
    _cheb_diff,
    jost_table,
    matrix_F,
    plane_wave_continuation,
    scalar_rs,
)

CACHE_VERSION = 2
DEFAULT_K_BAND = 6.0
S_FLOOR = 1e-6
_MATRIX_DELTA = 1e-5


@dataclass
class KernelFamily:
    """Kernel table on the inner lattice xi_i = xi0 + i dx plus outer plane waves."""

    k: np.ndarray
    xi0: float
    dx: float
    table: np.ndarray  # (nc, nk, ni)
    outer: np.ndarray  # (4, nk): a_R, b_R, a_L, b_L for component 0

    @property
    def ni(self) -> int:
        return self.table.shape[-1]

    @property
    def xi_right(self) -> float:
        return self.xi0 + (self.ni - 1) * self.dx


def _assemble(k, xi, vals, ders0) -> KernelFamily:
    aR, bR = plane_wave_continuation(k, xi[-1], vals[0, :, -1], ders0[:, -1])
    aL, bL = plane_wave_continuation(k, xi[0], vals[0, :, 0], ders0[:, 0])
    return KernelFamily(k, float(xi[0]), float(xi[1] - xi[0]), vals, np.stack([aR, bR, aL, bL]))


def _lattice(grid: SpatialGrid, c: float, X: float):
    u = (c - grid.x_min) / grid.dx
    base = int(np.floor(u))
    frac = u - base
    jlo = int(np.ceil(-X / grid.dx + frac))
    jhi = int(np.floor(X / grid.dx + frac))
    xi = (np.arange(jlo, jhi + 1) - frac) * grid.dx
    first = base + jlo
    if first < 0 or first + xi.size > grid.n:
        raise ConfigError(f"center {c:.4g} sits within {X:.3g} of the box edge; enlarge the grid")
    return frac, xi, first


class _Basis:
    """Shared machinery: band bookkeeping, family cache, synthesis and analysis."""

    ncomp = 1

    def __init__(self, grid: SpatialGrid, k_band: float):
        self.grid = grid
        kb = min(float(k_band), 0.95 * float(np.max(grid.k)))
        self.k_band = kb
        j = np.nonzero(np.abs(grid.k) <= kb + 1e-12)[0]
        self.band_idx = j
        self.k = grid.k[j]
        self.qi = np.rint(np.abs(self.k) / grid.dk).astype(int)
        self.q = grid.dk * np.arange(self.qi.max() + 1)
        # index of -k for every band node
        self.neg_idx = grid.n - j
        self._families: OrderedDict = OrderedDict()

    # subclasses provide: X, _build(name, xi) -> (vals (nc,nk,ni), ders0 (nk,ni))

    def family(self, name: str, c: float):
        frac, xi, first = _lattice(self.grid, c, self.X)
        key = (name, int(round(frac * 1e9)))
        fam = self._families.get(key)
        if fam is None:
            vals, ders0 = self._build(name, xi)
            fam = _assemble(self.k, xi, vals, ders0)
            self._families[key] = fam
            if len(self._families) > 64:
                self._families.popitem(last=False)
        else:
            self._families.move_to_end(key)
        return fam, first

    def band(self, g) -> np.ndarray:
        g = self.grid.check(np.asarray(g))
        return g[..., self.band_idx]

    def out_of_band(self, g) -> float:
        g = np.asarray(g)
        mask = np.ones(self.grid.n, bool)
        mask[self.band_idx] = False
        tot = np.sqrt(np.sum(np.abs(g) ** 2))
        return float(np.sqrt(np.sum(np.abs(g[..., mask]) ** 2)) / tot) if tot > 0 else 0.0

    def synthesize(self, name: str, g, c: float = 0.0) -> np.ndarray:
        """sum_k K(x - c, k) g(k) dk on the grid; returns (nc, n)."""
        grid = self.grid
        fam, first = self.family(name, c)
        gb = self.band(g).astype(complex)
        dk = grid.dk
        out = np.zeros((fam.table.shape[0], grid.n), complex)
        out[:, first:first + fam.ni] = np.einsum("cki,k->ci", fam.table, gb * dk)
        xi = grid.x - c
        k = self.k
        nz = k != 0
        for a, b, x0, mask in (
                (fam.outer[0], fam.outer[1], fam.xi_right, np.arange(grid.n) >= first + fam.ni),
                (fam.outer[2], fam.outer[3], fam.xi0, np.arange(grid.n) < first)):
            if not np.any(mask):
                continue
            arr = np.zeros(grid.n, complex)
            arr[self.band_idx[nz]] += (gb * a)[nz] * np.exp(-1j * k[nz] * (x0 + c))
            arr[self.neg_idx[nz]] += (gb * b)[nz] * np.exp(1j * k[nz] * (x0 + c))
            field = SQRT2PI * idft(arr, grid)
            if np.any(~nz):
                z = int(np.nonzero(~nz)[0][0])
                field = field + gb[z] * dk * (a[z] + b[z] * (xi - x0))
            out[0, mask] = field[mask]
        return out

    def analyze(self, name: str, u, c: float = 0.0) -> np.ndarray:
        """sum_x K(x - c, k) . u(x) dx for band k; returns an array over grid.k."""
        grid = self.grid
        fam, first = self.family(name, c)
        u = np.atleast_2d(np.asarray(u))
        if u.shape[0] != fam.table.shape[0]:
            raise ConfigError(f"expected {fam.table.shape[0]} components, got {u.shape[0]}")
        grid.check(u)
        coef = np.einsum("cki,ci->k", fam.table, u[:, first:first + fam.ni]) * grid.dx
        k = self.k
        nz = k != 0
        xi = grid.x - c
        idx = np.arange(grid.n)
        for a, b, x0, mask in ((fam.outer[0], fam.outer[1], fam.xi_right, idx >= first + fam.ni),
                               (fam.outer[2], fam.outer[3], fam.xi0, idx < first)):
            if not np.any(mask):
                continue
            um = np.where(mask, u[0], 0.0)
            F = SQRT2PI * dft(um, grid)  # sum u e^{-ikx} dx
            ph = np.exp(-1j * k * (x0 + c))
            coef[nz] += (a * ph * F[self.neg_idx])[nz] + (b * np.conj(ph) * F[self.band_idx])[nz]
            if np.any(~nz):
                z = int(np.nonzero(~nz)[0][0])
                coef[z] += np.sum(um * (a[z] + b[z] * (xi - x0))) * grid.dx
        out = np.zeros(grid.n, complex)
        out[self.band_idx] = coef
        return out


class ScalarBasis(_Basis):
    """Generalized eigenfunctions of -d^2 + V (even V) on a grid band."""

    def __init__(self, potential: ScalarPotentialSpec, grid: SpatialGrid, k_band: float = DEFAULT_K_BAND):
        super().__init__(grid, k_band)
        self.potential = potential
        self.X = potential.x_max
        self.jost = _cached_jost_table(potential, self.q)
        self.r_q, self.s_q = scalar_rs(potential, self.q)

    @property
    def s(self) -> np.ndarray:
        """s(k) on the band nodes."""
        return np.where(self.k >= 0, self.s_q[self.qi], np.conj(self.s_q[self.qi]))

    @property
    def r(self) -> np.ndarray:
        return np.where(self.k >= 0, self.r_q[self.qi], np.conj(self.r_q[self.qi]))

    def _build(self, name: str, xi: np.ndarray):
        fp, dfp = self.jost.plus(xi)
        fm, dfm = self.jost.minus(xi)
        qi = self.qi
        k = self.k[:, None]
        sq = self.s_q[qi][:, None]
        pos = k > 0
        zero = k == 0
        if name == "syn":
            v, d = fm[qi], dfm[qi]
            v, d = np.where(pos, np.conj(v), v), np.where(pos, np.conj(d), d)
        elif name == "ana":
            v, d = sq * fp[qi], sq * dfp[qi]
            v, d = np.where(pos, np.conj(v), v), np.where(pos, np.conj(d), d)
        elif name in ("eig", "eigc"):
            v = np.where(pos, sq * fp[qi], sq * fm[qi])
            d = np.where(pos, sq * dfp[qi], sq * dfm[qi])
            # at k = 0 both kernels take the k -> 0+ side: with e(-0) = +-e(+0) the
            # product g(k) e(x, k) is then the exact two-sided average
            v = np.where(zero, sq * fp[qi], v)
            d = np.where(zero, sq * dfp[qi], d)
            if name == "eigc":
                v, d = np.conj(v), np.conj(d)
        else:
            raise ConfigError(f"unknown scalar kernel family {name!r}")
        return (v / SQRT2PI)[None], d / SQRT2PI


class MatrixBasis(_Basis):
    """Generalized eigenfunctions F(x, k) of a matrix operator on a grid band."""

    ncomp = 2

    def __init__(self, mpot: MatrixPotentialSpec, grid: SpatialGrid, k_band: float = 3.0):
        super().__init__(grid, k_band)
        self.potential = mpot
        qq = self.q.copy()
        qq[0] = _MATRIX_DELTA
        self.ef = _cached_matrix_F(mpot, qq)
        self.X = self.ef.X
        self.r_q, self.s_q = self.ef.r, self.ef.s
        N = self.ef.nodes.size - 1
        _, D = _cheb_diff(N)
        self._dvals = np.einsum("ij,ckj->cki", D / self.X, self.ef.values)

    @property
    def s(self) -> np.ndarray:
        return np.where(self.k >= 0, self.s_q[self.qi], np.conj(self.s_q[self.qi]))

    def _F(self, xi):
        """F and dF/dx (component 0) at points xi inside [-X, X]: (2, nq, nx), (nq, nx)."""
        nodes = self.ef.nodes
        v = np.stack([BarycentricInterpolator(nodes, self.ef.values[c].T)(xi).T for c in range(2)])
        d0 = BarycentricInterpolator(nodes, self._dvals[0].T)(xi).T
        return v, d0

    def _build(self, name: str, xi: np.ndarray):
        if name in ("Fstar", "Fhat"):
            v, d = self._F(xi)
        elif name in ("Gstar", "Ghat"):
            v, d = self._F(-xi)
            d = -d
        else:
            raise ConfigError(f"unknown matrix kernel family {name!r}")
        qi = self.qi
        v, d = v[:, qi], d[qi]
        if name in ("Fhat", "Ghat"):
            sq = self.s_q[qi]
            if np.any(np.abs(sq) < S_FLOOR):
                raise SingularDivisionError("|s(k)| < 1e-6 on the band: threshold-resonance regime")
            v = v / sq[None, :, None]
            d = d / sq[:, None]
        k = self.k[:, None]
        v = np.where(k[None] > 0, np.conj(v), np.where(k[None] == 0, v.real + 0j, v))
        d = np.where(k > 0, np.conj(d), np.where(k == 0, d.real + 0j, d))
        return v / SQRT2PI, d / SQRT2PI


# ---------------------------------------------------------------------------
# caching of the expensive per-potential data

_MEMO: OrderedDict = OrderedDict()


def _cache_dir() -> Path | None:
    d = os.environ.get("CTM_CACHE_DIR")
    return Path(d) if d else None


def _digest(kind: str, potential, q: np.ndarray) -> str:
    payload = json.dumps({"kind": kind, "v": CACHE_VERSION, "pot": potential.to_dict(),
                          "q": [float(x) for x in (q.min(), q.max(), q.size)]}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def _memo_get(key):
    if key in _MEMO:
        _MEMO.move_to_end(key)
        return _MEMO[key]
    return None


def _memo_put(key, val):
    _MEMO[key] = val
    if len(_MEMO) > 32:
        _MEMO.popitem(last=False)


def _cached_jost_table(potential: ScalarPotentialSpec, q: np.ndarray) -> JostTable:
    key = _digest("jost", potential, q)
    hit = _memo_get(key)
    if hit is not None:
        return hit
    d = _cache_dir()
    path = d / f"jost-{key}.npz" if d else None
    if path is not None and path.exists():
        z = np.load(path)
        if int(z["version"]) == CACHE_VERSION:
            jt = JostTable(z["q"], float(z["X"]), float(z["h"]), z["t"], z["vals"], z["ders"])
            _memo_put(key, jt)
            return jt
    jt = jost_table(potential, q)
    if path is not None:
        d.mkdir(parents=True, exist_ok=True)
        np.savez(path, version=CACHE_VERSION, q=jt.q, X=jt.X, h=jt.h, t=jt.t, vals=jt.vals, ders=jt.ders)
    _memo_put(key, jt)
    return jt


def _cached_matrix_F(mpot: MatrixPotentialSpec, q: np.ndarray) -> MatrixEigenfunctions:
    key = _digest("matF", mpot, q)
    hit = _memo_get(key)
    if hit is not None:
        return hit
    d = _cache_dir()
    path = d / f"matF-{key}.npz" if d else None
    if path is not None and path.exists():
        z = np.load(path)
        if int(z["version"]) == CACHE_VERSION:
            ef = MatrixEigenfunctions(z["k"], float(z["X"]), z["nodes"], z["values"], z["s"], z["r"])
            _memo_put(key, ef)
            return ef
    # one collocation size for the whole band keeps the tables on common nodes
    ef = matrix_F(mpot, q)
    if path is not None:
        d.mkdir(parents=True, exist_ok=True)
        np.savez(path, version=CACHE_VERSION, k=ef.k, X=ef.X, nodes=ef.nodes, values=ef.values, s=ef.s, r=ef.r)
    _memo_put(key, ef)
    return ef


_BASES: OrderedDict = OrderedDict()


def get_basis(potential, grid: SpatialGrid, k_band: float | None = None):
    """Cached ScalarBasis / MatrixBasis for (potential, grid, band)."""
    if k_band is None:
        k_band = 3.0 if isinstance(potential, MatrixPotentialSpec) else DEFAULT_K_BAND
    key = (json.dumps(potential.to_dict(), sort_keys=True), json.dumps(grid.to_dict()), float(k_band))
    b = _BASES.get(key)
    if b is None:
        cls = MatrixBasis if isinstance(potential, MatrixPotentialSpec) else ScalarBasis
        b = cls(potential, grid, k_band)
        _BASES[key] = b
        if len(_BASES) > 16:
            _BASES.popitem(last=False)
    else:
        _BASES.move_to_end(key)
    return b


# ---------------------------------------------------------------------------
# public transforms

def scalar_expand(basis: ScalarBasis, f, center: float = 0.0) -> np.ndarray:
    """g(k) = <f, e(. - center, k)> on the band (zeros elsewhere)."""
    return basis.analyze("eigc", f, center)


def scalar_synthesize(basis: ScalarBasis, g, center: float = 0.0) -> np.ndarray:
    return basis.synthesize("eig", g, center)[0]


def scalar_G_tilde(basis: ScalarBasis, g, center: float = 0.0) -> np.ndarray:
    """int f_-(x - center, -k) g(k) dk / sqrt(2 pi)."""
    return basis.synthesize("syn", g, center)[0]


def scalar_G_tilde_inverse(basis: ScalarBasis, f, center: float = 0.0) -> np.ndarray:
    """Left inverse of ``scalar_G_tilde`` on the continuous subspace."""
    return basis.analyze("ana", f, center)


def _sigma1(u):
    u = np.asarray(u)
    return u[::-1]


def forward_F_star(basis: MatrixBasis, u, center: float = 0.0):
    u = np.asarray(u)
    return basis.analyze("Fstar", u, center), basis.analyze("Fstar", _sigma1(u), center)


def forward_G_star(basis: MatrixBasis, u, center: float = 0.0):
    u = np.asarray(u)
    return basis.analyze("Gstar", u, center), basis.analyze("Gstar", _sigma1(u), center)


def _check_support(basis: MatrixBasis, f):
    fb = np.abs(basis.band(f))
    if fb.size and fb.max() > 0:
        live = fb > 1e-14 * fb.max()
        if np.any(np.abs(basis.s[live]) < S_FLOOR):
            raise SingularDivisionError("|s(k)| < 1e-6 on the support of the input")


def synth_G_hat(basis: MatrixBasis, f1, f2, center: float = 0.0) -> np.ndarray:
    _check_support(basis, f1)
    _check_support(basis, f2)
    return basis.synthesize("Ghat", f1, center) + _sigma1(basis.synthesize("Ghat", f2, center))


def synth_F_hat(basis: MatrixBasis, f1, f2, center: float = 0.0) -> np.ndarray:
    _check_support(basis, f1)
    _check_support(basis, f2)
    return basis.synthesize("Fhat", f1, center) + _sigma1(basis.synthesize("Fhat", f2, center))


def flat_evolution(basis, coeffs, t: float, center: float = 0.0) -> np.ndarray:
    """Continuous-spectrum part of e^{-itH} expressed through its coefficients.

    Scalar: ``coeffs`` = g from ``scalar_expand``.  Matrix: ``coeffs`` = (f1, f2)
    for ``synth_G_hat``; the pair is multiplied by e^{-it(k^2+w) sigma_3}.
    """
    k2 = basis.grid.k ** 2
    if isinstance(basis, MatrixBasis):
        w = basis.potential.omega
        f1, f2 = coeffs
        return synth_G_hat(basis, np.exp(-1j * t * (k2 + w)) * f1, np.exp(1j * t * (k2 + w)) * f2, center)
    return scalar_synthesize(basis, np.exp(-1j * t * k2) * np.asarray(coeffs), center)


def eigenfunction_residual(basis: ScalarBasis, k_values, dx: float = 0.05, X: float = 10.0) -> float:
    """max over k of the weighted residual of -e'' + V e - k^2 e on [-X, X]."""
    x = np.arange(-X, X + dx / 2, dx)
    q = np.abs(np.atleast_1d(np.asarray(k_values, float)))
    fp, dfp = basis.jost.plus(x)
    idx = np.rint(q / basis.grid.dk).astype(int)
    y = fp[idx]
    d2 = np.gradient(dfp[idx], x, axis=1)
    res = -d2 + basis.potential(x)[None, :] * y - (q**2)[:, None] * y
    w = 1.0 / (1.0 + x**2)
    inner = slice(2, -2)
    return float(np.max(np.abs(res[:, inner]) * w[inner]))
