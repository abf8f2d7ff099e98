"""Jost solutions, scattering data, threshold resonances and discrete spectra.

Scalar Jost solutions solve -f'' + V f = k^2 f with f_+ ~ e^{ikx} at +inf and
f_- ~ e^{-ikx} at -inf.  They are obtained from the Volterra equation

    y(x) = y(a) cos k(x-a) + y'(a) sin k(x-a)/k + int_a^x sin k(x-s)/k V(s) y(s) ds

solved panel by panel (Chebyshev-Lobatto nodes, Picard iteration) starting at
|x| = X_max = 25/gamma where V is negligible.  With W(f, g) = f g' - f' g,

    s(k) = -2ik / W(f_+, f_-),    r(k) = s(k) W(f_+(k), f_-(-k)) / (2ik),

so that s f_+(x, k) = f_-(x, -k) + r f_-(x, k).

Matrix generalized eigenfunctions F(x, k) of
    H = [[-d^2 + w + U, -W], [W, d^2 - w - U]]
at spectral parameter k^2 + w are computed by Chebyshev collocation of the
boundary value problem with radiation conditions (see ``matrix_F``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import linalg as sla
from scipy.interpolate import BarycentricInterpolator

from . import _kernels
from .errors import ConfigError, NumericalError, RangeError
from .potentials import MatrixPotentialSpec, ScalarPotentialSpec

K_FLOOR = 1e-3
RESONANCE_THRESHOLD = 1e-4
PANEL_ORDER = 12
PICARD_TOL = 1e-12
PICARD_MAXIT = 60


# ---------------------------------------------------------------------------
# Volterra panel machinery

@lru_cache(maxsize=8)
def _lobatto_integration(p: int):
    t = -np.cos(np.pi * np.arange(p + 1) / p)
    V = C.chebvander(t, p)
    Iv = np.empty_like(V)
    for m in range(p + 1):
        c = np.zeros(p + 1)
        c[m] = 1.0
        Iv[:, m] = C.chebval(t, C.chebint(c, lbnd=-1.0))
    return t, Iv @ np.linalg.inv(V)


def _sin_over_k(k, d):
    return d * np.sinc(k * d / np.pi)


@dataclass(frozen=True)
class _PanelTables:
    d: np.ndarray
    kern: np.ndarray
    chom: np.ndarray
    shom: np.ndarray
    dcos: np.ndarray
    ce: np.ndarray
    se: np.ndarray
    kse: np.ndarray


def _panel_tables(k: np.ndarray, h: float, p: int = PANEL_ORDER) -> _PanelTables:
    t, Qref = _lobatto_integration(p)
    d = 0.5 * h * (t + 1.0)
    Q = 0.5 * h * Qref
    kk = k[:, None]
    chom = np.cos(kk * d[None, :])
    shom = _sin_over_k(kk, d[None, :])
    dd = d[:, None] - d[None, :]
    kern = Q[None, :, :] * _sin_over_k(k[:, None, None], dd[None, :, :])
    dcos = Q[-1][None, :] * np.cos(kk * (h - d)[None, :])
    ce = np.cos(k * h)
    se = _sin_over_k(k, h)
    kse = -k * np.sin(k * h)
    return _PanelTables(d, np.ascontiguousarray(kern), chom, shom, dcos, ce, se, kse)


def march(potential, k, x0: float, h: float, npan: int, y0, dy0, p: int = PANEL_ORDER,
          return_nodes: bool = False):
    """Solve y'' + k^2 y = V y from x0 in ``npan`` panels of signed width h.

    Returns (Y, DY) with shape (len(k), npan + 1): values and derivatives at the
    panel edges x0 + j h.  With ``return_nodes`` the Chebyshev-Lobatto nodal
    values (nk, npan, p + 1) and the node offsets are returned as well.
    """
    k = np.atleast_1d(np.asarray(k, float))
    tabs = _panel_tables(k, h, p)
    edges = x0 + h * np.arange(npan)
    vpan = np.ascontiguousarray(potential(edges[:, None] + tabs.d[None, :]), dtype=float)
    y0 = np.broadcast_to(np.asarray(y0, complex), k.shape).copy()
    dy0 = np.broadcast_to(np.asarray(dy0, complex), k.shape).copy()
    Y, DY, nodes, its, bad = _kernels.volterra_sweep(vpan, tabs.kern, tabs.chom, tabs.shom, tabs.dcos,
                                              tabs.ce, tabs.se, tabs.kse, y0, dy0, PICARD_TOL, PICARD_MAXIT,
                                                     bool(return_nodes))
    if bad >= 0:
        raise NumericalError(
            f"Volterra Picard iteration did not converge on panel {bad} (x = {x0 + bad * h:.4g}) "
            f"after {its} iterations; reduce the panel width (|h| = {abs(h):.3g}) or check the potential")
    if return_nodes:
        return Y, DY, nodes, tabs.d
    return Y, DY


def _panel_width(kmax: float) -> float:
    return min(0.1, 2.0 / max(kmax, 1e-12))


def jost_plus_at(potential: ScalarPotentialSpec, k, x_end: float = 0.0, chunk: int = 128):
    """f_+(x_end, k) and its derivative, marching in from X_max.

    Wave numbers are processed in chunks of similar magnitude so the panel
    width adapts to each chunk.
    """
    k = np.atleast_1d(np.asarray(k, float))
    X = potential.x_max
    span = X - x_end
    order = np.argsort(np.abs(k))
    f0 = np.empty(k.shape, complex)
    d0 = np.empty(k.shape, complex)
    for start in range(0, k.size, chunk):
        sel = order[start:start + chunk]
        kk = k[sel]
        npan = max(1, int(np.ceil(span / _panel_width(np.abs(kk).max()))))
        h = -span / npan
        e = np.exp(1j * kk * X)
        Y, DY = march(potential, kk, X, h, npan, e, 1j * kk * e)
        f0[sel] = Y[:, -1]
        d0[sel] = DY[:, -1]
    return f0, d0


@dataclass(frozen=True)
class JostSolutions:
    """f_+ and f_- (and derivatives) sampled at ascending points x, shape (nk, nx)."""

    k: np.ndarray
    x: np.ndarray
    fp: np.ndarray
    dfp: np.ndarray
    fm: np.ndarray
    dfm: np.ndarray


def jost_solutions(potential, k, x_points=None) -> JostSolutions:
    """Scalar Jost solutions on a uniform ascending set of points.

    ``x_points`` must be uniformly spaced; by default [-X_max, X_max] is covered
    with spacing <= 0.05.  Matrix potentials return the bounded solution
    F / s (first component and second component stacked on a leading axis).
    """
    if isinstance(potential, MatrixPotentialSpec):
        return _matrix_jost(potential, k, x_points)
    k = np.atleast_1d(np.asarray(k, float))
    X = potential.x_max
    if x_points is None:
        n = int(np.ceil(2 * X / min(0.05, _panel_width(np.abs(k).max())))) + 1
        x_points = np.linspace(-X, X, n)
    x = np.asarray(x_points, float)
    h = x[1] - x[0]
    if not np.allclose(np.diff(x), h, rtol=1e-9, atol=1e-12):
        raise ConfigError("jost_solutions needs uniformly spaced points")
    # extend to X_max on both sides on the same lattice
    n_hi = max(0, int(np.ceil((X - x[-1]) / h)))
    n_lo = max(0, int(np.ceil((x[0] + X) / h)))
    top = x[-1] + n_hi * h
    bot = x[0] - n_lo * h
    npan = int(round((top - bot) / h))
    e = np.exp(1j * k * top)
    Yp, DYp = march(potential, k, top, -h, npan, e, 1j * k * e)
    e = np.exp(-1j * k * bot)
    Ym, DYm = march(potential, k, bot, h, npan, e, -1j * k * e)
    # Yp runs top -> bot; flip to ascending
    Yp, DYp = Yp[:, ::-1], DYp[:, ::-1]
    sl = slice(n_lo, n_lo + x.size)
    return JostSolutions(k, x, Yp[:, sl], DYp[:, sl], Ym[:, sl], DYm[:, sl])


def _cheb_lobatto_diff(t: np.ndarray) -> np.ndarray:
    n = t.size
    c = np.where((np.arange(n) == 0) | (np.arange(n) == n - 1), 2.0, 1.0) * (-1.0) ** np.arange(n)
    dt = t[:, None] - t[None, :] + np.eye(n)
    D = np.outer(c, 1.0 / c) / dt
    D -= np.diag(D.sum(axis=1))
    return D


def plane_wave_continuation(k, x0, y, dy):
    """Coefficients (a, b) with y(x) = a e^{ik(x-x0)} + b e^{-ik(x-x0)} matching value and slope."""
    k = np.asarray(k, float)
    ks = np.where(k == 0, 1.0, k)
    a = np.where(k == 0, y, 0.5 * (y + dy / (1j * ks)))
    b = np.where(k == 0, dy, 0.5 * (y - dy / (1j * ks)))
    return a, b


def continue_outside(k, x0, a, b, x):
    """Evaluate the plane-wave continuation (or a + b (x - x0) when k = 0)."""
    k = np.asarray(k, float)[:, None]
    z = np.asarray(x, float)[None, :] - x0
    pw = a[:, None] * np.exp(1j * k * z) + b[:, None] * np.exp(-1j * k * z)
    dpw = 1j * k * (a[:, None] * np.exp(1j * k * z) - b[:, None] * np.exp(-1j * k * z))
    lin = a[:, None] + b[:, None] * z
    zero = k == 0
    return np.where(zero, lin, pw), np.where(zero, b[:, None] + 0 * z, dpw)


@dataclass
class JostTable:
    """f_+(x, q) for q >= 0 on Chebyshev-Lobatto panels covering [-X, X].

    Even potentials give f_-(x, q) = f_+(-x, q).  Points outside [-X, X] use
    the free continuation of the edge data.
    """

    q: np.ndarray
    X: float
    h: float
    t: np.ndarray
    vals: np.ndarray
    ders: np.ndarray

    @property
    def npan(self) -> int:
        return self.vals.shape[1]

    def plus(self, x):
        x = np.atleast_1d(np.asarray(x, float))
        nq = self.q.size
        val = np.empty((nq, x.size), complex)
        der = np.empty((nq, x.size), complex)
        inside = np.abs(x) <= self.X
        if np.any(inside):
            xi = x[inside]
            j = np.clip(np.floor((self.X - xi) / self.h).astype(int), 0, self.npan - 1)
            tl = 2.0 * (self.X - j * self.h - xi) / self.h - 1.0
            w = (-1.0) ** np.arange(self.t.size)
            w[0] *= 0.5
            w[-1] *= 0.5
            diff = tl[:, None] - self.t[None, :]
            hit = np.abs(diff) < 1e-14
            diff[hit] = 1.0
            B = w[None, :] / diff
            rows = np.any(hit, axis=1)
            B[rows] = hit[rows].astype(float)
            B /= B.sum(axis=1, keepdims=True)
            val[:, inside] = np.einsum("qnp,np->qn", self.vals[:, j, :], B)
            der[:, inside] = np.einsum("qnp,np->qn", self.ders[:, j, :], B)
        right = x > self.X
        if np.any(right):
            e = np.exp(1j * self.q[:, None] * x[right][None, :])
            val[:, right] = e
            der[:, right] = 1j * self.q[:, None] * e
        left = x < -self.X
        if np.any(left):
            y0, d0 = self.vals[:, -1, -1], self.ders[:, -1, -1]
            a, b = plane_wave_continuation(self.q, -self.X, y0, d0)
            val[:, left], der[:, left] = continue_outside(self.q, -self.X, a, b, x[left])
        return val, der

    def minus(self, x):
        v, d = self.plus(-np.asarray(x, float))
        return v, -d


def jost_table(potential: ScalarPotentialSpec, q, p: int = PANEL_ORDER) -> JostTable:
    q = np.atleast_1d(np.asarray(q, float))
    if np.any(q < 0):
        raise ConfigError("jost_table expects q >= 0")
    X = potential.x_max
    vmax = float(np.max(np.abs(potential(np.linspace(0, X, 2001)))))
    hmax = min(0.4, 1.5 / max(q.max(), 1e-9), 0.8 / np.sqrt(vmax + 1e-300))
    npan = int(np.ceil(2 * X / hmax))
    h = 2 * X / npan
    e = np.exp(1j * q * X)
    _, _, nodes, _ = march(potential, q, X, -h, npan, e, 1j * q * e, p, return_nodes=True)
    t = -np.cos(np.pi * np.arange(p + 1) / p)
    D = _cheb_lobatto_diff(t) * (2.0 / -h)
    ders = nodes @ D.T
    return JostTable(q, X, h, t, nodes, ders)


# ---------------------------------------------------------------------------
# scattering data

@dataclass
class ScatteringData:
    k: np.ndarray
    r: np.ndarray
    s: np.ndarray
    label: str = ""
    unitarity_error: float = 0.0
    certificate: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "re_r", "im_r", "re_s", "im_s"])
            for row in zip(self.k, self.r.real, self.r.imag, self.s.real, self.s.imag):
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "ScatteringData":
        a = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(a[:, 0], a[:, 1] + 1j * a[:, 2], a[:, 3] + 1j * a[:, 4])

    def interpolate(self, q):
        """Linear interpolation of (r, s) at arbitrary q (tables on sorted k)."""
        q = np.asarray(q, float)
        o = np.argsort(self.k)
        kk = self.k[o]
        if q.size and (q.min() < kk[0] - 1e-12 or q.max() > kk[-1] + 1e-12):
            raise RangeError(f"scattering table [{kk[0]:.4g}, {kk[-1]:.4g}] queried at [{q.min():.4g}, {q.max():.4g}]")
        r = np.interp(q, kk, self.r[o].real) + 1j * np.interp(q, kk, self.r[o].imag)
        s = np.interp(q, kk, self.s[o].real) + 1j * np.interp(q, kk, self.s[o].imag)
        return r, s


def scalar_rs(potential: ScalarPotentialSpec, k) -> tuple[np.ndarray, np.ndarray]:
    """(r(k), s(k)) for an even scalar potential; k = 0 is returned as the limit."""
    k = np.atleast_1d(np.asarray(k, float))
    if potential.is_zero:
        return np.zeros(k.shape, complex), np.ones(k.shape, complex)
    kz = k == 0.0
    kk = np.where(kz, 1e-7, k)
    f0, d0 = jost_plus_at(potential, kk)
    # even potential: f_-(x,k) = f_+(-x,k)
    wpm = -2.0 * f0 * d0
    s = -2j * kk / wpm
    # f_-(x,-k) = conj f_+(-x,k)
    wb = -2.0 * np.real(f0 * np.conj(d0))
    r = s * wb / (2j * kk)
    # symmetric limit at k = 0: s(-k) = conj s(k)
    s = np.where(kz, s.real, s)
    r = np.where(kz, r.real, r)
    return r, s


def scattering_coefficients(potential: ScalarPotentialSpec, k_grid, check: bool = True, tol: float = 1e-6) -> ScatteringData:
    k = np.atleast_1d(np.asarray(k_grid, float))
    if isinstance(potential, MatrixPotentialSpec):
        r, s = matrix_rs(potential, k)
        return ScatteringData(k, r, s, label=str(potential.to_dict()))
    r, s = scalar_rs(potential, k)
    nz = np.abs(k) >= K_FLOOR
    err = float(np.max(np.abs(np.abs(r[nz]) ** 2 + np.abs(s[nz]) ** 2 - 1.0))) if np.any(nz) else 0.0
    if check and err > tol:
        raise NumericalError(f"unitarity violated by {err:.3g} (> {tol:g}); increase X_max or refine panels")
    return ScatteringData(k, r, s, label=str(potential.to_dict()), unitarity_error=err)


def check_coefficient_decay(data: ScatteringData) -> dict:
    """sup_k (1+|k|)^{n+1} |d^n q / dk^n| for q in {r, 1 - s}, n in {0, 1}."""
    o = np.argsort(data.k)
    k = data.k[o]
    out = {}
    for name, q in (("r", data.r[o]), ("one_minus_s", 1.0 - data.s[o])):
        w = 1.0 + np.abs(k)
        out[f"{name}_0"] = float(np.max(w * np.abs(q))) if k.size else 0.0
        dq = np.gradient(q, k) if k.size > 2 else np.zeros_like(q)
        out[f"{name}_1"] = float(np.max(w**2 * np.abs(dq))) if k.size else 0.0
    out["C0"] = max(out["r_0"], out["one_minus_s_0"])
    out["C1"] = max(out["r_1"], out["one_minus_s_1"])
    data.certificate = out
    return out


def born_reflection(potential: ScalarPotentialSpec, k: float, X: float | None = None) -> complex:
    """First Born approximation int V(x) e^{2ikx} dx / (2ik) by adaptive quadrature."""
    from scipy.integrate import quad

    X = X or potential.x_max
    re = quad(lambda x: potential(np.array([x]))[0] * np.cos(2 * k * x), -X, X, limit=400)[0]
    im = quad(lambda x: potential(np.array([x]))[0] * np.sin(2 * k * x), -X, X, limit=400)[0]
    return (re + 1j * im) / (2j * k)


# ---------------------------------------------------------------------------
# threshold resonances

@dataclass(frozen=True)
class ResonanceReport:
    resonant: bool
    wronskian: float
    threshold: float = RESONANCE_THRESHOLD

    def to_dict(self):
        return {"resonant": self.resonant, "wronskian": self.wronskian, "threshold": self.threshold}


def threshold_wronskian(potential) -> float:
    if isinstance(potential, MatrixPotentialSpec):
        d = 1e-3
        w1 = 2 * d / matrix_rs(potential, np.array([d]))[1][0]
        w2 = 4 * d / matrix_rs(potential, np.array([2 * d]))[1][0]
        return float(abs(2 * w1 - w2))
    if potential.is_zero:
        return 0.0
    f0, d0 = jost_plus_at(potential, np.array([0.0]))
    # W(f_+, f_-)(0) with f_-(x) = f_+(-x) at k = 0 (both real)
    return float(abs(-2.0 * (f0[0] * d0[0]).real))


def detect_threshold_resonance(potential, threshold: float = RESONANCE_THRESHOLD) -> ResonanceReport:
    w = threshold_wronskian(potential)
    return ResonanceReport(bool(w < threshold), w, threshold)


def signed_threshold_wronskian(potential: ScalarPotentialSpec) -> float:
    f0, d0 = jost_plus_at(potential, np.array([0.0]))
    return float(-2.0 * (f0[0] * d0[0]).real)


# ---------------------------------------------------------------------------
# discrete spectrum

@dataclass
class BoundState:
    """Eigen- or generalized-kernel vector sampled on a symmetric window."""

    lam: complex
    x: np.ndarray
    Z: np.ndarray
    role: str = "ordinary"
    Y: np.ndarray | None = None
    residual: float = 0.0

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def ncomp(self) -> int:
        return 1 if self.Z.ndim == 1 else self.Z.shape[0]

    def evaluate(self, x, which: str = "Z") -> np.ndarray:
        """Band-limited interpolation of Z (or Y); 0 outside the window.

        The samples are refined 8x by zero padding and then read off with
        local 8-point Lagrange interpolation.
        """
        data = self.Z if which == "Z" else self.Y
        single = np.ndim(data) == 1
        fine, x0, h = self._refined(which)
        x = np.asarray(x, float)
        out = np.zeros((fine.shape[0], x.size), complex)
        L = self.x.size * self.dx
        inside = (x >= self.x[0]) & (x <= self.x[0] + L - self.dx)
        t = (x[inside] - x0) / h
        i0 = np.clip(np.floor(t).astype(int) - 3, 0, fine.shape[1] - 8)
        nodes = i0[:, None] + np.arange(8)[None, :]
        u = t[:, None] - nodes
        w = np.ones_like(u)
        for a in range(8):
            for b in range(8):
                if a != b:
                    w[:, a] *= u[:, b] / (a - b)
        out[:, inside] = np.einsum("pj,cpj->cp", w, fine[:, nodes])
        return out[0] if single else out

    def _refined(self, which: str):
        cache = self.__dict__.setdefault("_fine", {})
        if which not in cache:
            data = np.atleast_2d(self.Z if which == "Z" else self.Y)
            n = self.x.size
            F = np.fft.fftshift(np.fft.fft(data, axis=-1), axes=-1)
            F[:, 0] *= 0.5  # split the Nyquist mode
            F = np.concatenate([F, F[:, :1]], axis=-1)
            up = 8
            pad = np.zeros((data.shape[0], up * n), complex)
            off = (up * n - n) // 2
            pad[:, off:off + n + 1] = F
            fine = np.fft.ifft(np.fft.ifftshift(pad, axes=-1), axis=-1) * up
            # periodic extension by one node so the last interval is covered
            fine = np.concatenate([fine, fine[:, :8]], axis=-1)
            cache[which] = (fine, self.x[0], self.dx / up)
        return cache[which]


@dataclass
class DiscreteSpectrum:
    states: list
    K1: int = 0
    K2: int = 0
    symmetric: bool = True

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([b.lam for b in self.states if b.role == "ordinary"])

    @property
    def counts(self) -> dict:
        lam = self.eigenvalues
        real = np.abs(lam.imag) <= 1e-8
        return {"N": int(np.sum(real & (lam.real > 0))), "M": int(np.sum(~real & (lam.imag > 0))),
                "ordinary": int(lam.size), "K1": self.K1, "K2": self.K2}

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [{"re": float(np.real(b.lam)), "im": float(np.imag(b.lam)), "role": b.role,
                             "residual": float(b.residual)} for b in self.states],
            "counts": self.counts,
            "symmetric": self.symmetric,
        }


def _window(dx: float, n: int) -> np.ndarray:
    return (np.arange(n) - n // 2) * dx


def _spectral_d2(n: int, dx: float) -> np.ndarray:
    kf = 2 * np.pi * np.fft.fftfreq(n, d=dx)
    col = np.real(np.fft.ifft(-(kf**2)))
    return sla.circulant(col)


def _inverse_iteration(H: np.ndarray, mu: complex, v0: np.ndarray, hermitian: bool, maxit: int = 30,
                       floor: float = 0.0):
    n = H.shape[0]
    v = v0 / np.linalg.norm(v0)
    lam = mu
    I = np.eye(n)
    for _ in range(maxit):
        lu = sla.lu_factor(H - (lam + 1e-13) * I)
        w = sla.lu_solve(lu, v)
        w /= np.linalg.norm(w)
        new = np.vdot(w, H @ w) if hermitian else _rayleigh_nonsym(H, w)
        done = abs(new - lam) <= 1e-14 * max(1.0, abs(new))
        v, lam = w, new
        if done or abs(lam) < floor:
            break
    return (lam.real if hermitian else lam), v


def _rayleigh_nonsym(H, w):
    Hw = H @ w
    return np.vdot(w, Hw) / np.vdot(w, w)


FD_HALF_ORDER = 6


@lru_cache(maxsize=None)
def _fd2_weights(p: int) -> np.ndarray:
    """Central weights c_0..c_p of the order-2p second derivative (times dx^2)."""
    from math import factorial
    c = np.zeros(p + 1)
    for j in range(1, p + 1):
        c[j] = 2.0 * (-1) ** (j + 1) * factorial(p) ** 2 / (j**2 * factorial(p - j) * factorial(p + j))
    c[0] = -2.0 * c[1:].sum()
    return c


def _banded_hamiltonian(V: np.ndarray, dx: float, p: int = FD_HALF_ORDER) -> np.ndarray:
    """Lower banded storage of -D2 + V for scipy.linalg.eig_banded."""
    c = _fd2_weights(p) / dx**2
    n = V.size
    band = np.zeros((p + 1, n))
    band[0] = -c[0] + V
    for j in range(1, p + 1):
        band[j, : n - j] = -c[j]
    return band


def _apply_banded(band: np.ndarray, Z: np.ndarray) -> np.ndarray:
    out = band[0] * Z
    for j in range(1, band.shape[0]):
        out[:-j] += band[j, :-j] * Z[j:]
        out[j:] += band[j, :-j] * Z[:-j]
    return out


def _banded_inverse_iteration(band: np.ndarray, lam: float, iters: int = 3) -> np.ndarray:
    p = band.shape[0] - 1
    n = band.shape[1]
    full = np.zeros((2 * p + 1, n))
    full[p] = band[0] - lam * (1 + 1e-13) - 1e-13
    for j in range(1, p + 1):
        full[p + j, : n - j] = band[j, : n - j]
        full[p - j, j:] = band[j, : n - j]
    v = np.random.default_rng(0).standard_normal(n)
    for _ in range(iters):
        v = sla.solve_banded((p, p), full, v)
        v /= np.linalg.norm(v)
    return v


def scalar_discrete_spectrum(potential: ScalarPotentialSpec, dx: float = 0.1, n: int = 512,
                             max_n: int = 65536) -> DiscreteSpectrum:
    """Negative eigenvalues of -d^2 + V from a 12th-order banded operator.

    The window doubles until every eigenfunction carries less than 1e-20 of
    its mass in the outer tenths.
    """
    if potential.is_zero:
        return DiscreteSpectrum([])
    while True:
        x = _window(dx, n)
        band = _banded_hamiltonian(potential(x), dx)
        lam = sla.eig_banded(band, lower=True, eigvals_only=True, select="v", select_range=(-np.inf, -1e-6))
        states = []
        ok = True
        for j in range(lam.size):
            Z = _banded_inverse_iteration(band, lam[j])
            Z = Z / np.sqrt(np.sum(Z**2) * dx)
            if Z[np.argmax(np.abs(Z))] < 0:
                Z = -Z
            e10 = n // 10
            edge = np.sum(Z[:e10] ** 2 + Z[n - e10:] ** 2) * dx
            if edge > 1e-20:
                ok = False
                break
            res = float(np.sqrt(np.sum((_apply_banded(band, Z) - lam[j] * Z) ** 2) * dx))
            states.append(BoundState(float(lam[j]), x, Z, "ordinary", residual=res))
        if ok:
            break
        if n >= max_n:
            raise NumericalError("bound state not contained in the spectral window; potential too weakly binding")
        n *= 2
    lams = np.array([b.lam for b in states])
    if lams.size > 1 and np.min(np.diff(np.sort(lams))) < 1e-8:
        raise NumericalError("near-degenerate eigenvalue cluster detected; refine the grid")
    for b in states:
        if b.residual > 1e-6:
            raise NumericalError(f"eigenpair residual {b.residual:.2e} exceeds 1e-6")
    states.sort(key=lambda b: b.lam)
    return DiscreteSpectrum(states)


def matrix_operator(mpot: MatrixPotentialSpec, x: np.ndarray, spectral: bool = True) -> np.ndarray:
    n = x.size
    dx = x[1] - x[0]
    if spectral:
        D2 = _spectral_d2(n, dx)
    else:
        D2 = (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / dx**2
    U = np.diag(mpot.U(x))
    W = np.diag(mpot.W(x))
    I = np.eye(n)
    return np.block([[-D2 + mpot.omega * I + U, -W], [W, D2 - mpot.omega * I - U]])


def _parity_split(B: np.ndarray, n: int) -> np.ndarray:
    """Rotate a basis of 2-vectors on a symmetric window into parity-definite vectors."""
    idx = (-np.arange(n)) % n
    R = lambda v: np.concatenate([v[:n][idx], v[n:][idx]])
    out = []
    for sign in (1.0, -1.0):
        P = np.array([0.5 * (b + sign * R(b)) for b in B.T]).T
        if P.size == 0:
            continue
        u, sv, _ = np.linalg.svd(P, full_matrices=False)
        keep = sv > 1e-6 * max(sv.max(), 1e-300)
        out.append(u[:, keep])
    return np.concatenate(out, axis=1) if out else B


def matrix_discrete_spectrum(mpot: MatrixPotentialSpec, dx: float = 0.1, n: int = 512,
                             kernel_tol: float = 1e-6) -> DiscreteSpectrum:
    x = _window(dx, n)
    w = mpot.omega
    Hfd = matrix_operator(mpot, x, spectral=False)
    H = matrix_operator(mpot, x, spectral=True)
    lam_fd, vec_fd = np.linalg.eig(Hfd)
    gap = 0.05
    cand = [(l, vec_fd[:, j]) for j, l in enumerate(lam_fd)
            if (abs(l.real) < w * (1 - 1e-2) or abs(l.imag) > 1e-3) and abs(l) > gap]
    states = []
    for l0, v0 in cand:
        lam, v = _inverse_iteration(H, l0, v0.astype(complex), hermitian=False, floor=gap)
        if abs(lam) < gap:
            continue  # drifted into the generalized kernel
        v = v / np.sqrt(np.sum(np.abs(v) ** 2) * dx)
        v *= np.exp(-1j * np.angle(v[np.argmax(np.abs(v))]))
        res = float(np.sqrt(np.sum(np.abs(H @ v - lam * v) ** 2) * dx))
        if res > 1e-6:
            raise NumericalError(f"matrix eigenpair residual {res:.2e} exceeds 1e-6 at lambda={lam:.6g}")
        if any(abs(lam - b.lam) < 1e-8 for b in states):
            continue
        states.append(BoundState(complex(lam), x, np.stack([v[:n], v[n:]]), "ordinary", residual=res))
    # kernel chain
    u, sv, vh = np.linalg.svd(H)
    scale = sv[0]
    ker = vh[sv < kernel_tol * scale].conj().T.astype(complex)
    K1 = ker.shape[1]
    K2 = K1
    if K1:
        ker = _parity_split(ker, n)
        # left null space decides which kernel vectors lie in the range
        left = u[:, sv < kernel_tol * scale]
        M = left.conj().T @ ker
        if M.size and np.max(np.abs(M)) > 1e-6:
            _, sm, vm = np.linalg.svd(M)
            in_range = vm[np.concatenate([sm, np.zeros(vm.shape[0] - sm.size)]) < 1e-6].conj().T
            chain_src = ker @ in_range
        else:
            chain_src = ker
        keep = sv >= kernel_tol * scale
        pinv_lu = (vh[keep].conj().T / sv[keep]) @ u[:, keep].conj().T
        for j in range(K1):
            z0 = ker[:, j] / np.sqrt(np.sum(np.abs(ker[:, j]) ** 2) * dx)
            z0 *= np.exp(-1j * np.angle(z0[np.argmax(np.abs(z0))]))
            res0 = float(np.sqrt(np.sum(np.abs(H @ z0) ** 2) * dx))
            states.append(BoundState(0.0, x, np.stack([z0[:n], z0[n:]]), "kernel", residual=res0))
        for j in range(chain_src.shape[1]):
            y = chain_src[:, j] / np.sqrt(np.sum(np.abs(chain_src[:, j]) ** 2) * dx)
            y *= np.exp(-1j * np.angle(y[np.argmax(np.abs(y))]))
            z1 = pinv_lu @ y
            z1 -= ker @ (ker.conj().T @ z1)
            nz = np.sqrt(np.sum(np.abs(z1) ** 2) * dx)
            z1 /= nz
            Y = H @ z1
            res = float(np.sqrt(np.sum(np.abs(H @ Y) ** 2) * dx))
            if res > 1e-6 * max(1.0, np.sqrt(np.sum(np.abs(Y) ** 2) * dx)):
                raise NumericalError("ill-conditioned generalized-kernel extraction; use a finer grid")
            states.append(BoundState(0.0, x, np.stack([z1[:n], z1[n:]]), "generalized",
                                     Y=np.stack([Y[:n], Y[n:]]), residual=res))
            K2 += 1
    lams = np.array([b.lam for b in states if b.role == "ordinary"])
    symmetric = all(np.min(np.abs(lams + l)) < 1e-6 for l in lams) if lams.size else True
    if not symmetric:
        raise NumericalError("matrix spectrum not closed under lambda -> -lambda; refine the grid")
    return DiscreteSpectrum(states, K1=K1, K2=K2, symmetric=symmetric)


def discrete_spectrum(potential, dx: float = 0.1, n: int = 512) -> DiscreteSpectrum:
    if isinstance(potential, MatrixPotentialSpec):
        return matrix_discrete_spectrum(potential, dx, n)
    return scalar_discrete_spectrum(potential, dx, n)


# ---------------------------------------------------------------------------
# matrix generalized eigenfunctions by Chebyshev collocation

def _cheb_diff(N: int):
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _support_radius(mpot: MatrixPotentialSpec, eps: float = 1e-13) -> float:
    xs = np.linspace(0, mpot.x_max, 4001)
    a = np.maximum(np.abs(mpot.U(xs)), np.abs(mpot.W(xs)))
    big = np.nonzero(a > eps * max(a.max(), 1e-300))[0]
    return float(xs[big[-1]] + 1.0) if big.size else 1.0


@dataclass
class MatrixEigenfunctions:
    """F(x, k) of a matrix potential on a Chebyshev grid over [-X, X]."""

    k: np.ndarray
    X: float
    nodes: np.ndarray
    values: np.ndarray  # (2, nk, N+1)
    s: np.ndarray
    r: np.ndarray

    def evaluate(self, x) -> np.ndarray:
        """F at arbitrary points, shape (2, nk, nx); plane waves outside [-X, X]."""
        x = np.asarray(x, float)
        nk = self.k.size
        out = np.zeros((2, nk, x.size), complex)
        inner = np.abs(x) <= self.X
        if np.any(inner):
            for c in range(2):
                bi = BarycentricInterpolator(self.nodes, self.values[c].T)
                out[c][:, inner] = bi(x[inner]).T
        kk = self.k[:, None]
        right = x > self.X
        out[0][:, right] = self.s[:, None] * np.exp(1j * kk * x[right][None, :])
        left = x < -self.X
        out[0][:, left] = np.exp(1j * kk * x[left][None, :]) + self.r[:, None] * np.exp(-1j * kk * x[left][None, :])
        return out


def matrix_F(mpot: MatrixPotentialSpec, k, N: int | None = None, X: float | None = None) -> MatrixEigenfunctions:
    """Solve H u = (k^2 + w) u with u_1 = e^{ikx} + r e^{-ikx} on the left,
    u_1 = s e^{ikx} on the right and a decaying second component."""
    k = np.atleast_1d(np.asarray(k, float))
    if np.any(k == 0):
        raise ConfigError("matrix_F is evaluated at k != 0; use matrix_F_limit for the k = 0 node")
    X = X or _support_radius(mpot)
    w = mpot.omega
    if N is None:
        N = int(min(900, 80 + X * (12.0 + 3.0 * np.abs(k).max())))
    t, D = _cheb_diff(N)
    xs = X * t
    D1 = D / X
    D2 = D1 @ D1
    U = mpot.U(xs)
    Wv = mpot.W(xs)
    n = N + 1
    vals = np.empty((2, k.size, n), complex)
    s = np.empty(k.size, complex)
    r = np.empty(k.size, complex)
    I = np.eye(n)
    for j, kj in enumerate(k):
        kap = np.sqrt(kj**2 + 2 * w)
        A = np.zeros((2 * n, 2 * n), complex)
        A[:n, :n] = D2 - np.diag(U) + kj**2 * I
        A[:n, n:] = np.diag(Wv)
        A[n:, n:] = D2 - np.diag(U) - (kj**2 + 2 * w) * I
        A[n:, :n] = np.diag(Wv)
        b = np.zeros(2 * n, complex)
        # node 0 is x = +X, node N is x = -X
        A[0] = 0
        A[0, :n] = D1[0]
        A[0, 0] -= 1j * kj
        A[n - 1] = 0
        A[n - 1, :n] = D1[-1]
        A[n - 1, n - 1] += 1j * kj
        b[n - 1] = 2j * kj * np.exp(-1j * kj * X)
        A[n] = 0
        A[n, n:] = D1[0]
        A[n, n] += kap
        A[2 * n - 1] = 0
        A[2 * n - 1, n:] = D1[-1]
        A[2 * n - 1, 2 * n - 1] -= kap
        u = np.linalg.solve(A, b)
        vals[0, j] = u[:n]
        vals[1, j] = u[n:]
        s[j] = u[0] * np.exp(-1j * kj * X)
        r[j] = (u[n - 1] - np.exp(-1j * kj * X)) * np.exp(-1j * kj * X)
    return MatrixEigenfunctions(k, X, xs, vals, s, r)


def matrix_rs(mpot: MatrixPotentialSpec, k) -> tuple[np.ndarray, np.ndarray]:
    k = np.atleast_1d(np.asarray(k, float))
    kk = np.where(k == 0, K_FLOOR, k)
    ef = matrix_F(mpot, np.abs(kk))
    r = np.where(kk > 0, ef.r, np.conj(ef.r))
    s = np.where(kk > 0, ef.s, np.conj(ef.s))
    return r, s


def _matrix_jost(mpot: MatrixPotentialSpec, k, x_points=None) -> JostSolutions:
    k = np.atleast_1d(np.asarray(k, float))
    ef = matrix_F(mpot, k)
    x = np.asarray(x_points if x_points is not None else np.linspace(-ef.X, ef.X, 801), float)
    F = ef.evaluate(x) / ef.s[None, :, None]
    # f_-(x, k) = F(-x, k) / s(k) for even potentials
    Fm = ef.evaluate(-x) / ef.s[None, :, None]
    dF = np.gradient(F, x, axis=-1)
    dFm = np.gradient(Fm, x, axis=-1)
    return JostSolutions(k, x, F, dF, Fm, dFm)
