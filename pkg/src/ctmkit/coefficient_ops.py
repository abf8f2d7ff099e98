"""Form-1 / Form-2 operators on 2m-2 coefficient functions and their inversion.

Components are numbered 1..2m-2 in the docstrings and 0..2m-3 in code.  Each
operator is T = Id - R where R is a sum of terms c(k) g_j(+-k + a); the
terms are tabulated once when the operator is built.

Form 1 (l = 1..m-1 for even components, l = 0..m-2 for odd ones):
    T_{2l}   = g_{2l}   - r_l(k + v_l/2) g_{2l-1}(-k - v_l) - s_l(k + v_l/2) g_{2l-2}(k)
    T_{2l+1} = g_{2l+1} - r_{l+2}(-k - v_{l+2}/2) g_{2l+2}(-k - v_{l+2})
                        - s_{l+2}(-k - v_{l+2}/2) g_{2l+3}(k)
Form 2 (n = 1..m-1):
    T_{2n-1} = g_{2n-1} - r_n(-k + v_n/2) g_{2n}(-k + v_n) - s_n(-k + v_n/2) g_{2n-3}(k)
    T_{2n}   = g_{2n}   - r_{n+1}(k - v_{n+1}/2) g_{2n-1}(-k + v_{n+1})
                        - s_{n+1}(k - v_{n+1}/2) g_{2n+2}(k)
Terms referring to components outside 1..2m-2 are absent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericalError, RangeError
from .spectral import ScatteringData

log = logging.getLogger(__name__)

EDGE_TOL = 1e-12
CLIP_SLACK = 1e-6


@dataclass
class CoefficientVector:
    k: np.ndarray
    g: np.ndarray  # (2m-2, nk)

    def __post_init__(self):
        self.g = np.atleast_2d(np.asarray(self.g, complex))
        if self.g.shape[-1] != self.k.size:
            raise ConfigError("coefficient functions must live on the common k-grid")
        if not np.all(np.isfinite(self.g)):
            raise ConfigError("coefficient vector has non-finite entries")

    @property
    def dk(self) -> float:
        return float(self.k[1] - self.k[0])

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.g) ** 2) * self.dk))

    def __add__(self, o):
        return CoefficientVector(self.k, self.g + o.g)

    def __sub__(self, o):
        return CoefficientVector(self.k, self.g - o.g)

    def __mul__(self, a):
        return CoefficientVector(self.k, a * self.g)

    __rmul__ = __mul__


def eval_shifted(f: np.ndarray, k: np.ndarray, sign: int, shift: float, scale: float | None = None) -> np.ndarray:
    """f(sign*k + shift) by linear interpolation (exact when nodes align).

    Points leaving the grid read 0 when f is negligible at the edges,
    otherwise a RangeError asks for a wider grid.  ``scale`` is the size the
    edge values are compared against (default: max |f|).
    """
    q = sign * k + shift
    out_lo = q < k[0] - 1e-12
    out_hi = q > k[-1] + 1e-12
    if np.any(out_lo | out_hi):
        if scale is None:
            scale = float(np.max(np.abs(f)))
        edge = max(abs(f[0]), abs(f[-1]))
        if edge > EDGE_TOL * scale:
            raise RangeError(f"shifted evaluation at {q[out_lo | out_hi][0]:.4g} leaves the k-grid "
                             f"[{k[0]:.4g}, {k[-1]:.4g}] while the data is not negligible there; widen the grid")
    re = np.interp(q, k, f.real, left=0.0, right=0.0)
    im = np.interp(q, k, f.imag, left=0.0, right=0.0)
    return re + 1j * im


def _coefficient_table(src, q: np.ndarray, what: str) -> np.ndarray:
    """r or s evaluated at points q from a ScatteringData table or a callable."""
    if isinstance(src, ScatteringData):
        r, s = src.interpolate(q)
        val = r if what == "r" else s
    elif callable(src):
        val = np.asarray(src(q), complex)
    else:
        val = np.broadcast_to(np.asarray(src, complex), q.shape).copy()
    mx = float(np.max(np.abs(val))) if val.size else 0.0
    if mx > 1.0 + CLIP_SLACK:
        raise NumericalError(f"|{what}| = {mx:.8g} exceeds 1 beyond tolerance")
    if mx > 1.0 + 1e-12:
        log.warning("clipping |%s| = %.10g to 1", what, mx)
    if mx > 1.0:
        big = np.abs(val) > 1.0
        val = np.where(big, val / np.abs(val), val)
    return val


@dataclass
class _Term:
    target: int
    source: int
    coef: np.ndarray
    sign: int
    shift: float


@dataclass
class FormOperator:
    """T = Id - R of Form 1 or Form 2 on a uniform k-grid.

    ``r`` and ``s`` are per-center sequences (index 0 is center 1) of
    ScatteringData, callables or constants.  ``perturbation`` is an optional
    callable CoefficientVector -> CoefficientVector added to T.
    """

    form: int
    k: np.ndarray
    v: Sequence[float]
    r: Sequence
    s: Sequence
    perturbation: Callable | None = None
    terms: list = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.v, float)
        self.v = v
        m = v.size
        if m < 2:
            raise ConfigError("Form operators need m >= 2 centers")
        if np.any(np.diff(v) >= 0):
            raise ConfigError("velocities must be strictly decreasing")
        if len(self.r) != m or len(self.s) != m:
            raise ConfigError("need one (r, s) pair per center")
        if self.form not in (1, 2):
            raise ConfigError("form must be 1 or 2")
        self.k = np.asarray(self.k, float)
        self.terms = self._build()

    @property
    def m(self) -> int:
        return self.v.size

    @property
    def ncomp(self) -> int:
        return 2 * self.m - 2

    @property
    def c_gap(self) -> float:
        return float(np.min(-np.diff(self.v)) / 2.0)

    def _add(self, terms, target, source, center, what, sign_arg, arg_shift, sign_src, src_shift):
        """term c(sign_arg*k + arg_shift) g_source(sign_src*k + src_shift); 1-based indices."""
        n = self.ncomp
        if not (1 <= target <= n and 1 <= source <= n):
            return
        tab = self.r if what == "r" else self.s
        coef = _coefficient_table(tab[center - 1], sign_arg * self.k + arg_shift, what)
        terms.append(_Term(target - 1, source - 1, coef, sign_src, src_shift))

    def _build(self):
        v = lambda l: float(self.v[l - 1])
        m = self.m
        terms: list = []
        if self.form == 1:
            for l in range(1, m):
                self._add(terms, 2 * l, 2 * l - 1, l, "r", 1, v(l) / 2, -1, -v(l))
                self._add(terms, 2 * l, 2 * l - 2, l, "s", 1, v(l) / 2, 1, 0.0)
            for l in range(0, m - 1):
                self._add(terms, 2 * l + 1, 2 * l + 2, l + 2, "r", -1, -v(l + 2) / 2, -1, -v(l + 2))
                self._add(terms, 2 * l + 1, 2 * l + 3, l + 2, "s", -1, -v(l + 2) / 2, 1, 0.0)
        else:
            for n in range(1, m):
                self._add(terms, 2 * n - 1, 2 * n, n, "r", -1, v(n) / 2, -1, v(n))
                self._add(terms, 2 * n - 1, 2 * n - 3, n, "s", -1, v(n) / 2, 1, 0.0)
                self._add(terms, 2 * n, 2 * n - 1, n + 1, "r", 1, -v(n + 1) / 2, -1, v(n + 1))
                self._add(terms, 2 * n, 2 * n + 2, n + 1, "s", 1, -v(n + 1) / 2, 1, 0.0)
        return terms

    def norm_bound(self) -> float:
        """Crude L^2 bound on ||R||: shifts and reflections are isometries."""
        per = np.zeros(self.ncomp)
        for t in self.terms:
            per[t.target] += np.max(np.abs(t.coef))
        return float(per.max()) if per.size else 0.0

    def with_zero_reflection(self) -> "FormOperator":
        zeros = [0.0] * self.m
        return FormOperator(self.form, self.k, self.v, zeros, self.s, self.perturbation)


def _as_vector(op: FormOperator, g) -> CoefficientVector:
    if isinstance(g, CoefficientVector):
        if g.g.shape[0] != op.ncomp:
            raise ConfigError(f"expected {op.ncomp} components, got {g.g.shape[0]}")
        return g
    return CoefficientVector(op.k, g)


def apply_R(op: FormOperator, g, scale: float | None = None) -> CoefficientVector:
    """R g; ``scale`` sets the size below which data leaving the grid is ignored."""
    g = _as_vector(op, g)
    if scale is None:
        scale = float(np.max(np.abs(g.g)))
    out = np.zeros_like(g.g)
    for t in op.terms:
        if not np.any(t.coef):
            continue
        out[t.target] += t.coef * eval_shifted(g.g[t.source], op.k, t.sign, t.shift, scale)
    res = CoefficientVector(op.k, out)
    if op.perturbation is not None:
        res = res - op.perturbation(g)
    return res


def apply_T(op: FormOperator, g) -> CoefficientVector:
    g = _as_vector(op, g)
    return g - apply_R(op, g)


def log_theoretical_bound(m: int, j: int, C_coeff: float, c_gap: float) -> float:
    """log of ``theoretical_bound``; stays finite where the bound underflows."""
    if m < 1 or j < 1 or C_coeff <= 0 or c_gap <= 0:
        raise ConfigError("theoretical_bound needs positive inputs")
    Cm = 2.0 ** (m - 1) * C_coeff / min(c_gap, 1.0)
    logA = math.log(j * m) + j * math.log(Cm)
    fl = max((j - 3) // 2, 0)
    return min(logA - math.lgamma(j + 1), logA - 2.0 * math.lgamma(fl + 1))


def theoretical_bound(m: int, j: int, C_coeff: float, c_gap: float) -> float:
    """min(j m C(m)^j / j!, j m C(m)^j / (floor((j-3)/2)!)^2), C(m) = 2^{m-1} C / min(c, 1).

    Negative floors are clamped to 0! = 1.
    """
    return math.exp(log_theoretical_bound(m, j, C_coeff, c_gap))


def bound_monotone_from(m: int, C_coeff: float, c_gap: float, j_max: int = 400) -> int:
    """Smallest j0 with bound(j+2) < bound(j) for all j0 <= j <= j_max."""
    b = [log_theoretical_bound(m, j, C_coeff, c_gap) for j in range(1, j_max + 3)]
    j0 = j_max
    for j in range(j_max, 0, -1):
        if b[j + 1] < b[j - 1]:
            j0 = j
        else:
            break
    return j0


def certified_tail(op: FormOperator, J: int, C_coeff: float) -> float:
    """Bound on sum_{n >= J(m-1)} ||R^n|| from the factorial estimate."""
    m = op.m
    rn = max(op.norm_bound(), 1e-300)
    block = sum(rn**i for i in range(m - 1))
    tail = 0.0
    j = J
    while True:
        j += 1
        b = theoretical_bound(m, j, C_coeff, op.c_gap)
        tail += b
        if j > J + 5 and b < 1e-30 * max(tail, 1e-300):
            break
        if j > J + 10000:
            return math.inf
    # R^{J(m-1)} itself plus the blocks beyond it
    return (theoretical_bound(m, max(J, 1), C_coeff, op.c_gap) + tail) * block


@dataclass
class NeumannResult:
    g: CoefficientVector
    iterations: int
    certified_tail: float
    residual: float
    certified: bool


def neumann_solve(op: FormOperator, rhs, tol: float = 1e-10, max_iter: int = 200,
                  C_coeff: float | None = None) -> NeumannResult:
    """g = sum_n R^n rhs, stopped when the increment and the certified tail are < tol.

    Both criteria are relative to ||rhs||.  Without ``C_coeff`` the tail is
    not certified and only the increment test applies.
    """
    rhs = _as_vector(op, rhs)
    nr = rhs.norm()
    if nr == 0:
        return NeumannResult(rhs * 0.0, 0, 0.0, 0.0, True)
    m = op.m
    g = rhs
    term = rhs
    scale = float(np.max(np.abs(rhs.g)))
    incs = []
    tail = math.inf
    for n in range(1, max_iter + 1):
        term = apply_R(op, term, scale)
        g = g + term
        inc = term.norm() / nr
        incs.append(inc)
        if inc == 0.0:
            tail = 0.0
            break
        w = 5 * (m - 1)
        if len(incs) > w and all(incs[-i] > incs[-i - 1] for i in range(1, w + 1)) and incs[-1] > 1.0:
            raise NumericalError("Neumann iterates grow; the coefficient hypotheses look violated")
        if inc < tol:
            if C_coeff is None:
                tail = inc
                break
            J = n // (m - 1)
            tail = certified_tail(op, J, C_coeff)
            if tail < tol:
                break
    residual = (apply_T(op, g) - rhs).norm() / nr
    certified = bool(tail < tol) if C_coeff is not None else bool(incs[-1] < tol)
    if not certified and residual > 10 * tol:
        raise NumericalError(f"Neumann series not converged after {max_iter} terms (residual {residual:.2e})")
    return NeumannResult(g, n, float(tail), float(residual), certified)


def dense_matrix(op: FormOperator) -> np.ndarray:
    """Matrix of T acting on stacked components (for small oracle solves).

    Columns are built from unit vectors, so shifts that leave the grid read 0:
    this is T truncated to the k-grid.
    """
    nk = op.k.size
    N = op.ncomp * nk
    M = np.zeros((N, N), complex)
    e = np.zeros((op.ncomp, nk), complex)
    for col in range(N):
        e.flat[col] = 1.0
        g = CoefficientVector(op.k, e)
        M[:, col] = (g - apply_R(op, g, scale=np.inf)).g.ravel()
        e.flat[col] = 0.0
    return M


def random_smooth_vector(op: FormOperator, rng: np.random.Generator, width: float | None = None) -> CoefficientVector:
    """Random smooth unit vector, negligible near the grid ends."""
    k = op.k
    L = k[-1] - k[0]
    width = width or L / 32.0
    g = np.zeros((op.ncomp, k.size), complex)
    for i in range(op.ncomp):
        c = rng.uniform(-L / 8, L / 8)
        freqs = rng.normal(size=4) * 2.0
        amps = rng.normal(size=4) + 1j * rng.normal(size=4)
        g[i] = np.exp(-((k - c) / width) ** 2) * np.sum(amps[:, None] * np.exp(1j * freqs[:, None] * k), axis=0)
    v = CoefficientVector(k, g)
    return v * (1.0 / v.norm())


def probe_norms(op: FormOperator, j_max: int = 6, n_probe: int = 20, seed: int = 0) -> np.ndarray:
    """max over random unit g of ||R^{j(m-1)} g|| for j = 1..j_max."""
    rng = np.random.default_rng(seed)
    out = np.zeros(j_max)
    for _ in range(n_probe):
        g = random_smooth_vector(op, rng)
        for j in range(1, j_max + 1):
            for _ in range(op.m - 1):
                g = apply_R(op, g)
            out[j - 1] = max(out[j - 1], g.norm())
    return out


def reflection_annihilation_check(op: FormOperator, g) -> float:
    """||(Id - T)^{m-1} g|| / ||g|| for the operator with all r set to zero."""
    z = op.with_zero_reflection()
    g = _as_vector(z, g)
    h = g
    for _ in range(z.m - 1):
        h = apply_R(z, h)
    return h.norm() / g.norm()


def measured_decay_constant(datas: Sequence[ScatteringData]) -> float:
    """max_l sup_k (1+|k|)^{n+1} (|d^n r| + |d^n (1-s)|), n in {0,1}, at least 1."""
    C = 1.0
    for d in datas:
        o = np.argsort(d.k)
        k, r, s = d.k[o], d.r[o], d.s[o]
        w = 1.0 + np.abs(k)
        C = max(C, float(np.max(w * (np.abs(r) + np.abs(1 - s)))))
        dr = np.gradient(r, k)
        ds = np.gradient(1 - s, k)
        C = max(C, float(np.max(w**2 * (np.abs(dr) + np.abs(ds)))))
    return C


# ---------------------------------------------------------------------------
# the product bound

def product_bound_value(q, M: int | None = None) -> float:
    """max( 1/((floor((M-2)/2)!)^2 gap^{M-2}), 1/((M-1)! gap^{M-1}) )."""
    q = np.asarray(q, float)
    M = M or q.size
    gap = float(np.min(-np.diff(q)))
    a = -2 * math.lgamma((M - 2) // 2 + 1) - (M - 2) * math.log(gap)
    b = -math.lgamma(M) - (M - 1) * math.log(gap)
    return math.exp(max(a, b))


def product_bound_min(q, M: int | None = None, n_scan: int = 20001):
    """(measured, bound) for prod_j 1/(1 + |k + q_j|).

    The measured value is the supremum over k (the infimum over the real line
    is 0); it is attained at one of the kinks k = -q_j, and a grid scan over
    the kink range is used as a cross-check.
    """
    q = np.asarray(q, float)
    M = M or q.size
    if q.size != M:
        raise ConfigError("q must have M entries")
    if np.any(np.diff(q) >= 0):
        raise ConfigError("q must be strictly decreasing")
    kinks = -q
    prod = lambda kk: np.exp(-np.sum(np.log1p(np.abs(kk[:, None] + q[None, :])), axis=1))
    at_kinks = float(np.max(prod(kinks)))
    grid = np.linspace(kinks.min() - 1.0, kinks.max() + 1.0, n_scan)
    scan, _ = _kernels.product_scan(q, grid)
    measured = max(at_kinks, float(scan))
    return measured, product_bound_value(q, M)
