"""The multi-center dispersive map S(phi)(t, x), its inversion and coercivity ratios.

Profiles live on the dual grid ``grid.k``.  The stored sequence phi_1..phi_m
is linked by one transmission step per center: with c = l + 1,

    phi_{l+1}(k) = [phi_l(k) - r_c(k - v_c/2) e^{i y_c (v_c - 2k)} phi_l(v_c - k)] / s_c(k - v_c/2)

(second matrix component: v -> -v).  Each center's term synthesizes with the
kernel that is a plane wave on the left of the center, so the free counter
term sum_{l<m} phi_l cancels the overlaps exactly between the windows.
``literal=True`` uses center l's data instead, with the gamma conjugation.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core_grid import SpatialGrid, idft, k_norm, lp_norm
from .distorted_fourier import MatrixBasis, ScalarBasis, get_basis, scalar_G_tilde, synth_G_hat
from .errors import ConfigError, NumericalError, RangeError, SingularDivisionError
from .potentials import ChargeTransferConfig, galilean_phase
from .spectral import DiscreteSpectrum, discrete_spectrum

log = logging.getLogger(__name__)

S_FLOOR = 1e-6
NEGLIGIBLE = 1e-13
L_MIN = 15.0


# ---------------------------------------------------------------------------
# helpers on the dual grid

def _shift(f: np.ndarray, grid: SpatialGrid, sign: int, a: float) -> np.ndarray:
    """f(sign*k + a) on grid.k, by index when a is a lattice shift."""
    k = grid.k
    q = sign * k + a
    j = (q - k[0]) / grid.dk
    ji = np.rint(j)
    if np.allclose(j, ji, atol=1e-9):
        ji = ji.astype(int)
        out = np.zeros(f.shape, complex)
        ok = (ji >= 0) & (ji < k.size)
        out[..., ok] = f[..., ji[ok]]
        lost = ~ok
    else:
        re = np.interp(q, k, f.real, left=0.0, right=0.0)
        im = np.interp(q, k, f.imag, left=0.0, right=0.0)
        out = re + 1j * im
        lost = (q < k[0]) | (q > k[-1])
    if np.any(lost):
        edge = max(abs(f[..., 0]).max(), abs(f[..., -1]).max())
        if edge > NEGLIGIBLE * max(np.abs(f).max(), 1e-300):
            raise RangeError("profile shift leaves the k-grid while the profile is not negligible there")
    return out


def _rs_at(basis, q: np.ndarray):
    """(r, s) of a basis at real points q, interpolated on its nonnegative table."""
    qq = basis.q.copy()
    if isinstance(basis, MatrixBasis):
        qq[0] = 0.0
    aq = np.abs(q)
    if aq.size and aq.max() > qq[-1] + 1e-12:
        raise RangeError(f"scattering data needed at |k| = {aq.max():.4g} beyond the basis band {qq[-1]:.4g}")
    rq, sq = basis.r_q, basis.s_q
    r = np.interp(aq, qq, rq.real) + 1j * np.interp(aq, qq, rq.imag)
    s = np.interp(aq, qq, sq.real) + 1j * np.interp(aq, qq, sq.imag)
    neg = q < 0
    return np.where(neg, np.conj(r), r), np.where(neg, np.conj(s), s)


def _live(f: np.ndarray) -> np.ndarray:
    a = np.abs(f)
    return a > NEGLIGIBLE * max(a.max(), 1e-300)


def _transmit(phi: np.ndarray, grid: SpatialGrid, basis, v: float, y: float, sgn: int) -> np.ndarray:
    """One recursion step for one component; sgn = +1 (component 1) or -1 (component 2)."""
    k = grid.k
    mirror = _shift(phi, grid, -1, sgn * v)
    need = _live(phi) | _live(mirror)
    out = np.zeros_like(phi, dtype=complex)
    if not np.any(need):
        return out
    q = k[need] - sgn * v / 2
    r, s = _rs_at(basis, q)
    phase = np.exp(sgn * 1j * y * (v - 2 * sgn * k[need]))
    num = phi[need] - r * phase * mirror[need]
    small = np.abs(s) < S_FLOOR
    if np.any(small & (np.abs(num) > NEGLIGIBLE * np.abs(num).max())):
        kk = k[need][small][0]
        raise SingularDivisionError(f"|s| < {S_FLOOR:g} at k = {kk:.6g} where the profile is not negligible")
    val = np.where(small, 0.0, num / np.where(small, 1.0, s))
    out[need] = val
    return out


# ---------------------------------------------------------------------------
# profiles

@dataclass
class PhiProfile:
    k: np.ndarray
    phi: np.ndarray  # (m, nc, nk)
    literal: bool = False

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def ncomp(self) -> int:
        return self.phi.shape[1]

    @property
    def input(self) -> np.ndarray:
        return self.phi[0]

    @property
    def varphi(self) -> np.ndarray:
        return self.phi[:-1].sum(axis=0)

    def to_csv(self, path) -> None:
        cols = [self.k]
        head = ["k"]
        for c in range(self.ncomp):
            cols += [self.input[c].real, self.input[c].imag]
            head += [f"re_phi{c + 1}", f"im_phi{c + 1}"]
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(head), comments="", fmt="%.17g")


def _bases(config: ChargeTransferConfig, grid: SpatialGrid, bases=None):
    if bases is not None:
        if len(bases) != config.m:
            raise ConfigError("need one basis per center")
        return list(bases)
    return [get_basis(p, grid) for p in config.potentials]


def _as_input(phi, config: ChargeTransferConfig, grid: SpatialGrid) -> np.ndarray:
    phi = np.asarray(phi, complex)
    nc = 1 if config.model == "scalar" else 2
    if phi.ndim == 1:
        phi = phi[None, :]
    if phi.shape != (nc, grid.n):
        raise ConfigError(f"profile must have shape ({nc}, {grid.n}) on grid.k")
    return phi


def build_profile_sequence(phi, config: ChargeTransferConfig, grid: SpatialGrid, bases=None,
                           literal: bool = False) -> PhiProfile:
    phi = _as_input(phi, config, grid)
    bases = _bases(config, grid, bases)
    m = config.m
    seq = np.zeros((m,) + phi.shape, complex)
    seq[0] = phi
    for l in range(m - 1):
        c = l if literal else l + 1
        cen = config.centers[c]
        for comp in range(phi.shape[0]):
            sgn = 1 if comp == 0 else -1
            seq[l + 1, comp] = _transmit(seq[l, comp], grid, bases[c], cen.v, cen.y, sgn)
        if literal and config.model == "matrix":
            dg = config.centers[l + 1].gamma_phase - config.centers[l].gamma_phase
            seq[l + 1, 0] *= np.exp(1j * dg)
            seq[l + 1, 1] *= np.exp(-1j * dg)
    return PhiProfile(grid.k.copy(), seq, literal)


def _term(profile: PhiProfile, config, grid, basis, ell: int, t: float) -> np.ndarray:
    """The l-th (0-based) traveling synthesized term, shape (nc, n)."""
    cen = config.centers[ell]
    k = grid.k
    v, y = cen.v, cen.y
    c = cen.position(t)
    Theta = galilean_phase(cen, t, grid.x, with_omega=config.model == "matrix")
    if config.model == "scalar":
        h = np.exp(-1j * t * k**2 + 1j * y * k) * _shift(profile.phi[ell, 0], grid, 1, v / 2)
        _check_band(basis, h)
        return (np.exp(1j * Theta) * scalar_G_tilde(basis, h, c))[None, :]
    w = cen.omega
    g = cen.gamma_phase
    h1 = np.exp(-1j * t * (k**2 + w) - 1j * g + 1j * y * k) * _shift(profile.phi[ell, 0], grid, 1, v / 2)
    h2 = np.exp(1j * t * (k**2 + w) + 1j * g + 1j * y * k) * _shift(profile.phi[ell, 1], grid, 1, -v / 2)
    _check_band(basis, h1)
    _check_band(basis, h2)
    u = synth_G_hat(basis, h1, h2, c)
    return np.stack([np.exp(1j * Theta) * u[0], np.exp(-1j * Theta) * u[1]])


def _check_band(basis, h) -> None:
    if basis.out_of_band(h) > 1e-10:
        raise RangeError(f"profile content beyond the transform band |k| <= {basis.k_band:.4g}; "
                         "shrink the profile support or widen the band")


def evaluate_S(profile: PhiProfile, config: ChargeTransferConfig, t: float, grid: SpatialGrid,
               bases=None, terms: bool = False):
    """S(phi)(t) on the grid: (n,) for scalar, (2, n) for matrix.

    With ``terms=True`` also return the list of traveling terms and the
    counter term, so callers can assemble S themselves.
    """
    bases = _bases(config, grid, bases)
    trav = [_term(profile, config, grid, bases[l], l, t) for l in range(config.m)]
    vp = profile.varphi
    k2 = grid.k ** 2
    counter = np.stack([idft(np.exp(-1j * t * k2) * vp[0], grid)] +
                       ([idft(np.exp(1j * t * k2) * vp[1], grid)] if vp.shape[0] == 2 else []))
    total = sum(trav) - counter
    out = total[0] if config.model == "scalar" else total
    if terms:
        return out, trav, counter
    return out


# ---------------------------------------------------------------------------
# modes

@dataclass
class ModeRef:
    center: int  # 1-based
    index: int
    kind: str  # ordinary | kernel | generalized
    lam: complex
    state: object


_SPECTRA: dict = {}


def center_spectra(config: ChargeTransferConfig) -> list:
    out = []
    for p in config.potentials:
        key = json.dumps(p.to_dict(), sort_keys=True) + (f"|{p.omega}" if hasattr(p, "omega") else "")
        if key not in _SPECTRA:
            _SPECTRA[key] = discrete_spectrum(p)
        out.append(_SPECTRA[key])
    return out


def mode_catalog(config: ChargeTransferConfig, spectra=None) -> list:
    spectra = spectra if spectra is not None else center_spectra(config)
    refs = []
    for l, sp in enumerate(spectra):
        for j, b in enumerate(sp.states):
            refs.append(ModeRef(l + 1, j, b.role, complex(b.lam), b))
    return refs


def mode_field(config: ChargeTransferConfig, ref: ModeRef, t: float, grid: SpatialGrid, which: str = "Z") -> np.ndarray:
    """Traveling mode at time t without its internal time factor."""
    cen = config.centers[ref.center - 1]
    xi = grid.x - cen.position(t)
    Z = ref.state.evaluate(xi, which)
    Theta = galilean_phase(cen, t, grid.x, with_omega=config.model == "matrix")
    if config.model == "scalar":
        return np.exp(1j * Theta) * Z
    Z = np.atleast_2d(Z)
    return np.stack([np.exp(1j * Theta) * Z[0], np.exp(-1j * Theta) * Z[1]])


# ---------------------------------------------------------------------------
# decomposition

@dataclass
class Decomposition:
    profile: PhiProfile
    modes: list  # ModeRef
    coefficients: np.ndarray
    residual: float
    condition: float
    param_band: float
    extra: dict = field(default_factory=dict)

    def coefficient(self, center: int, index: int) -> complex:
        for ref, a in zip(self.modes, self.coefficients):
            if ref.center == center and ref.index == index:
                return complex(a)
        raise KeyError((center, index))

    def to_json(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.profile.to_csv(out_dir / "phi.csv")
        doc = {
            "phi": "phi.csv",
            "modes": [{"center": r.center, "index": r.index, "kind": r.kind,
                       "re": float(np.real(a)), "im": float(np.imag(a))}
                      for r, a in zip(self.modes, self.coefficients)],
            "residual": float(self.residual),
            "condition": float(self.condition),
            "param_band": float(self.param_band),
        }
        p = out_dir / "decomposition.json"
        p.write_text(json.dumps(doc, indent=2, sort_keys=True))
        return p


def is_resonant_basis(basis, tol: float = 1e-2) -> bool:
    """|s| at the threshold node stays away from 0 exactly in the resonant case."""
    return bool(abs(basis.s_q[0]) > tol)


def domain_exclusions(config: ChargeTransferConfig, grid: SpatialGrid, bases=None, width: float = 0.3) -> list:
    """(k0, width) intervals where the input profile must vanish.

    For every non-resonant center c, phi_c has to vanish near v_c/2 (its own
    synthesis and the division in the step that produces it).  The condition
    is pulled back to phi_1 through the mirrors k -> v_j - k of the
    intermediate steps.
    """
    bases = _bases(config, grid, bases)
    pts = []
    for c in range(config.m):  # 0-based center index
        if is_resonant_basis(bases[c]):
            continue
        A = {config.v[c] / 2}
        for j in range(c - 1, 0, -1):
            # the profile used at center j is a step through center j
            A = A | {config.v[j] - a for a in A}
        pts.extend(A)
    out = []
    for a in sorted(pts):
        if not any(abs(a - b) < 1e-12 for b, _ in out):
            out.append((float(a), width))
    return out


def default_param_band(config: ChargeTransferConfig, bases) -> float:
    """Largest |k| for the input profile such that every derived term stays in band."""
    band = min(b.k_band for b in bases)
    v = np.abs(config.v)
    growth = sum(v[1:]) if config.m > 1 else 0.0
    return float(band - growth - v.max() / 2 - 0.25)


def _param_index(grid: SpatialGrid, kp: float, exclude=()) -> np.ndarray:
    keep = np.abs(grid.k) <= kp
    for a, w in exclude:
        keep &= np.abs(grid.k - a) > w
    return np.nonzero(keep)[0]


def s_columns(config, grid, bases, t, idx, literal=False):
    """Dense matrix whose columns are S(e_j)(t) for the parameter unit vectors."""
    nc = 1 if config.model == "scalar" else 2
    cols = []
    for comp in range(nc):
        for j in idx:
            e = np.zeros((nc, grid.n), complex)
            e[comp, j] = 1.0
            prof = build_profile_sequence(e, config, grid, bases, literal)
            cols.append(np.atleast_2d(evaluate_S(prof, config, t, grid, bases)).ravel())
    return np.array(cols).T


def decompose(f, config: ChargeTransferConfig, grid: SpatialGrid, t: float = 0.0, bases=None, spectra=None,
              param_band: float | None = None, exclude=(), L_min: float = L_MIN, literal: bool = False,
              with_modes: bool = True) -> Decomposition:
    """Split f into S(phi)(t) plus traveling discrete modes by dense least squares.

    ``exclude`` lists (k0, width) intervals removed from the profile's support,
    used to keep the recursion away from zeros of the transmission coefficient.
    Kernel-chain content is reported in the kernel/generalized families only.
    """
    if config.m > 1 and config.separation < L_min:
        raise ConfigError(f"centers closer than L_min = {L_min}; decomposition not attempted")
    bases = _bases(config, grid, bases)
    f = np.atleast_2d(np.asarray(f, complex))
    nc = 1 if config.model == "scalar" else 2
    if f.shape != (nc, grid.n):
        raise ConfigError(f"field must have shape ({nc}, {grid.n})")
    kp = default_param_band(config, bases) if param_band is None else float(param_band)
    if kp <= 0:
        raise ConfigError("velocities too large for the transform band")
    exclude = list(exclude) + domain_exclusions(config, grid, bases)
    idx = _param_index(grid, kp, exclude)
    A = s_columns(config, grid, bases, t, idx, literal)
    refs = mode_catalog(config, spectra) if with_modes else []
    if refs:
        M = np.array([np.atleast_2d(mode_field(config, r, t, grid)).ravel() for r in refs]).T
        A = np.hstack([A, M])
    b = f.ravel()
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    rec = A @ sol
    nb = np.linalg.norm(b)
    res = float(np.linalg.norm(b - rec) / nb) if nb > 0 else 0.0
    npar = idx.size * nc
    phi = np.zeros((nc, grid.n), complex)
    for comp in range(nc):
        phi[comp, idx] = sol[comp * idx.size:(comp + 1) * idx.size]
    prof = build_profile_sequence(phi, config, grid, bases, literal)
    coef = sol[npar:]
    if res > 1e-3:
        log.warning("decomposition residual %.3e above 1e-3 (separation %.3g)", res, config.separation)
    return Decomposition(prof, refs, coef, res, cond, kp)


def reconstruct(dec: Decomposition, config, grid, t: float = 0.0, bases=None) -> np.ndarray:
    out = np.atleast_2d(evaluate_S(dec.profile, config, t, grid, bases)).astype(complex)
    for r, a in zip(dec.modes, dec.coefficients):
        out = out + a * np.atleast_2d(mode_field(config, r, t, grid))
    return out[0] if config.model == "scalar" else out


# ---------------------------------------------------------------------------
# test profiles and coercivity

def bump_profile(grid: SpatialGrid, center: float, half_width: float, phase_shift: float = 0.0,
                 amplitude: complex = 1.0) -> np.ndarray:
    """Smooth compactly supported bump in k times e^{-i k phase_shift}."""
    u = (grid.k - center) / half_width
    out = np.zeros(grid.n, complex)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return amplitude * out * np.exp(-1j * grid.k * phase_shift)


def random_profile(grid: SpatialGrid, rng: np.random.Generator, kp: float, ncomp: int = 1,
                   n_bumps: int = 3, exclude=()) -> np.ndarray:
    """Sum of random bumps inside |k| < kp avoiding the excluded intervals."""
    out = np.zeros((ncomp, grid.n), complex)
    for c in range(ncomp):
        placed = 0
        tries = 0
        while placed < n_bumps and tries < 1000:
            tries += 1
            hw = rng.uniform(0.6, 1.2)
            k0 = rng.uniform(-kp + hw, kp - hw)
            if any(abs(k0 - a) < w + hw for a, w in exclude):
                continue
            amp = rng.normal() + 1j * rng.normal()
            out[c] += bump_profile(grid, k0, hw, rng.uniform(-6, 6), amp)
            placed += 1
    return out


def _sobolev(f, grid, n) -> float:
    from .core_grid import dft
    F = dft(np.atleast_2d(f), grid)
    return k_norm((1 + grid.k**2) ** (n / 2) * F, grid)


def coercivity_report(config: ChargeTransferConfig, grid: SpatialGrid, bases=None, n_samples: int = 50,
                      seed: int = 0, orders=(0, 1, 2), exclude=()) -> dict:
    """Ratios max_l ||<k>^n phi_l|| / ||S(phi)(0)||_{H^n} over random profiles."""
    bases = _bases(config, grid, bases)
    kp = default_param_band(config, bases)
    rng = np.random.default_rng(seed)
    nc = 1 if config.model == "scalar" else 2
    exclude = list(exclude) + domain_exclusions(config, grid, bases)
    ratios = {n: [] for n in orders}
    for _ in range(n_samples):
        phi = random_profile(grid, rng, kp, nc, exclude=exclude)
        prof = build_profile_sequence(phi, config, grid, bases)
        S0 = evaluate_S(prof, config, 0.0, grid, bases)
        for n in orders:
            w = (1 + grid.k**2) ** (n / 2)
            num = max(k_norm(w * prof.phi[l], grid) for l in range(prof.m))
            ratios[n].append(num / _sobolev(S0, grid, n))
    out = {}
    for n, r in ratios.items():
        r = np.array(r)
        out[f"H{n}"] = {"min": float(r.min()), "max": float(r.max()), "spread": float(r.max() / r.min())}
    return out


def norm_comparability(profile: PhiProfile, config, grid, times, bases=None) -> dict:
    """||S(phi)(t)||_2 / ||S(phi)(0)||_2 over the given times; C = max(max, 1/min)."""
    bases = _bases(config, grid, bases)
    n0 = lp_norm(np.atleast_2d(evaluate_S(profile, config, 0.0, grid, bases)), grid)
    r = np.array([lp_norm(np.atleast_2d(evaluate_S(profile, config, t, grid, bases)), grid) / n0 for t in times])
    return {"ratios": r.tolist(), "C": float(max(r.max(), 1.0 / r.min()))}
