"""Direct time integration of the charge-transfer equation.

Convention: i psi_t = H(t) psi.  Scalar H = -d^2 + sum_l V_l(x - v_l t - y_l);
matrix H = sigma_3 (-d^2) + sum_l exp(i Theta_l sigma_3) V_l exp(-i Theta_l sigma_3)
with V_l = [[U, -W], [W, -U]] evaluated in the co-moving variable.  Traveling
modes therefore carry the factor exp(-i lam t).

The integrator is Strang splitting: exact free flow in k-space and an exact
pointwise exponential of the potential at the step midpoint.  Adjacent free
half steps are merged, so one FFT pair is spent per step.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import _kernels
from .core_grid import SpatialGrid, default_grid
from .dispersive_map import (ModeRef, build_profile_sequence, center_spectra, evaluate_S, mode_catalog,
                             mode_field)
from .errors import ConfigError, NumericalError
from .potentials import ChargeTransferConfig, matrix_total_entries, scalar_total_potential

DT_PHASE_MAX = 1.0  # largest potential phase allowed per step
GROWTH_SLACK = 1.5
GRAM_COND_MAX = 1e6
MATRIX_ENVELOPE = 10.0  # matrix flows are not isometric; allow (1+|t|) * this


# ---------------------------------------------------------------------------
# trajectories

@dataclass
class Trajectory:
    grid: SpatialGrid
    config: ChargeTransferConfig
    times: np.ndarray
    fields: np.ndarray  # (ns, ncomp, n)
    dt: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def ncomp(self) -> int:
        return self.fields.shape[1]

    def at(self, i: int) -> np.ndarray:
        f = self.fields[i]
        return f[0] if self.ncomp == 1 else f

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.fields) ** 2, axis=(1, 2)) * self.grid.dx)

    def to_csv(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        x = self.grid.x
        for i, t in enumerate(self.times):
            f = self.fields[i]
            f2 = f[1] if self.ncomp == 2 else np.zeros_like(f[0])
            cols = np.column_stack([x, f[0].real, f[0].imag, f2.real, f2.imag])
            np.savetxt(out / f"psi_{i:04d}.csv", cols, delimiter=",", fmt="%.17e",
                       header="x,re_psi1,im_psi1,re_psi2,im_psi2", comments="")
        meta = {
            "config_hash": self.config.digest(),
            "config": self.config.to_dict(),
            "dt": self.dt,
            "grid": self.grid.to_dict(),
            "times": [float(t) for t in self.times],
            "diagnostics": self.diagnostics,
        }
        (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
        return out


def _as_field(psi0, config: ChargeTransferConfig, grid: SpatialGrid) -> np.ndarray:
    f = np.asarray(psi0, complex)
    nc = 2 if config.model == "matrix" else 1
    f = np.atleast_2d(f)
    if f.shape != (nc, grid.n):
        raise ConfigError(f"initial field must have shape {(nc, grid.n) if nc == 2 else (grid.n,)}, got {np.shape(psi0)}")
    return f.copy()


def potential_rate(config: ChargeTransferConfig, grid: SpatialGrid) -> float:
    """Largest frequency the potential step has to resolve."""
    if config.model == "scalar":
        return float(np.max(np.abs(scalar_total_potential(config, 0.0, grid.x))))
    a, b, c = matrix_total_entries(config, 0.0, grid.x)
    # moving phases exp(2i Theta) rotate at 2 omega + v^2 / 2 in time
    rot = max(2 * cen.omega + 0.5 * cen.v**2 for cen in config.centers)
    return float(np.max(np.sqrt(np.abs(a * a + b * c)))) + rot


def check_dt(config: ChargeTransferConfig, dt: float, grid: SpatialGrid) -> float:
    """Raise if |dt| times the potential rate exceeds DT_PHASE_MAX.

    The free flow is exact for any dt, so only the potential step limits the
    step size; the splitting error is O(dt^2 |[d^2, V]|).
    """
    rate = potential_rate(config, grid)
    if abs(dt) * rate > DT_PHASE_MAX:
        raise NumericalError(f"dt too large: |dt| * rate = {abs(dt) * rate:.3g} > {DT_PHASE_MAX} "
                             f"(rate {rate:.3g}); use |dt| <= {DT_PHASE_MAX / rate:.3g}")
    return rate


def _unstable_rate(config: ChargeTransferConfig) -> float:
    if config.model == "scalar":
        return 0.0
    lam = [abs(ref.lam.imag) for ref in mode_catalog(config)]
    return max(lam, default=0.0)


def _h1(f: np.ndarray, grid: SpatialGrid) -> float:
    F = np.fft.fft(f, axis=-1)
    w = 1.0 + grid.k_fft**2
    return float(np.sqrt(np.sum(w * np.abs(F) ** 2) * grid.dx / grid.n))


def propagate(config: ChargeTransferConfig, psi0, t_final: float, dt: float, grid: SpatialGrid | None = None,
              t0: float = 0.0, sample_times=None, n_samples: int = 11, growth_rate: float | None = None,
              check: bool = True) -> Trajectory:
    """Integrate from t0 to t_final (either direction) and sample the field.

    ``sample_times`` defaults to n_samples equispaced times including both
    ends.  Every sample is hit exactly; the step inside each sample interval
    is the largest one not exceeding |dt|.  The norm is watched against
    exp(GROWTH_SLACK * growth_rate * |t - t0|), times a linear envelope for
    matrix flows; growth_rate defaults to the largest |Im lam| of the
    configuration.
    """
    grid = grid or default_grid()
    if dt == 0 or not np.isfinite(dt):
        raise ConfigError("dt must be a nonzero finite number")
    if (t_final - t0) * dt < 0:
        dt = -dt
    if check:
        check_dt(config, dt, grid)
    psi = _as_field(psi0, config, grid)
    if sample_times is None:
        sample_times = np.linspace(t0, t_final, n_samples)
    ts = np.asarray(sample_times, float)
    d = np.sign(t_final - t0) or 1.0
    if np.any(np.diff(ts) * d < 0) or abs(ts[0] - t0) > 1e-12:
        raise ConfigError("sample_times must start at t0 and run monotonically towards t_final")
    rate = _unstable_rate(config) if growth_rate is None else growth_rate
    k2 = grid.k_fft**2
    scalar = config.model == "scalar"
    signs = np.array([[1.0]]) if scalar else np.array([[1.0], [-1.0]])
    n0 = float(np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx))
    h1_0 = _h1(psi, grid)

    if scalar:
        envelope = lambda t: 1 + 1e-6
    else:
        envelope = lambda t: MATRIX_ENVELOPE * (1 + abs(t - t0))
    out = [psi.copy()]
    h1 = [h1_0]
    t = t0
    for t_next in ts[1:]:
        span = t_next - t
        nsub = max(1, int(math.ceil(abs(span) / abs(dt) - 1e-9)))
        h = span / nsub
        half = np.exp(-0.5j * h * signs * k2)
        full = half * half
        F = np.fft.fft(psi, axis=-1) * half
        for j in range(nsub):
            psi = np.fft.ifft(F, axis=-1)
            tm = t + (j + 0.5) * h
            if scalar:
                psi[0] *= np.exp(-1j * h * scalar_total_potential(config, tm, grid.x))
            else:
                a, b, c = matrix_total_entries(config, tm, grid.x)
                p1, p2 = _kernels.expm2_apply(psi[0], psi[1], a.astype(complex), b, c, h)
                psi = np.stack([p1, p2])
            F = np.fft.fft(psi, axis=-1) * (full if j < nsub - 1 else half)
        psi = np.fft.ifft(F, axis=-1)
        t = t_next
        nrm = float(np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx))
        allowed = n0 * math.exp(GROWTH_SLACK * rate * abs(t - t0)) * envelope(t) + 1e-300
        if not np.isfinite(nrm) or nrm > allowed:
            raise NumericalError(f"instability: norm {nrm:.3e} exceeds allowed {allowed:.3e} at t={t:.4g}; "
                                 "dt too large or unstable modes present")
        out.append(psi.copy())
        h1.append(_h1(psi, grid))
    fields = np.array(out)
    norms = np.sqrt(np.sum(np.abs(fields) ** 2, axis=(1, 2)) * grid.dx)
    diag = {
        "steps_dt": float(dt),
        "norm_initial": n0,
        "norm_drift_max": float(np.max(np.abs(norms / n0 - 1))) if n0 > 0 else 0.0,
        "h1_ratio_min": float(min(h1) / h1_0) if h1_0 > 0 else 1.0,
        "h1_ratio_max": float(max(h1) / h1_0) if h1_0 > 0 else 1.0,
        "growth_rate": rate,
    }
    return Trajectory(grid, config, ts, fields, float(dt), diag)


# ---------------------------------------------------------------------------
# mode coefficients

def pairing(f: np.ndarray, g: np.ndarray, grid: SpatialGrid) -> complex:
    """<f, sigma_3 g> = int f conj(g) with the sign flip on the second component."""
    f = np.atleast_2d(f)
    g = np.atleast_2d(g)
    s = np.sum(f[0] * np.conj(g[0]))
    if f.shape[0] == 2:
        s -= np.sum(f[1] * np.conj(g[1]))
    return complex(s * grid.dx)


@dataclass
class ModeCoefficients:
    modes: list  # ModeRef
    a: np.ndarray
    gram_condition: float

    def get(self, center: int, index: int) -> complex:
        for ref, a in zip(self.modes, self.a):
            if ref.center == center and ref.index == index:
                return complex(a)
        raise KeyError((center, index))


def _mode_fields(config, refs, t, grid):
    return [np.atleast_2d(mode_field(config, r, t, grid)) for r in refs]


def gram_matrix(config, refs, t, grid) -> np.ndarray:
    F = _mode_fields(config, refs, t, grid)
    return np.array([[pairing(F[j], F[i], grid) for j in range(len(F))] for i in range(len(F))])


def mode_coefficients(psi, t: float, config: ChargeTransferConfig, grid: SpatialGrid | None = None,
                      spectra=None, refs=None) -> ModeCoefficients:
    """Biorthogonal coefficients of psi on all traveling discrete modes at time t.

    The coefficient of a mode is its weight on the field without the internal
    time factor, so for an exact traveling mode a(t) = a(0) exp(-i lam t).
    """
    grid = grid or default_grid()
    refs = refs if refs is not None else mode_catalog(config, spectra)
    if not refs:
        return ModeCoefficients([], np.zeros(0, complex), 1.0)
    F = _mode_fields(config, refs, t, grid)
    G = np.array([[pairing(F[j], F[i], grid) for j in range(len(F))] for i in range(len(F))])
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond) or cond > GRAM_COND_MAX:
        raise NumericalError(f"mode Gram condition {cond:.3e} > {GRAM_COND_MAX:.0e}; "
                             "centers are not separated enough at this time")
    b = np.array([pairing(psi, Fi, grid) for Fi in F])
    return ModeCoefficients(list(refs), np.linalg.solve(G, b), cond)


def mode_generator(config: ChargeTransferConfig, refs, grid: SpatialGrid) -> np.ndarray:
    """Matrix Lam with H(mode_j) = sum_i Lam_ij mode_i, read off at t = 0."""
    F = _mode_fields(config, refs, 0.0, grid)
    G = np.array([[pairing(F[j], F[i], grid) for j in range(len(F))] for i in range(len(F))])
    HF = []
    for r, f in zip(refs, F):
        HF.append(np.atleast_2d(mode_field(config, r, 0.0, grid, "Y")) if r.kind == "generalized" else r.lam * f)
    P = np.array([[pairing(HF[j], F[i], grid) for j in range(len(F))] for i in range(len(F))])
    Lam = np.linalg.solve(G, P)
    Lam[np.abs(Lam) < 1e-10] = 0.0
    return Lam


# ---------------------------------------------------------------------------
# fits and mode ODE residuals

@dataclass
class ExpFit:
    beta: float
    A: float
    r2: float
    beta_ci: tuple
    n: int

    def to_dict(self):
        return {"beta": self.beta, "A": self.A, "r2": self.r2, "beta_ci95": list(self.beta_ci), "n": self.n}


def fit_exponential(t, y, floor: float = 0.0) -> ExpFit:
    """Fit y ~ A exp(-beta t) by regression of log y; points at or below floor are dropped."""
    t = np.asarray(t, float)
    y = np.abs(np.asarray(y, float))
    keep = y > max(floor, 1e-300)
    if keep.sum() < 3:
        return ExpFit(float("nan"), float("nan"), float("nan"), (float("nan"), float("nan")), int(keep.sum()))
    res = stats.linregress(t[keep], np.log(y[keep]))
    q = stats.t.ppf(0.975, keep.sum() - 2)
    beta = -res.slope
    ci = (beta - q * res.stderr, beta + q * res.stderr)
    return ExpFit(float(beta), float(np.exp(res.intercept)), float(res.rvalue**2), tuple(map(float, ci)), int(keep.sum()))


def derivative4(y: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central difference along axis 0; the two end samples on each side are NaN."""
    y = np.asarray(y)
    d = np.full(y.shape, np.nan, dtype=np.result_type(y, float))
    if y.shape[0] >= 5:
        d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    return d


def trajectory_coefficients(traj: Trajectory, spectra=None, refs=None) -> tuple[list, np.ndarray, np.ndarray]:
    refs = refs if refs is not None else mode_catalog(traj.config, spectra)
    A = np.array([mode_coefficients(traj.at(i), t, traj.config, traj.grid, refs=refs).a
                  for i, t in enumerate(traj.times)])
    conds = np.array([float(np.linalg.cond(gram_matrix(traj.config, refs, t, traj.grid))) for t in traj.times[:1]])
    return refs, A.reshape(len(traj.times), len(refs)), conds


def mode_ode_residual(traj: Trajectory, config: ChargeTransferConfig | None = None, spectra=None) -> dict:
    """Residual b(t) = i a' - Lam a of the mode coefficients along a trajectory.

    Lam is diagonal with the eigenvalues except for generalized-kernel
    columns.  Sample times must be equispaced.  Returns the residual series
    and an exponential fit per mode.
    """
    config = config or traj.config
    h = np.diff(traj.times)
    if h.size < 4 or np.max(np.abs(h - h[0])) > 1e-9 * abs(h[0]):
        raise ConfigError("mode_ode_residual needs at least 5 equispaced samples")
    refs, A, _ = trajectory_coefficients(traj, spectra)
    Lam = mode_generator(config, refs, traj.grid)
    dA = derivative4(A, h[0])
    B = 1j * dA - A @ Lam.T
    sl = slice(2, -2)
    out = {"times": traj.times[sl], "modes": refs, "residual": B[sl], "coefficients": A, "generator": Lam, "fits": []}
    for j in range(len(refs)):
        out["fits"].append(fit_exponential(traj.times[sl], np.abs(B[sl, j])))
    return out


# ---------------------------------------------------------------------------
# backward construction of wave-operator solutions

@dataclass
class WaveSolution:
    psi0: np.ndarray
    trajectory: Trajectory
    distances: np.ndarray
    fit: ExpFit
    shooting_passes: int
    unstable_residual: float


def construct_wave_solution(phi, config: ChargeTransferConfig, T_anchor: float, grid: SpatialGrid | None = None,
                            dt: float = 0.01, bases=None, n_samples: int = 21, max_shooting: int = 3,
                            shoot_tol: float = 1e-8, literal: bool = False, check_separation: bool = True) -> WaveSolution:
    """Propagate S(phi)(T_anchor) back to t = 0 and re-propagate forward.

    Modes with Im lam > 0 grow forward, so their content at t = 0 is removed
    by the mode pairing; the pass is repeated until their coefficients at
    T_anchor fall below shoot_tol (relative), at most max_shooting times.
    """
    grid = grid or default_grid()
    if check_separation and config.m > 1:
        reach = float(np.min(np.abs(np.diff(config.v)))) * T_anchor + config.separation
        if reach < 30:
            raise ConfigError(f"min dv * T + min dy = {reach:.3g} < 30; increase T_anchor")
    profile = build_profile_sequence(phi, config, grid, bases, literal=literal)
    S_T = np.atleast_2d(evaluate_S(profile, config, T_anchor, grid, bases))
    refs = mode_catalog(config) if config.model == "matrix" else []
    unstable = [r for r in refs if r.lam.imag > 1e-8]
    back = propagate(config, S_T, 0.0, -abs(dt), grid, t0=T_anchor, n_samples=2,
                     growth_rate=_unstable_rate(config))
    psi0 = np.atleast_2d(back.at(-1))
    times = np.linspace(0.0, T_anchor, n_samples)
    passes = 0
    resid = 0.0
    while True:
        if unstable:
            mc = mode_coefficients(psi0, 0.0, config, grid, refs=refs)
            for r, a in zip(mc.modes, mc.a):
                if r.lam.imag > 1e-8:
                    psi0 = psi0 - a * np.atleast_2d(mode_field(config, r, 0.0, grid))
        fwd = propagate(config, psi0, T_anchor, abs(dt), grid, sample_times=times)
        if not unstable:
            break
        mcT = mode_coefficients(fwd.at(-1), T_anchor, config, grid, refs=refs)
        scale = float(np.sqrt(np.sum(np.abs(S_T) ** 2) * grid.dx))
        resid = max(abs(a) for r, a in zip(mcT.modes, mcT.a) if r.lam.imag > 1e-8) / scale
        passes += 1
        if resid <= shoot_tol:
            break
        if passes >= max_shooting:
            raise NumericalError(f"unstable content {resid:.2e} remains after {passes} shooting passes; "
                                 "reduce T_anchor or dt")
    dist = np.array([np.sqrt(np.sum(np.abs(fwd.fields[i] - np.atleast_2d(evaluate_S(profile, config, t, grid, bases))) ** 2)
                             * grid.dx) for i, t in enumerate(times)])
    half = times <= 0.5 * T_anchor + 1e-12
    fit = fit_exponential(times[half], dist[half])
    return WaveSolution(psi0[0] if config.model == "scalar" else psi0, fwd, dist, fit, passes, resid)


# ---------------------------------------------------------------------------
# generalized kernel

def generalized_mode_check(traj: Trajectory, config: ChargeTransferConfig | None = None, center: int = 1,
                           index: int | None = None, spectra=None) -> dict:
    """Fit the projected trajectory onto (Z1, Y) of one generalized pair.

    With i psi_t = H psi and H Z1 = Y the exact solution started at
    alpha Z1 + beta Y is alpha Z1 + (beta - i alpha t) Y, so the reported
    slope is d(i beta)/dt divided by alpha; it equals 1 for a generalized
    pair and 0 for a pure kernel vector.
    """
    config = config or traj.config
    refs = mode_catalog(config, spectra)
    gens = [r for r in refs if r.kind == "generalized" and r.center == center]
    if index is not None:
        gens = [r for r in gens if r.index == index]
    if not gens:
        raise ConfigError(f"center {center} has no generalized-kernel vector")
    ref = gens[0]
    cen = config.centers[center - 1]
    alpha = np.empty(len(traj.times), complex)
    beta = np.empty(len(traj.times), complex)
    for i, t in enumerate(traj.times):
        Z1 = np.atleast_2d(mode_field(config, ref, t, traj.grid, "Z"))
        Y = np.atleast_2d(mode_field(config, ref, t, traj.grid, "Y"))
        # least squares on the co-moving window around the center
        near = np.abs(traj.grid.x - cen.position(t)) <= 0.5 * max(config.separation, 20.0)
        B = np.stack([Z1[:, near].ravel(), Y[:, near].ravel()], axis=1)
        coef, *_ = np.linalg.lstsq(B, np.atleast_2d(traj.fields[i])[:, near].ravel(), rcond=None)
        alpha[i], beta[i] = coef
    a0 = alpha[0] if abs(alpha[0]) > 1e-12 else 1.0
    res = stats.linregress(traj.times, (1j * beta / a0).real)
    return {"slope": float(res.slope), "intercept": float(res.intercept), "r2": float(res.rvalue**2),
            "alpha_drift": float(np.max(np.abs(alpha - alpha[0]))), "times": traj.times, "alpha": alpha, "beta": beta,
            "mode": ref}
