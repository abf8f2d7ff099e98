"""Uniform periodic grids, the unitary DFT pair, norms and moving windows."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError

SQRT2PI = np.sqrt(2.0 * np.pi)

# default box: width 128*pi puts the dual k-grid on multiples of 1/64, so
# half-velocities that are multiples of 1/64 land exactly on nodes
DEFAULT_N = 4096
DEFAULT_HALF_WIDTH = 64.0 * np.pi


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ConfigError(f"grid size must be a power of two, got {self.n}")
        if not self.x_max > self.x_min:
            raise ConfigError("x_max must exceed x_min")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        return self.dk * np.arange(-self.n // 2, self.n // 2)

    @cached_property
    def k_fft(self) -> np.ndarray:
        """Wave numbers in numpy FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape[-1] != self.n:
            raise ConfigError(f"field has {f.shape[-1]} samples, grid has {self.n}")
        if not np.all(np.isfinite(f)):
            raise ConfigError("field contains non-finite samples")
        return f

    def resized(self, factor: int) -> "SpatialGrid":
        """Same spacing, box enlarged by an integer power-of-two factor."""
        c = 0.5 * (self.x_min + self.x_max)
        half = 0.5 * self.length * factor
        return SpatialGrid(c - half, c + half, self.n * factor)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n": self.n}


def default_grid(n: int = DEFAULT_N, half_width: float = DEFAULT_HALF_WIDTH) -> SpatialGrid:
    return SpatialGrid(-half_width, half_width, n)


def dft(f: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """f_hat(k_j) = dx/sqrt(2 pi) * sum_m f(x_m) exp(-i k_j x_m), ascending k."""
    f = grid.check(f)
    raw = np.fft.fftshift(np.fft.fft(f, axis=-1), axes=-1)
    return raw * np.exp(-1j * grid.k * grid.x_min) * (grid.dx / SQRT2PI)


def idft(fh: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    fh = grid.check(fh)
    raw = fh * np.exp(1j * grid.k * grid.x_min) * (SQRT2PI / grid.dx)
    return np.fft.ifft(np.fft.ifftshift(raw, axes=-1), axis=-1)


def pointwise_modulus(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f)
    if f.ndim == 1:
        return np.abs(f)
    return np.sqrt(np.sum(np.abs(f) ** 2, axis=0))


def lp_norm(f: np.ndarray, grid: SpatialGrid, p=2) -> float:
    a = pointwise_modulus(grid.check(f))
    if p in (np.inf, "inf"):
        return float(a.max())
    p = float(p)
    return float((np.sum(a**p) * grid.dx) ** (1.0 / p))


def k_norm(fh: np.ndarray, grid: SpatialGrid) -> float:
    """L2 norm of k-samples on the dual grid."""
    return float(np.sqrt(np.sum(pointwise_modulus(fh) ** 2) * grid.dk))


def japanese(z: np.ndarray) -> np.ndarray:
    return np.sqrt(1.0 + np.asarray(z) ** 2)


def weighted_norm(f, grid: SpatialGrid, center=0.0, velocity=0.0, t=0.0, exponent=1.0, p=2) -> float:
    """|| <x - center - velocity t>^exponent f ||_p with <z> = sqrt(1 + z^2)."""
    if p not in (1, 2, np.inf, "inf"):
        raise ConfigError(f"p must be 1, 2 or inf, got {p}")
    if exponent < 0:
        raise ConfigError("exponent must be non-negative")
    w = japanese(grid.x - center - velocity * t) ** exponent
    return lp_norm(w * np.asarray(f), grid, p)


def window_boundaries(y, v, t: float) -> np.ndarray:
    y = np.asarray(y, float)
    v = np.asarray(v, float)
    if np.any(np.diff(y) >= 0) or np.any(np.diff(v) >= 0):
        raise ConfigError("centers must satisfy y_1 > ... > y_m and v_1 > ... > v_m")
    return 0.5 * (y[:-1] + y[1:] + t * (v[:-1] + v[1:]))


def localization_windows(y, v, t: float, grid: SpatialGrid) -> np.ndarray:
    """Sharp indicators chi_l, shape (m, n); window 1 is the rightmost.

    A node sitting exactly on a boundary belongs to the window on its left.
    """
    b = window_boundaries(y, v, t)
    m = len(b) + 1
    x = grid.x
    chi = np.zeros((m, grid.n))
    upper = np.concatenate([[np.inf], b])
    lower = np.concatenate([b, [-np.inf]])
    for ell in range(m):
        hi = upper[ell]
        lo = lower[ell]
        mask = (x > lo) & ((x <= hi) if np.isfinite(hi) else True)
        chi[ell, mask] = 1.0
    return chi
