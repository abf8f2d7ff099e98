"""Hardy-space projections on a uniform line and the interaction measurement.

P_+ keeps the strictly positive discrete frequencies (boundary values of
H^2 of the upper half plane), P_- keeps the rest, so the zero frequency
belongs to P_-.  Written with the e^{+iky} transform convention the roles
of the half-lines are swapped, which is why P_+ is sometimes described as
integrating over k <= 0.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core_grid import SpatialGrid, lp_norm


def _split(f, grid: SpatialGrid):
    f = grid.check(np.asarray(f))
    F = np.fft.fft(f, axis=-1)
    pos = grid.k_fft > 0
    return F, pos


def p_plus(f, grid: SpatialGrid) -> np.ndarray:
    F, pos = _split(f, grid)
    return np.fft.ifft(np.where(pos, F, 0.0), axis=-1)


def p_minus(f, grid: SpatialGrid) -> np.ndarray:
    F, pos = _split(f, grid)
    return np.fft.ifft(np.where(pos, 0.0, F), axis=-1)


def interaction_norm(y0: float, coeff: Callable, h0: float, f, grid: SpatialGrid, sign: str = "+") -> float:
    """|| P_-( e^{i y0 k} c(k + h0) f(k) ) || for sign '+', with f = P_+ f, and
    || P_+( e^{-i y0 k} c(k + h0) f(k) ) || for sign '-', with f = P_- f.

    ``grid`` is the line carrying the variable k; ``coeff`` evaluates the
    coefficient (r or s) at arbitrary real points, so no interpolation enters.
    """
    if y0 <= 0:
        raise ValueError("y0 must be positive")
    k = grid.x
    c = np.asarray(coeff(k + h0))
    if sign == "+":
        return lp_norm(p_minus(np.exp(1j * y0 * k) * c * f, grid), grid)
    if sign == "-":
        return lp_norm(p_plus(np.exp(-1j * y0 * k) * c * f, grid), grid)
    raise ValueError("sign must be '+' or '-'")


def decay_fit(y0s, norms):
    """Least-squares line through (y0, log norm): (slope, intercept, R^2)."""
    y = np.log(np.asarray(norms, float))
    x = np.asarray(y0s, float)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ np.array([slope, icpt])
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - fit) ** 2) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), float(r2)
