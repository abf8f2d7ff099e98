"""Potential families, traveling centers and charge-transfer configurations."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .core_grid import SpatialGrid
from .errors import ConfigError

FAMILIES = ("zero", "poschl_teller", "gaussian", "sech_square", "table")


def _sech2(z):
    z = np.abs(z)
    e = np.exp(-2.0 * z)
    return 4.0 * e / (1.0 + e) ** 2


@dataclass(frozen=True)
class ScalarPotentialSpec:
    """Even real potential from a built-in family or a sampled table.

    Families and parameters:
      zero
      poschl_teller  n (integer depth): -n(n+1) sech^2(x)
      gaussian       a, sigma: a exp(-x^2 / (2 sigma^2))
      sech_square    a, rate: a sech^2(rate x)
      table          x, values, gamma: samples on x >= 0 (evenly extended)
    """

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown potential family {self.family!r}; expected one of {FAMILIES}")
        p = self.params
        try:
            if self.family == "poschl_teller":
                n = p.get("n", p.get("depth"))
                if n is None or int(n) != n or int(n) < 0:
                    raise ConfigError("poschl_teller needs a non-negative integer depth 'n'")
            elif self.family == "gaussian":
                if float(p.get("sigma", 1.0)) <= 0:
                    raise ConfigError("gaussian width 'sigma' must be positive")
                float(p["a"])
            elif self.family == "sech_square":
                if float(p.get("rate", 1.0)) <= 0:
                    raise ConfigError("sech_square 'rate' must be positive")
                float(p["a"])
            elif self.family == "table":
                self._validate_table()
        except KeyError as exc:
            raise ConfigError(f"{self.family}: missing parameter {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{self.family}: bad parameter ({exc})") from None

    # constructors -----------------------------------------------------
    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def poschl_teller(cls, n: int = 1):
        return cls("poschl_teller", {"n": int(n)})

    @classmethod
    def gaussian(cls, a: float, sigma: float = 1.0):
        return cls("gaussian", {"a": float(a), "sigma": float(sigma)})

    @classmethod
    def sech_square(cls, a: float, rate: float = 1.0):
        return cls("sech_square", {"a": float(a), "rate": float(rate)})

    @classmethod
    def table(cls, x, values, gamma: float):
        return cls("table", {"x": list(map(float, x)), "values": list(map(float, values)), "gamma": float(gamma)})

    # evaluation -------------------------------------------------------
    @property
    def gamma(self) -> float:
        """Declared exponential decay rate, capped at 1."""
        if self.family == "sech_square":
            return min(1.0, 2.0 * float(self.params.get("rate", 1.0)))
        if self.family == "table":
            return min(1.0, float(self.params["gamma"]))
        return 1.0

    @property
    def x_max(self) -> float:
        return 25.0 / self.gamma

    @property
    def is_zero(self) -> bool:
        if self.family == "zero":
            return True
        if self.family == "poschl_teller":
            return int(self.params.get("n", self.params.get("depth"))) == 0
        if self.family in ("gaussian", "sech_square"):
            return float(self.params["a"]) == 0.0
        return not np.any(np.asarray(self.params["values"]))

    def _table_spline(self):
        cached = self.__dict__.get("_spline")
        if cached is None:
            tx = np.asarray(self.params["x"], float)
            tv = np.asarray(self.params["values"], float)
            start = 1 if tx[0] == 0.0 else 0
            xs = np.concatenate([-tx[start:][::-1], tx])
            vs = np.concatenate([tv[start:][::-1], tv])
            cached = (CubicSpline(xs, vs), tx[-1])
            object.__setattr__(self, "_spline", cached)
        return cached

    def _validate_table(self):
        x = np.asarray(self.params["x"], float)
        v = np.asarray(self.params["values"], float)
        g = float(self.params["gamma"])
        if x.ndim != 1 or x.shape != v.shape or x.size < 8:
            raise ConfigError("table potential needs matching 1-D 'x' and 'values' with >= 8 samples")
        if np.any(x < 0) or np.any(np.diff(x) <= 0):
            raise ConfigError("table 'x' must be increasing and non-negative (even extension)")
        if not (0 < g):
            raise ConfigError("table 'gamma' must be positive")
        if x[-1] < 25.0 / min(g, 1.0):
            raise ConfigError("table must extend to at least 25/gamma")
        w = np.abs(v) * np.exp(g * x)
        head = w[x <= 1.0].max() if np.any(x <= 1.0) else w[0]
        if w.max() > 1e3 * max(head, 1e-300):
            raise ConfigError("table violates the declared exponential decay rate")

    def __call__(self, x) -> np.ndarray:
        x = np.abs(np.asarray(x, dtype=float))
        p = self.params
        f = self.family
        if f == "zero":
            return np.zeros_like(x)
        if f == "poschl_teller":
            n = int(p.get("n", p.get("depth")))
            return -n * (n + 1) * _sech2(x)
        if f == "gaussian":
            s = float(p.get("sigma", 1.0))
            return float(p["a"]) * np.exp(-0.5 * (x / s) ** 2)
        if f == "sech_square":
            return float(p["a"]) * _sech2(float(p.get("rate", 1.0)) * x)
        spline, top = self._table_spline()
        out = spline(x)
        out[x > top] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict, where: str = "potential"):
        if not isinstance(d, dict) or "family" not in d:
            raise ConfigError(f"{where}: expected an object with a 'family' field")
        params = d.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{where}.params: expected an object")
        try:
            return cls(d["family"], params)
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class MatrixPotentialSpec:
    """Blocks U, W of V = [[U, -W], [W, -U]] and the internal frequency omega."""

    U: ScalarPotentialSpec
    W: ScalarPotentialSpec
    omega: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError("matrix potential needs omega > 0")

    @property
    def gamma(self) -> float:
        return min(self.U.gamma, self.W.gamma)

    @property
    def x_max(self) -> float:
        return 25.0 / self.gamma

    @property
    def is_zero(self) -> bool:
        return self.U.is_zero and self.W.is_zero

    def to_dict(self) -> dict:
        return {"U": self.U.to_dict(), "W": self.W.to_dict()}


@dataclass(frozen=True)
class TravelingCenter:
    v: float = 0.0
    y: float = 0.0
    omega: float = 1.0
    gamma_phase: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError("center omega must be positive")

    def position(self, t):
        return self.y + self.v * t


@dataclass(frozen=True)
class ChargeTransferConfig:
    model: str
    potentials: tuple
    centers: tuple

    def __post_init__(self):
        if self.model not in ("scalar", "matrix"):
            raise ConfigError(f"model must be 'scalar' or 'matrix', got {self.model!r}")
        if len(self.potentials) != len(self.centers) or len(self.centers) == 0:
            raise ConfigError("need one potential per center and at least one center")
        kind = ScalarPotentialSpec if self.model == "scalar" else MatrixPotentialSpec
        for i, p in enumerate(self.potentials):
            if not isinstance(p, kind):
                raise ConfigError(f"centers[{i}].potential: expected {kind.__name__}")
        v = np.array([c.v for c in self.centers])
        y = np.array([c.y for c in self.centers])
        if np.any(np.diff(v) >= 0):
            raise ConfigError("velocities must be strictly decreasing: v_1 > v_2 > ... > v_m")
        if np.any(np.diff(y) >= 0):
            raise ConfigError("positions must be strictly decreasing: y_1 > y_2 > ... > y_m")

    @property
    def m(self) -> int:
        return len(self.centers)

    @property
    def v(self) -> np.ndarray:
        return np.array([c.v for c in self.centers])

    @property
    def y(self) -> np.ndarray:
        return np.array([c.y for c in self.centers])

    @property
    def separation(self) -> float:
        return float(np.min(-np.diff(self.y))) if self.m > 1 else np.inf

    @property
    def min_dv(self) -> float:
        return float(np.min(-np.diff(self.v))) if self.m > 1 else np.inf

    @property
    def gamma(self) -> float:
        return min(p.gamma for p in self.potentials)

    def to_dict(self) -> dict:
        out = []
        for p, c in zip(self.potentials, self.centers):
            out.append({"potential": p.to_dict(), "v": c.v, "y": c.y, "omega": c.omega, "gamma_phase": c.gamma_phase})
        return {"model": self.model, "centers": out}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ChargeTransferConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        model = d.get("model", "scalar")
        entries = d.get("centers")
        if not isinstance(entries, list) or not entries:
            raise ConfigError("config.centers: expected a non-empty list")
        pots, cents = [], []
        for i, e in enumerate(entries):
            where = f"centers[{i}]"
            if not isinstance(e, dict) or "potential" not in e:
                raise ConfigError(f"{where}: expected an object with a 'potential' field")
            try:
                c = TravelingCenter(float(e.get("v", 0.0)), float(e.get("y", 0.0)),
                                    float(e.get("omega", 1.0)), float(e.get("gamma_phase", 0.0)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}: {exc}") from None
            pd = e["potential"]
            if model == "matrix":
                if not isinstance(pd, dict) or "U" not in pd or "W" not in pd:
                    raise ConfigError(f"{where}.potential: matrix model needs 'U' and 'W'")
                p = MatrixPotentialSpec(ScalarPotentialSpec.from_dict(pd["U"], f"{where}.potential.U"),
                                        ScalarPotentialSpec.from_dict(pd["W"], f"{where}.potential.W"), c.omega)
            else:
                p = ScalarPotentialSpec.from_dict(pd, f"{where}.potential")
            pots.append(p)
            cents.append(c)
        return cls(model, tuple(pots), tuple(cents))


def scalar_config(potentials: Sequence[ScalarPotentialSpec], v: Sequence[float], y: Sequence[float]) -> ChargeTransferConfig:
    return ChargeTransferConfig("scalar", tuple(potentials), tuple(TravelingCenter(a, b) for a, b in zip(v, y)))


def matrix_config(potentials: Sequence[MatrixPotentialSpec], v, y, gamma_phase=None) -> ChargeTransferConfig:
    gp = gamma_phase if gamma_phase is not None else [0.0] * len(potentials)
    cents = tuple(TravelingCenter(a, b, p.omega, g) for a, b, p, g in zip(v, y, potentials, gp))
    return ChargeTransferConfig("matrix", tuple(potentials), cents)


def sample_potential(spec: ScalarPotentialSpec, grid: SpatialGrid) -> np.ndarray:
    return spec(grid.x)


def literal_phase(center: TravelingCenter, t: float, x) -> np.ndarray:
    """theta(t, x) = (v^2 + omega) t + 2 x v + gamma."""
    return (center.v**2 + center.omega) * t + 2.0 * np.asarray(x) * center.v + center.gamma_phase


def galilean_phase(center: TravelingCenter, t: float, x, with_omega: bool = True) -> np.ndarray:
    """Theta(t, x) = v x / 2 - v^2 t / 4 + omega t + gamma (the boost phase)."""
    th = 0.5 * center.v * np.asarray(x) - 0.25 * center.v**2 * t
    if with_omega:
        th = th + center.omega * t + center.gamma_phase
    return th


def moving_matrix_potential(config: ChargeTransferConfig, ell: int, t: float, grid: SpatialGrid,
                            convention: str = "literal") -> np.ndarray:
    """2x2 field of center ``ell`` (1-based) at time t, shape (2, 2, n).

    ``literal``: off-diagonal phases exp(+-i theta) with theta = (v^2+omega)t + 2xv + gamma.
    ``covariant``: exp(i Theta s3) V0 exp(-i Theta s3), i.e. phases exp(+-2i Theta), which
    is the convention the evolution module integrates.
    """
    if config.model != "matrix":
        raise ConfigError("moving_matrix_potential needs a matrix configuration")
    if not 1 <= ell <= config.m:
        raise ConfigError(f"center index {ell} out of range 1..{config.m}")
    pot = config.potentials[ell - 1]
    c = config.centers[ell - 1]
    xi = grid.x - c.v * t - c.y
    U = pot.U(xi)
    W = pot.W(xi)
    if convention == "literal":
        ph = np.exp(1j * literal_phase(c, t, grid.x))
    elif convention == "covariant":
        ph = np.exp(2j * galilean_phase(c, t, grid.x))
    else:
        raise ConfigError(f"unknown phase convention {convention!r}")
    out = np.empty((2, 2, grid.n), dtype=complex)
    out[0, 0] = U
    out[0, 1] = -ph * W
    out[1, 0] = np.conj(ph) * W
    out[1, 1] = -U
    return out


def scalar_total_potential(config: ChargeTransferConfig, t: float, x) -> np.ndarray:
    x = np.asarray(x, float)
    out = np.zeros_like(x)
    for p, c in zip(config.potentials, config.centers):
        out += p(x - c.v * t - c.y)
    return out


def matrix_total_entries(config: ChargeTransferConfig, t: float, x):
    """Entries (a, b, c) of the traceless sum [[a, b], [c, -a]] in the covariant convention."""
    x = np.asarray(x, float)
    a = np.zeros_like(x)
    b = np.zeros(x.shape, complex)
    cc = np.zeros(x.shape, complex)
    for p, c in zip(config.potentials, config.centers):
        xi = x - c.v * t - c.y
        W = p.W(xi)
        a += p.U(xi)
        if np.any(W):
            ph = np.exp(2j * galilean_phase(c, t, x))
            b -= ph * W
            cc += np.conj(ph) * W
    return a, b, cc
