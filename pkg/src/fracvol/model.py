"""Discretized fractional Ornstein-Uhlenbeck volatility and log-price.

All path functions work along the last axis, so a single path (1-D arrays) or a
batch of paths (2-D arrays, one row per path) can be passed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .fbm import FbmGrid

__all__ = [
    "AUDIT_RANGE",
    "BUILTIN_VOLS",
    "ModelParams",
    "PathBundle",
    "VolSpec",
    "integrated_variance",
    "simulate_fou_grid",
    "simulate_log_price",
]

AUDIT_RANGE = (-10.0, 10.0)


@dataclass(frozen=True)
class ModelParams:
    s0: float = 1.0
    y0: float = 0.0
    drift_b: float = 0.2
    mean_reversion_alpha: float = 0.6
    horizon: float = 1.0
    hurst: float = 0.6

    def __post_init__(self):
        if not self.s0 > 0:
            raise ValueError(f"s0 must be positive, got {self.s0}")
        if not self.horizon > 0:
            raise ValueError(f"T must be positive, got {self.horizon}")
        if not self.mean_reversion_alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.mean_reversion_alpha}")
        if not 0.5 < self.hurst < 1.0:
            raise ValueError("hurst must lie in (0.5, 1)")

    @property
    def x0(self) -> float:
        return math.log(self.s0)


def _sqrt_abs_shift(c):
    return lambda y: np.sqrt(np.abs(y) + c)


def _abs_shift(c):
    return lambda y: np.abs(y) + c


def _sqrt_quadratic():
    return lambda y: np.sqrt(np.square(y) + 1.0)


def _sin_sq_shift(c):
    return lambda y: np.square(np.sin(y)) + c


def _constant(v):
    return lambda y: np.full_like(np.asarray(y, dtype=float), v)


BUILTIN_VOLS = ("sqrt_abs_shift", "abs_shift", "sqrt_quadratic", "sin_sq_shift")


@dataclass(frozen=True)
class VolSpec:
    """Volatility function sigma(y) with its Hoelder exponent and lower bound.

    Build instances with the classmethod constructors. ``custom`` takes any
    vectorized callable; its ``holder_r`` and ``sigma_min`` are trusted as given.
    """

    kind: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    holder_r: float
    sigma_min: float
    param: float | None = None

    def __post_init__(self):
        if not 0.0 < self.holder_r <= 1.0:
            raise ValueError("holder_r must lie in (0, 1]")
        if not self.sigma_min > 0:
            raise ValueError("sigma_min must be positive")

    def __call__(self, y):
        return self.func(np.asarray(y, dtype=float))

    evaluate = __call__

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    @classmethod
    def sqrt_abs_shift(cls, c: float = 0.1) -> VolSpec:
        _positive(c, "c")
        return cls("sqrt_abs_shift", _sqrt_abs_shift(c), 1.0, math.sqrt(c), c)

    @classmethod
    def abs_shift(cls, c: float = 0.1) -> VolSpec:
        _positive(c, "c")
        return cls("abs_shift", _abs_shift(c), 1.0, c, c)

    @classmethod
    def sqrt_quadratic(cls) -> VolSpec:
        return cls("sqrt_quadratic", _sqrt_quadratic(), 1.0, 1.0)

    @classmethod
    def sin_sq_shift(cls, c: float = 0.05) -> VolSpec:
        _positive(c, "c")
        return cls("sin_sq_shift", _sin_sq_shift(c), 1.0, c, c)

    @classmethod
    def constant(cls, v: float) -> VolSpec:
        _positive(v, "v")
        return cls("constant", _constant(v), 1.0, v, v)

    @classmethod
    def custom(cls, func, holder_r: float, sigma_min: float) -> VolSpec:
        return cls("custom", func, holder_r, sigma_min)

    @classmethod
    def from_kind(cls, kind: str, c: float | None = None, v: float | None = None) -> VolSpec:
        if kind == "sqrt_quadratic":
            return cls.sqrt_quadratic()
        if kind == "constant":
            if v is None:
                raise ValueError("constant volatility requires 'v'")
            return cls.constant(v)
        ctor = {
            "sqrt_abs_shift": cls.sqrt_abs_shift,
            "abs_shift": cls.abs_shift,
            "sin_sq_shift": cls.sin_sq_shift,
        }.get(kind)
        if ctor is None:
            raise ValueError(f"unknown volatility kind {kind!r}")
        if c is None:
            raise ValueError(f"volatility kind {kind!r} requires 'c'")
        return ctor(c)

    def audit(self, n_points: int = 10_001, seed: int = 0) -> tuple[float, float]:
        """Empirical (min sigma, Hoelder constant) over the audit range."""
        lo, hi = AUDIT_RANGE
        y = np.linspace(lo, hi, n_points)
        smin = float(np.min(self(y)))
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(lo, hi, (2, 10_000))
        gap = np.abs(a - b)
        keep = gap > 1e-9
        ratio = np.abs(self(a) - self(b))[keep] / gap[keep] ** self.holder_r
        return smin, float(ratio.max())


def _positive(x, name):
    if not x > 0:
        raise ValueError(f"{name} must be positive, got {x}")


@dataclass(frozen=True)
class PathBundle:
    """One simulated scenario on an n-step grid."""

    y_grid: np.ndarray
    x_T: float
    z_T: float
    sigma2_Y: float
    sigma2_Z: float
    m_Y: float
    horizon: float

    @property
    def delta(self) -> float:
        return self.sigma2_Y * self.sigma2_Z - self.horizon**2


def simulate_fou_grid(params: ModelParams, fbm: FbmGrid | np.ndarray) -> np.ndarray:
    """Y^n on t_0..t_n from fBm increments.

    Y^n_{t_j} = Y0 e^{-a t_j} + e^{-a t_{j-1}} sum_{i<j} e^{a t_i} dB_i,
    accumulated as a first-order recursion so large alpha*T cannot overflow.
    """
    if isinstance(fbm, FbmGrid):
        if not math.isclose(fbm.horizon, params.horizon) or fbm.hurst != params.hurst:
            raise ValueError("fBm grid does not match model horizon/hurst")
        inc = fbm.increments
    else:
        inc = np.asarray(fbm, dtype=float)
    n = inc.shape[-1]
    dt = params.horizon / n
    alpha = params.mean_reversion_alpha
    t = np.arange(n + 1) * dt
    out = np.empty(inc.shape[:-1] + (n + 1,))
    out[..., 0] = 0.0
    # acc_j = sum_{i<j} e^{-alpha (t_{j-1} - t_i)} dB_i
    out[..., 1:] = lfilter([1.0], [1.0, -math.exp(-alpha * dt)], inc, axis=-1)
    out += params.y0 * np.exp(-alpha * t)
    return out


def simulate_log_price(
    params: ModelParams,
    vol: VolSpec,
    y_grid: np.ndarray,
    wiener_increments: np.ndarray,
) -> tuple:
    """Terminal log-price X^n_T and weight Z^n_T with left-endpoint sigma(Y^n)."""
    y_grid = np.asarray(y_grid, dtype=float)
    dw = np.asarray(wiener_increments, dtype=float)
    n = dw.shape[-1]
    if y_grid.shape[-1] != n + 1:
        raise ValueError(
            f"y_grid has {y_grid.shape[-1]} points, expected {n + 1} for {n} increments"
        )
    dt = params.horizon / n
    sig = vol(y_grid[..., :-1])
    x_T = (
        params.x0
        + params.drift_b * params.horizon
        - 0.5 * np.sum(sig**2, axis=-1) * dt
        + np.sum(sig * dw, axis=-1)
    )
    z_T = np.sum(dw / sig, axis=-1)
    return x_T, z_T


def integrated_variance(
    vol: VolSpec, y_grid: np.ndarray, horizon: float, params: ModelParams | None = None
) -> tuple:
    """Left-endpoint Riemann sums (sigma2_Y, sigma2_Z, m_Y).

    ``m_Y = ln s0 + b T - sigma2_Y / 2`` needs s0 and b from ``params``; without
    params the defaults s0=1, b=0.2 apply.
    """
    y_grid = np.asarray(y_grid, dtype=float)
    n = y_grid.shape[-1] - 1
    if n < 1:
        raise ValueError("y_grid needs at least two points")
    params = params or ModelParams(horizon=horizon)
    dt = horizon / n
    sig = vol(y_grid[..., :-1])
    sigma2_Y = np.sum(sig**2, axis=-1) * dt
    sigma2_Z = np.sum(1.0 / sig**2, axis=-1) * dt
    m_Y = params.x0 + params.drift_b * horizon - 0.5 * sigma2_Y
    return sigma2_Y, sigma2_Z, m_Y
