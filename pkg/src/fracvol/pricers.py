"""Price estimators for E f(S_T) and the conditional Gaussian law of (X_T, Z_T).

Four estimators share one path simulator:

* ``direct``  average of f(S^n_T)
* ``level1``  average of F(S^n_T)/S^n_T * (1 + Z^n_T / T)   (W and B^H discretized)
* ``level2``  conditional-Gaussian integral against G, only B^H simulated
* ``level3``  the level-2 integral rewritten against an empirical density of
              the integrated variance sigma^2_Y

Every path k draws from its own substream ``RngStream(seed, k)``; paths are
processed in fixed-size chunks and reduced in index order, so results do not
depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fbm import FBM_STREAM, WIENER_STREAM, RngStream, normals_needed, transform_normals
from .model import ModelParams, VolSpec, simulate_fou_grid
from .payoff import PayoffSpec, eval_f, eval_F, eval_G

__all__ = [
    "METHODS",
    "ConditionalMoments",
    "DegenerateCovariance",
    "PathSample",
    "PriceEstimate",
    "TruncationError",
    "XGrid",
    "auto_xgrid",
    "conditional_density_xz",
    "conditional_price",
    "estimate",
    "inner_integral",
    "price",
    "price_direct",
    "price_level1",
    "price_level2",
    "price_level3",
    "simulate_paths",
]

METHODS = ("direct", "level1", "level2", "level3")
CHUNK = 256
DEFAULT_XPOINTS = 2500
DEFAULT_UPOINTS = 400
SQRT_2PI = math.sqrt(2.0 * math.pi)


class DegenerateCovariance(ValueError):
    """Conditional covariance of (X_T, Z_T) is singular (Delta <= 0)."""


class TruncationError(RuntimeError):
    """Automatic x-grid bounds failed to cover the conditional laws."""


@dataclass(frozen=True)
class PriceEstimate:
    value: float
    std_error: float
    n_grid: int
    n_paths: int
    master_seed: int
    method: str


@dataclass(frozen=True)
class ConditionalMoments:
    sigma2_Y: float
    sigma2_Z: float
    m_Y: float
    horizon: float = 1.0

    @property
    def delta(self) -> float:
        return self.sigma2_Y * self.sigma2_Z - self.horizon**2


@dataclass(frozen=True)
class XGrid:
    lo: float
    hi: float
    points: int = DEFAULT_XPOINTS

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("xgrid needs lo < hi")
        if self.points < 2:
            raise ValueError("xgrid needs at least 2 points")

    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)

    def weights(self) -> np.ndarray:
        return _trapezoid_weights(self.nodes())


def _trapezoid_weights(x):
    w = np.empty_like(x)
    dx = np.diff(x)
    w[0] = dx[0] / 2
    w[-1] = dx[-1] / 2
    w[1:-1] = (dx[:-1] + dx[1:]) / 2
    return w


# --------------------------------------------------------------------------
# conditional Gaussian utilities


def conditional_density_xz(x, z, cm: ConditionalMoments):
    """Joint density of (X_T, Z_T) given the volatility path."""
    delta = cm.delta
    if not delta > 0:
        raise DegenerateCovariance(f"Delta = {delta:.3e} must be positive")
    xt = np.asarray(x, dtype=float) - cm.m_Y
    z = np.asarray(z, dtype=float)
    quad = cm.sigma2_Z * xt**2 + cm.sigma2_Y * z**2 - 2.0 * cm.horizon * xt * z
    return np.exp(-quad / (2.0 * delta)) / (2.0 * math.pi * math.sqrt(delta))


def inner_integral(x, m_Y, sigma_Y, T):
    """int z p_{X,Z}(x, z) dz in closed form; independent of sigma2_Z."""
    xt = np.asarray(x, dtype=float) - m_Y
    return T * xt / (sigma_Y**3 * SQRT_2PI) * np.exp(-(xt**2) / (2.0 * sigma_Y**2))


def _gauss_weight(x, m, s):
    """(x - m) / s^3 * exp(-(x - m)^2 / (2 s^2)) / sqrt(2 pi), broadcasting."""
    xt = x - m
    return xt / (s**3 * SQRT_2PI) * np.exp(-0.5 * (xt / s) ** 2)


def auto_xgrid(m, s, points: int = DEFAULT_XPOINTS, width: float = 8.0) -> XGrid:
    """Truncation bounds from the spread of the conditional means and scales.

    lo/hi are the 1st/99th percentile of m widened by ``width`` times max s.
    The grid is widened until every (m_k, s_k) lies at least 7 s_k inside it.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    p1, p99 = np.percentile(m, [1, 99])
    smax = s.max()
    for k in range(4):
        w = width * (1 + 0.5 * k)
        lo, hi = p1 - w * smax, p99 + w * smax
        if np.all((m - lo) >= 7 * s) and np.all((hi - m) >= 7 * s):
            return XGrid(float(lo), float(hi), points)
    raise TruncationError("automatic x-grid bounds did not stabilize")


def conditional_price(payoff: PayoffSpec, m, s, xgrid: XGrid) -> np.ndarray:
    """Per-path E[g(X_T) | Y] via the trapezoid rule on ``xgrid``.

    Linear in the per-path integrand, so the mean of the result equals the
    level-2 value computed with common x-nodes.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    x = xgrid.nodes()
    wG = xgrid.weights() * eval_G(payoff, x)
    out = np.empty(m.shape)
    for start in range(0, m.size, 1024):
        sl = slice(start, start + 1024)
        out[sl] = _gauss_weight(x[None, :], m[sl, None], s[sl, None]) @ wG
    return out


# --------------------------------------------------------------------------
# path simulation


@dataclass(frozen=True)
class PathSample:
    """Per-path terminal statistics for a batch of simulated scenarios."""

    n_grid: int
    master_seed: int
    sigma2_Y: np.ndarray
    sigma2_Z: np.ndarray
    m_Y: np.ndarray
    x_T: Optional[np.ndarray] = None
    z_T: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        return self.sigma2_Y.size


def _coarsen(inc, n_grid):
    base = inc.shape[-1]
    if base == n_grid:
        return inc
    return inc.reshape(inc.shape[:-1] + (n_grid, base // n_grid)).sum(axis=-1)


def _simulate_chunk(params, vol, n_grid, base_n, seed, indices, wiener, fbm_method):
    T = params.horizon
    m_fbm = normals_needed(base_n, fbm_method)
    z = np.empty((len(indices), m_fbm))
    dw = np.empty((len(indices), base_n)) if wiener else None
    for row, idx in enumerate(indices):
        stream = RngStream(seed, int(idx))
        z[row] = stream.normals(m_fbm, FBM_STREAM)
        if wiener:
            dw[row] = stream.normals(base_n, WIENER_STREAM)
    dB = _coarsen(transform_normals(z, params.hurst, base_n, T, fbm_method), n_grid)
    y = simulate_fou_grid(params, dB)
    dt = T / n_grid
    sig = vol(y[:, :-1])
    sigma2_Y = np.sum(sig**2, axis=1) * dt
    sigma2_Z = np.sum(sig**-2, axis=1) * dt
    m_Y = params.x0 + params.drift_b * T - 0.5 * sigma2_Y
    out = {"sigma2_Y": sigma2_Y, "sigma2_Z": sigma2_Z, "m_Y": m_Y}
    if wiener:
        dw = _coarsen(dw * math.sqrt(T / base_n), n_grid)
        out["x_T"] = m_Y + np.sum(sig * dw, axis=1)
        out["z_T"] = np.sum(dw / sig, axis=1)
    return out


def simulate_paths(
    params: ModelParams,
    vol: VolSpec,
    n_grid: int,
    n_paths: int,
    seed: int,
    wiener: bool = True,
    base_n: Optional[int] = None,
    fbm_method: str = "circulant",
    threads: int = 1,
) -> PathSample:
    """Simulate ``n_paths`` scenarios on an ``n_grid``-step partition.

    With ``base_n`` the driving fBm and Wiener increments are drawn on the
    finer ``base_n`` grid and summed down to ``n_grid``, so several grid sizes
    can share one realization (``base_n`` must be a multiple of ``n_grid``).
    """
    if n_grid < 1 or n_paths < 1:
        raise ValueError("n_grid and n_paths must be positive")
    base_n = n_grid if base_n is None else int(base_n)
    if base_n % n_grid:
        raise ValueError(f"base_n={base_n} is not a multiple of n_grid={n_grid}")
    chunks = [range(a, min(a + CHUNK, n_paths)) for a in range(0, n_paths, CHUNK)]

    def work(idx):
        return _simulate_chunk(params, vol, n_grid, base_n, seed, idx, wiener, fbm_method)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    cat = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    return PathSample(n_grid=n_grid, master_seed=seed, **cat)


# --------------------------------------------------------------------------
# estimators on a simulated sample


def _mean_se(stat):
    n = stat.size
    se = float(np.std(stat, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(np.mean(stat)), se


def _direct(sample, payoff):
    return _mean_se(eval_f(payoff, np.exp(sample.x_T)))


def _level1(sample, payoff, T):
    s = np.exp(sample.x_T)
    return _mean_se(eval_F(payoff, s) / s * (1.0 + sample.z_T / T))


def _constant_moments(params, vol):
    u = vol.param**2 * params.horizon
    return u, params.x0 + params.drift_b * params.horizon - 0.5 * u


def _level2(sample, payoff, params, vol, xgrid):
    if vol.is_constant:
        u, m = _constant_moments(params, vol)
        xg = xgrid or auto_xgrid(m, math.sqrt(u))
        return float(conditional_price(payoff, m, math.sqrt(u), xg)[0]), 0.0
    s = np.sqrt(sample.sigma2_Y)
    xg = xgrid or auto_xgrid(sample.m_Y, s)
    return _mean_se(conditional_price(payoff, sample.m_Y, s, xg))


def silverman_bandwidth(u: np.ndarray) -> float:
    std = np.std(u, ddof=1)
    q75, q25 = np.percentile(u, [75, 25])
    iqr = (q75 - q25) / 1.34
    spread = min(std, iqr) if iqr > 0 else std
    return float(0.9 * spread * u.size ** (-0.2))


def _level3(u, payoff, params, sigma_min, xgrid, ugrid_points):
    x0bT = params.x0 + params.drift_b * params.horizon
    h = silverman_bandwidth(u) if np.ptp(u) > 0 else 0.0
    if not h > 0:
        # Dirac density: the u-integral collapses to the point u[0]
        s = math.sqrt(u[0])
        xg = xgrid or auto_xgrid(x0bT - u[0] / 2, s)
        return float(conditional_price(payoff, x0bT - u[0] / 2, s, xg)[0]), 0.0
    bound = params.horizon * sigma_min**2
    ulo = max(u.min() - 3 * h, bound)
    uhi = u.max() + 3 * h
    ug = np.linspace(ulo, uhi, ugrid_points)
    wu = _trapezoid_weights(ug)
    # substituting u = sigma^2_Y: mean x0 + bT - u/2, scale sqrt(u)
    m_u, s_u = x0bT - ug / 2, np.sqrt(ug)
    xg = xgrid or auto_xgrid(m_u, s_u)
    inner = conditional_price(payoff, m_u, s_u, xg)
    # reflect each kernel at the support bound so mass that would leak below
    # T sigma_min^2 stays near the boundary instead of being spread by renormalizing
    kern = np.exp(-0.5 * ((ug[None, :] - u[:, None]) / h) ** 2)
    kern += np.exp(-0.5 * ((ug[None, :] - (2 * bound - u[:, None])) / h) ** 2)
    kern /= h * SQRT_2PI
    mass = float(np.mean(kern, axis=0) @ wu)
    contrib = kern @ (wu * inner) / mass
    return _mean_se(contrib)


def estimate(
    method: str,
    sample: PathSample,
    params: ModelParams,
    vol: VolSpec,
    payoff: PayoffSpec,
    xgrid: Optional[XGrid] = None,
    ugrid_points: int = DEFAULT_UPOINTS,
) -> PriceEstimate:
    """Apply one estimator to an already simulated sample (shared realizations)."""
    if method in ("direct", "level1") and sample.x_T is None:
        raise ValueError(f"{method} needs Wiener increments in the sample")
    if method == "direct":
        value, se = _direct(sample, payoff)
    elif method == "level1":
        value, se = _level1(sample, payoff, params.horizon)
    elif method == "level2":
        value, se = _level2(sample, payoff, params, vol, xgrid)
    elif method == "level3":
        if vol.is_constant:
            u = np.full(sample.n_paths, _constant_moments(params, vol)[0])
        else:
            u = sample.sigma2_Y
        if u.size == 0:
            raise ValueError("level3 needs a non-empty sample")
        value, se = _level3(u, payoff, params, vol.sigma_min, xgrid, ugrid_points)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return PriceEstimate(value, se, sample.n_grid, sample.n_paths, sample.master_seed, method)


# --------------------------------------------------------------------------
# public one-shot pricers


def price(
    method: str,
    params: ModelParams,
    vol: VolSpec,
    payoff: PayoffSpec,
    n_grid: int,
    n_paths: int,
    seed: int,
    xgrid: Optional[XGrid] = None,
    ugrid_points: int = DEFAULT_UPOINTS,
    threads: int = 1,
    base_n: Optional[int] = None,
    fbm_method: str = "circulant",
) -> PriceEstimate:
    wiener = method in ("direct", "level1")
    if vol.is_constant and not wiener:
        # sigma^2_Y is deterministic, no paths needed
        u, m = _constant_moments(params, vol)
        sample = PathSample(
            n_grid, seed, np.full(n_paths, u),
            np.full(n_paths, params.horizon**2 / u), np.full(n_paths, m),
        )
        return estimate(method, sample, params, vol, payoff, xgrid, ugrid_points)
    sample = simulate_paths(
        params, vol, n_grid, n_paths, seed, wiener=wiener, base_n=base_n,
        fbm_method=fbm_method, threads=threads,
    )
    return estimate(method, sample, params, vol, payoff, xgrid, ugrid_points)


def price_direct(params, vol, payoff, n_grid, n_paths, seed, **kw) -> PriceEstimate:
    return price("direct", params, vol, payoff, n_grid, n_paths, seed, **kw)


def price_level1(params, vol, payoff, n_grid, n_paths, seed, **kw) -> PriceEstimate:
    return price("level1", params, vol, payoff, n_grid, n_paths, seed, **kw)


def price_level2(params, vol, payoff, n_grid, n_paths, seed, xgrid=None, **kw) -> PriceEstimate:
    return price("level2", params, vol, payoff, n_grid, n_paths, seed, xgrid=xgrid, **kw)


def price_level3(
    params, vol, payoff, n_grid, n_paths, seed, xgrid=None,
    ugrid_points=DEFAULT_UPOINTS, **kw,
) -> PriceEstimate:
    return price(
        "level3", params, vol, payoff, n_grid, n_paths, seed,
        xgrid=xgrid, ugrid_points=ugrid_points, **kw,
    )
