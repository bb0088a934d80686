"""Exact sampling of fractional Brownian motion increments on an equidistant grid.

Two samplers are provided. The circulant embedding (Davies-Harte / Wood-Chan)
sampler is the default and costs O(n log n) per path; the Cholesky sampler is
kept as an exact cross-check for moderate grid sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "CHOLESKY_CAP",
    "EmbeddingNotPSD",
    "FbmGrid",
    "RngStream",
    "circulant_spectrum",
    "fbm_cov",
    "increment_autocov",
    "sample_fbm_increments",
    "sample_fbm_batch",
    "normals_needed",
]

CHOLESKY_CAP = 4096
EIG_RTOL = 1e-8

# substream purposes; each path owns one stream per purpose
FBM_STREAM = 0
WIENER_STREAM = 1


class EmbeddingNotPSD(ValueError):
    """The circulant embedding has a materially negative eigenvalue."""


@dataclass(frozen=True)
class RngStream:
    """Counter-based random substream, a pure function of (master_seed, stream_index).

    Each Monte Carlo path owns one ``stream_index``. Philox keyed through a
    ``SeedSequence`` spawn key gives independent, reproducible substreams
    without storing per-path state.
    """

    master_seed: int
    stream_index: int

    def __post_init__(self):
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    def generator(self, purpose: int = FBM_STREAM) -> np.random.Generator:
        ss = np.random.SeedSequence(
            self.master_seed, spawn_key=(self.stream_index, purpose)
        )
        return np.random.Generator(np.random.Philox(ss))

    def normals(self, size: int, purpose: int = FBM_STREAM) -> np.ndarray:
        return self.generator(purpose).standard_normal(size)


@dataclass(frozen=True)
class FbmGrid:
    hurst: float
    n_steps: int
    horizon: float
    increments: np.ndarray

    def __post_init__(self):
        if self.increments.shape != (self.n_steps,):
            raise ValueError(
                f"expected {self.n_steps} increments, got shape {self.increments.shape}"
            )
        if not np.all(np.isfinite(self.increments)):
            raise ValueError("fBm increments must be finite")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def path(self) -> np.ndarray:
        """B^H at t_0, ..., t_n with B^H_0 = 0."""
        return np.concatenate(([0.0], np.cumsum(self.increments)))


def _check_hurst(hurst):
    if not 0.5 <= hurst < 1.0:
        raise ValueError(f"hurst must lie in [0.5, 1), got {hurst}")


def fbm_cov(s, t, hurst):
    """Covariance E[B^H_s B^H_t] = (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.

    Broadcasts over array arguments.
    """
    _check_hurst(hurst)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise ValueError("times must be non-negative")
    h2 = 2.0 * hurst
    out = 0.5 * (s**h2 + t**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def increment_autocov(hurst: float, lags, dt: float) -> np.ndarray:
    """Autocovariance of fBm increments of step ``dt`` at integer ``lags``."""
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * dt**h2 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def circulant_spectrum(hurst: float, n_steps: int, dt: float) -> np.ndarray:
    """Eigenvalues of the size-2n circulant embedding of the increment autocovariance.

    The first row is (g0, ..., g_{n-1}, g_n, g_{n-1}, ..., g1). Eigenvalues in
    [-tol, 0) with tol = 1e-8 * max eigenvalue are clipped to zero; anything
    more negative raises :class:`EmbeddingNotPSD`.
    """
    _check_hurst(hurst)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    return _spectrum(float(hurst), int(n_steps), float(dt)).copy()


@lru_cache(maxsize=64)
def _spectrum(hurst, n_steps, dt):
    gamma = increment_autocov(hurst, np.arange(n_steps + 1), dt)
    row = np.concatenate((gamma, gamma[-2:0:-1]))
    eig = np.fft.rfft(row).real
    # full spectrum of a symmetric circulant: eig[k] == eig[M - k]
    full = np.concatenate((eig, eig[-2:0:-1]))
    tol = EIG_RTOL * full.max()
    if full.min() < -tol:
        raise EmbeddingNotPSD(
            f"min eigenvalue {full.min():.3e} < -{tol:.3e} (H={hurst}, n={n_steps})"
        )
    full = np.where(full < 0.0, 0.0, full)
    full.setflags(write=False)
    return full


@lru_cache(maxsize=16)
def _cholesky_factor(hurst, n_steps, dt):
    lags = np.arange(n_steps)
    gamma = increment_autocov(hurst, lags, dt)
    cov = gamma[np.abs(lags[:, None] - lags[None, :])]
    L = np.linalg.cholesky(cov)
    L.setflags(write=False)
    return L


def normals_needed(n_steps: int, method: str = "circulant") -> int:
    """Standard normals consumed per path by each sampler."""
    if method == "circulant":
        return 2 * n_steps
    if method == "cholesky":
        return n_steps
    raise ValueError(f"unknown fBm method {method!r}")


def _circulant_transform(z: np.ndarray, hurst, n_steps, dt) -> np.ndarray:
    """Map rows of 2n standard normals to rows of n exact fBm increments.

    Hermitian-symmetric complex weights are built from exactly M = 2n real
    normals so the inverse real FFT is an exact draw (Wood-Chan).
    """
    lam = _spectrum(hurst, n_steps, dt)
    M = 2 * n_steps
    half = n_steps
    a = np.empty(z.shape[:-1] + (half + 1,), dtype=complex)
    a[..., 0] = np.sqrt(lam[0] / M) * z[..., 0]
    a[..., half] = np.sqrt(lam[half] / M) * z[..., 1]
    if half > 1:
        scale = np.sqrt(lam[1:half] / (2.0 * M))
        a[..., 1:half] = scale * (z[..., 2 : half + 1] + 1j * z[..., half + 1 : M])
    x = np.fft.irfft(a, n=M, axis=-1) * M
    return x[..., :n_steps]


def _validate(hurst, n_steps, horizon, method):
    _check_hurst(hurst)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if method == "cholesky" and n_steps > CHOLESKY_CAP:
        raise ValueError(
            f"cholesky sampler capped at n_steps={CHOLESKY_CAP}, got {n_steps}"
        )
    normals_needed(n_steps, method)


def transform_normals(z, hurst, n_steps, horizon, method="circulant"):
    """Turn standard normals (last axis) into fBm increments (last axis)."""
    _validate(hurst, n_steps, horizon, method)
    dt = horizon / n_steps
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != normals_needed(n_steps, method):
        raise ValueError("wrong number of standard normals for sampler")
    if method == "circulant":
        return _circulant_transform(z, float(hurst), int(n_steps), float(dt))
    L = _cholesky_factor(float(hurst), int(n_steps), float(dt))
    return z @ L.T


def sample_fbm_increments(
    hurst: float,
    n_steps: int,
    horizon: float,
    stream: RngStream,
    method: str = "circulant",
) -> FbmGrid:
    """Draw one fBm path on t_i = i*horizon/n_steps from its own substream."""
    _validate(hurst, n_steps, horizon, method)
    z = stream.normals(normals_needed(n_steps, method), FBM_STREAM)
    inc = transform_normals(z, hurst, n_steps, horizon, method)
    return FbmGrid(hurst, n_steps, horizon, inc)


def sample_fbm_batch(
    hurst: float,
    n_steps: int,
    horizon: float,
    master_seed: int,
    indices,
    method: str = "circulant",
) -> np.ndarray:
    """Increments for many paths, row ``k`` drawn from stream ``indices[k]``.

    Row k equals ``sample_fbm_increments(..., RngStream(master_seed, indices[k]))``
    up to floating-point reassociation inside the batched FFT.
    """
    _validate(hurst, n_steps, horizon, method)
    m = normals_needed(n_steps, method)
    z = np.empty((len(indices), m))
    for row, idx in enumerate(indices):
        z[row] = RngStream(master_seed, int(idx)).normals(m, FBM_STREAM)
    return transform_normals(z, hurst, n_steps, horizon, method)
