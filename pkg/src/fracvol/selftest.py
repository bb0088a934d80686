"""Statistical checks of the fBm samplers, shared by the CLI and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .fbm import CHOLESKY_CAP, fbm_cov, sample_fbm_batch

ALPHA = 1e-3
CHUNK = 2000


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def path_covariance(hurst, n_steps, horizon, n_paths, seed, method="circulant"):
    """Empirical E[B_ti B_tj] over t_1..t_n (mean is known to be zero)."""
    acc = np.zeros((n_steps, n_steps))
    for start in range(0, n_paths, CHUNK):
        idx = range(start, min(start + CHUNK, n_paths))
        b = np.cumsum(sample_fbm_batch(hurst, n_steps, horizon, seed, idx, method), axis=1)
        acc += b.T @ b
    return acc / n_paths


def covariance_check(hurst, n_steps=256, horizon=1.0, n_paths=100_000, seed=0, nsig=4.0):
    emp = path_covariance(hurst, n_steps, horizon, n_paths, seed)
    t = np.arange(1, n_steps + 1) * horizon / n_steps
    cov = fbm_cov(t[:, None], t[None, :], hurst)
    # Var(B_i B_j) = C_ii C_jj + C_ij^2 for a centered Gaussian pair
    se = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / n_paths)
    z = np.abs(emp - cov) / se
    worst = float(z.max())
    return Check(
        f"covariance H={hurst} n={n_steps}",
        worst <= nsig,
        f"max |emp - cov| / se = {worst:.2f} (limit {nsig})",
    )


def _one_increment_per_path(hurst, n_steps, horizon, n_paths, seed, method="circulant"):
    """Increment i = k mod (n-1) and its successor from path k, so draws are independent."""
    first = np.empty(n_paths)
    second = np.empty(n_paths)
    for start in range(0, n_paths, CHUNK):
        idx = np.arange(start, min(start + CHUNK, n_paths))
        inc = sample_fbm_batch(hurst, n_steps, horizon, seed, idx, method)
        col = idx % max(n_steps - 1, 1)
        rows = np.arange(idx.size)
        first[idx] = inc[rows, col]
        second[idx] = inc[rows, np.minimum(col + 1, n_steps - 1)]
    return first, second


def bm_increment_checks(n_steps=1000, horizon=1.0, n_paths=100_000, seed=0):
    """At H = 0.5 increments must be i.i.d. N(0, dt)."""
    dt = horizon / n_steps
    a, b = _one_increment_per_path(0.5, n_steps, horizon, n_paths, seed)
    ks = stats.kstest(a / math.sqrt(dt), "norm")
    r = float(np.corrcoef(a, b)[0, 1]) if n_steps > 1 else 0.0
    p_corr = 2 * stats.norm.sf(abs(r) * math.sqrt(n_paths))
    return [
        Check("normality (KS) H=0.5", ks.pvalue > ALPHA, f"p = {ks.pvalue:.4f}"),
        Check("lag-1 independence H=0.5", p_corr > ALPHA, f"r = {r:.5f}, p = {p_corr:.4f}"),
    ]


def terminal_variance_check(hurst, n_steps, horizon=1.0, n_paths=100_000, seed=0):
    bT = np.empty(n_paths)
    for start in range(0, n_paths, CHUNK):
        idx = range(start, min(start + CHUNK, n_paths))
        bT[start : start + len(idx)] = sample_fbm_batch(
            hurst, n_steps, horizon, seed, idx
        ).sum(axis=1)
    target = horizon ** (2 * hurst)
    var = float(np.mean(bT**2))
    se = target * math.sqrt(2.0 / n_paths)
    return Check(
        f"Var(B_T) H={hurst}",
        abs(var - target) <= 4 * se,
        f"{var:.5f} vs {target:.5f} (4 se = {4 * se:.5f})",
    )


def cross_method_check(hurst, n_steps, horizon=1.0, n_paths=20_000, seed=0):
    """Two-sample KS on B_T between the circulant and Cholesky samplers."""
    if n_steps > CHOLESKY_CAP:
        return Check("circulant vs cholesky", True, "skipped: n above cholesky cap")
    out = {}
    # independent seeds per method, otherwise both samplers read the same normals
    for offset, method in enumerate(("circulant", "cholesky")):
        bT = []
        for start in range(0, n_paths, CHUNK):
            idx = range(start, min(start + CHUNK, n_paths))
            inc = sample_fbm_batch(hurst, n_steps, horizon, seed + offset, idx, method)
            bT.append(inc.sum(axis=1))
        out[method] = np.concatenate(bT)
    p = stats.ks_2samp(out["circulant"], out["cholesky"]).pvalue
    return Check(f"circulant vs cholesky H={hurst}", p > ALPHA, f"KS p = {p:.4f}")


def run_selftest(hurst=0.5, n_steps=1000, n_paths=20_000, seed=0):
    checks = [terminal_variance_check(hurst, n_steps, n_paths=n_paths, seed=seed)]
    checks.append(
        covariance_check(hurst, min(n_steps, 256), n_paths=n_paths, seed=seed)
    )
    if hurst == 0.5:
        checks += bm_increment_checks(n_steps, n_paths=n_paths, seed=seed)
    checks.append(cross_method_check(hurst, min(n_steps, 512), n_paths=n_paths, seed=seed))
    return checks
