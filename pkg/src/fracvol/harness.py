"""Experiment orchestration: price tables, convergence studies, CSV output."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import ModelParams, VolSpec
from .payoff import PayoffSpec
from .pricers import (
    DEFAULT_UPOINTS,
    METHODS,
    XGrid,
    auto_xgrid,
    conditional_price,
    estimate,
    simulate_paths,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("method", "n_grid", "n_paths", "master_seed", "value", "std_error", "runtime_ms")
MAX_REFERENCE_N = 2**13
TINY_ERROR = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    vol: VolSpec
    payoff: PayoffSpec
    methods: tuple = ("level2",)
    n_list: tuple = (125, 250, 500, 1000, 2000, 4000, 8000)
    n_paths: int = 10_000
    master_seed: int = 0
    xgrid: Optional[XGrid] = None  # None means auto
    xgrid_points: int = 2500
    ugrid_points: int = DEFAULT_UPOINTS

    def __post_init__(self):
        if not self.n_list:
            raise ValueError("n_list must be non-empty")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError("n_list must be strictly ascending")
        if any(n < 1 for n in self.n_list):
            raise ValueError("n_list entries must be positive")
        if self.n_paths < 100:
            raise ValueError("n_paths must be at least 100")
        if not self.methods:
            raise ValueError("methods must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")


@dataclass
class ResultRow:
    method: str
    n_grid: int
    n_paths: int
    master_seed: int
    value: float
    std_error: float
    runtime_ms: float = 0.0
    error: Optional[str] = None


class RunError(RuntimeError):
    """An estimator failed; ``rows`` holds everything produced so far plus the failed cell."""

    def __init__(self, message, rows):
        super().__init__(message)
        self.rows = rows


def _auto_or(config, sample_m, sample_s):
    if config.xgrid is not None:
        return config.xgrid
    return None if sample_m is None else auto_xgrid(sample_m, sample_s, config.xgrid_points)


def run_table(config: ExperimentConfig, threads: int = 1) -> list:
    """One row per (method, n); methods at the same n share the same paths."""
    rows = []
    for n in config.n_list:
        wiener = any(m in ("direct", "level1") for m in config.methods)
        t0 = time.perf_counter()
        try:
            sample = simulate_paths(
                config.model, config.vol, n, config.n_paths, config.master_seed,
                wiener=wiener, threads=threads,
            )
        except Exception as exc:
            rows.append(_error_row(config, config.methods[0], n, exc))
            raise RunError(f"simulation failed at n={n}: {exc}", rows) from exc
        sim_ms = (time.perf_counter() - t0) * 1e3
        for method in config.methods:
            t1 = time.perf_counter()
            try:
                xg = config.xgrid
                if xg is None and method == "level2" and not config.vol.is_constant:
                    xg = auto_xgrid(sample.m_Y, np.sqrt(sample.sigma2_Y), config.xgrid_points)
                est = estimate(
                    method, sample, config.model, config.vol, config.payoff,
                    xg, config.ugrid_points,
                )
            except Exception as exc:
                rows.append(_error_row(config, method, n, exc))
                raise RunError(f"{method} failed at n={n}: {exc}", rows) from exc
            ms = sim_ms + (time.perf_counter() - t1) * 1e3
            rows.append(
                ResultRow(method, n, est.n_paths, est.master_seed, est.value, est.std_error, ms)
            )
            log.info("%s n=%d value=%.6f se=%.2e", method, n, est.value, est.std_error)
    return rows


def _error_row(config, method, n, exc):
    return ResultRow(
        method, n, config.n_paths, config.master_seed, math.nan, math.nan, 0.0, str(exc)
    )


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.10g}"


def rows_to_csv(rows: Sequence[ResultRow], timing: bool = False) -> str:
    """CSV text in the fixed column order.

    ``runtime_ms`` is written as 0 unless ``timing`` is set, which keeps the
    output byte-identical across repeated runs.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([
            r.method, _fmt(r.n_grid), _fmt(r.n_paths), _fmt(r.master_seed),
            _fmt(r.value), _fmt(r.std_error), _fmt(r.runtime_ms if timing else 0),
        ])
    return buf.getvalue()


# --------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceReport:
    reference_n: int
    rows: list  # (n, value, abs_error) ascending in n, reference row last
    fitted_slope: float
    predicted_slope: float
    method: str = "level2"
    extra: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("n_grid", "value", "abs_error"))
        for n, v, e in self.rows:
            w.writerow((_fmt(n), _fmt(v), _fmt(e)))
        w.writerow(())
        w.writerow(("reference_n", _fmt(self.reference_n)))
        w.writerow(("fitted_slope", _fmt(self.fitted_slope)))
        w.writerow(("predicted_slope", _fmt(self.predicted_slope)))
        return buf.getvalue()


class InsufficientRows(ValueError):
    pass


def fit_convergence_rate(rows, reference_n: Optional[int] = None) -> float:
    """OLS slope of log(abs_error) against log(n).

    ``rows`` are (n, value, abs_error) triples. The reference row (if given)
    and rows with abs_error below 1e-12 are dropped; at least three must remain.
    """
    pts = [
        (n, e) for n, _, e in rows
        if n != reference_n and np.isfinite(e) and e >= TINY_ERROR
    ]
    if len(pts) < 3:
        raise InsufficientRows(f"need >= 3 usable rows, got {len(pts)}")
    n, e = np.array(pts, dtype=float).T
    slope, _ = np.polyfit(np.log(n), np.log(e), 1)
    return float(slope)


def reference_resolution(n_list) -> int:
    """Smallest power of two >= 4 max(n_list), capped at 2^13."""
    target = 4 * max(n_list)
    return min(1 << max(0, math.ceil(math.log2(target))), MAX_REFERENCE_N)


def run_convergence(config: ExperimentConfig, method: Optional[str] = None, threads: int = 1):
    """Estimates at every n from one shared fine realization, errors vs the finest grid.

    Increments are drawn at ``reference_n`` and summed down, so each n in
    ``n_list`` must divide ``reference_n``.
    """
    method = method or config.methods[0]
    ref = reference_resolution(config.n_list)
    bad = [n for n in config.n_list if ref % n or n >= ref]
    if bad:
        raise ValueError(
            f"n_list entries {bad} must be proper divisors of reference_n={ref}"
        )
    wiener = method in ("direct", "level1")
    values = {}
    for n in list(config.n_list) + [ref]:
        sample = simulate_paths(
            config.model, config.vol, n, config.n_paths, config.master_seed,
            wiener=wiener, base_n=ref, threads=threads,
        )
        est = estimate(
            method, sample, config.model, config.vol, config.payoff,
            config.xgrid, config.ugrid_points,
        )
        values[n] = est.value
    rows = [(n, values[n], abs(values[n] - values[ref])) for n in config.n_list]
    rows.append((ref, values[ref], 0.0))
    predicted = -config.vol.holder_r * config.model.hurst
    try:
        slope = fit_convergence_rate(rows, ref)
    except InsufficientRows:
        slope = math.nan
    return ConvergenceReport(ref, rows, slope, predicted, method)


def fixed_path_study(
    params: ModelParams,
    vol: VolSpec,
    payoff: PayoffSpec,
    n_paths: int = 50,
    seed: int = 0,
    ks: Sequence[int] = range(7, 13),
    ref_k: int = 13,
    xgrid_points: int = 2500,
) -> dict:
    """Per-path level-2 conditional price on subsampled grids of one fine fBm path.

    Each path is drawn once at n = 2^ref_k; coarser grids n = 2^k sum its
    increments. Returns per-path slopes of log|v_n - v_ref| against log n and
    their mean (paths with fewer than three usable errors are skipped).
    """
    ref = 2**ref_k
    ns = [2**k for k in ks]
    samples = {
        n: simulate_paths(params, vol, n, n_paths, seed, wiener=False, base_n=ref)
        for n in ns + [ref]
    }
    all_m = np.concatenate([samples[n].m_Y for n in samples])
    all_s = np.sqrt(np.concatenate([samples[n].sigma2_Y for n in samples]))
    xg = auto_xgrid(all_m, all_s, xgrid_points)
    vals = {
        n: conditional_price(payoff, samples[n].m_Y, np.sqrt(samples[n].sigma2_Y), xg)
        for n in samples
    }
    slopes = []
    for k in range(n_paths):
        rows = [(n, vals[n][k], abs(vals[n][k] - vals[ref][k])) for n in ns]
        try:
            slopes.append(fit_convergence_rate(rows))
        except InsufficientRows:
            continue
    slopes = np.array(slopes)
    return {
        "slopes": slopes,
        "mean_slope": float(slopes.mean()) if slopes.size else math.nan,
        "predicted_slope": -vol.holder_r * params.hurst,
        "reference_n": ref,
    }
