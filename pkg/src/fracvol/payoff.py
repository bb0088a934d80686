"""Payoffs built from calls and digitals, with their antiderivatives F and G.

With g(y) = f(e^y):

    F(x) = int_0^x f(z) dz,    G(y) = int_0^y g(z) dz.

Built-in terms have closed forms; a custom payoff falls back to adaptive
quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

__all__ = ["PayoffSpec", "QuadratureError", "eval_f", "eval_F", "eval_G", "eval_g"]

QUAD_RTOL = 1e-10


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class PayoffSpec:
    """Weighted sum of calls (s-K)_+ and strict digitals 1{s > L}.

    ``calls`` holds (weight, strike) pairs and ``digitals`` (weight, level) pairs.
    A ``custom`` callable replaces the whole family; it must be vectorized,
    nonnegative and locally Riemann integrable (not checked).
    """

    calls: tuple = ()
    digitals: tuple = ()
    custom: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False
    )
    growth_p: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "calls", tuple((float(w), float(k)) for w, k in self.calls))
        object.__setattr__(
            self, "digitals", tuple((float(w), float(l)) for w, l in self.digitals)
        )
        for w, k in self.calls:
            if w < 0 or k <= 0:
                raise ValueError(f"call needs weight >= 0 and strike > 0, got ({w}, {k})")
        for w, l in self.digitals:
            if w < 0 or l <= 0:
                raise ValueError(f"digital needs weight >= 0 and level > 0, got ({w}, {l})")
        if self.custom is None and not (self.calls or self.digitals):
            raise ValueError("payoff needs at least one call or digital term")

    @classmethod
    def call_plus_digital(cls, strike: float = 1.0, level: float = 1.0) -> PayoffSpec:
        """f(s) = (s - strike)_+ + 1{s > level}, the family used in the tables."""
        return cls(calls=((1.0, strike),), digitals=((1.0, level),))

    @property
    def kinks(self) -> list:
        """Points in s where f is not smooth."""
        return sorted({k for _, k in self.calls} | {l for _, l in self.digitals})


def _nonneg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("payoff argument must be non-negative")
    return s


def _scalar(out, like):
    return float(out) if np.ndim(like) == 0 else out


def eval_f(spec: PayoffSpec, s):
    s = _nonneg(s)
    if spec.custom is not None:
        return _scalar(np.asarray(spec.custom(s), dtype=float), s)
    out = np.zeros_like(s)
    for w, k in spec.calls:
        out += w * np.maximum(s - k, 0.0)
    for w, l in spec.digitals:
        out += w * (s > l)
    return _scalar(out, s)


def eval_g(spec: PayoffSpec, y):
    """g(y) = f(e^y)."""
    return eval_f(spec, np.exp(np.asarray(y, dtype=float)))


def eval_F(spec: PayoffSpec, x):
    x = _nonneg(x)
    if spec.custom is not None:
        return _scalar(_cumulative_quad(lambda z: eval_f(spec, z), x, 0.0), x)
    out = np.zeros_like(x)
    for w, k in spec.calls:
        out += 0.5 * w * np.maximum(x - k, 0.0) ** 2
    for w, l in spec.digitals:
        out += w * np.maximum(x - l, 0.0)
    return _scalar(out, x)


def _call_log_antiderivative(y, k):
    # int_{ln k}^{y} (e^z - k) dz for y > ln k, else 0
    lk = math.log(k)
    above = y > lk
    yy = np.where(above, y, lk)
    return np.where(above, np.exp(yy) - k - k * (yy - lk), 0.0)


def eval_G(spec: PayoffSpec, y):
    """G(y) = int_0^y f(e^z) dz; negative y gives -int_y^0."""
    y = np.asarray(y, dtype=float)
    if spec.custom is not None:
        return _scalar(_cumulative_quad(lambda z: eval_g(spec, z), y, 0.0), y)
    out = np.zeros_like(y)
    for w, k in spec.calls:
        out += w * (_call_log_antiderivative(y, k) - _call_log_antiderivative(0.0, k))
    for w, l in spec.digitals:
        ll = math.log(l)
        out += w * (np.maximum(y - ll, 0.0) - max(-ll, 0.0))
    return _scalar(out, y)


def _quad(fn, a, b):
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(fn, a, b, epsrel=QUAD_RTOL, epsabs=1e-14, limit=500)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {exc}")
    return val


def _cumulative_quad(fn, pts: np.ndarray, origin: float) -> np.ndarray:
    """int_origin^p fn for every p, integrating between sorted neighbours once."""
    flat = np.ravel(pts)
    order = np.argsort(flat)
    sorted_pts = flat[order]
    knots = np.unique(np.concatenate((sorted_pts, [origin])))
    pieces = np.array([_quad(fn, a, b) for a, b in zip(knots[:-1], knots[1:])])
    cum = np.concatenate(([0.0], np.cumsum(pieces)))
    cum -= cum[np.searchsorted(knots, origin)]
    vals = cum[np.searchsorted(knots, flat)]
    return vals.reshape(np.shape(pts))

