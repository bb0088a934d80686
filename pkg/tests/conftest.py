import math

import numpy as np
import pytest
from scipy.stats import norm

from fracvol.model import VolSpec
from fracvol.payoff import PayoffSpec


def lognormal_call(s0, strike, b, sigma, T):
    """E (S_T - K)_+ for S_T = s0 exp((b - sigma^2/2) T + sigma W_T), undiscounted."""
    d1 = (math.log(s0 / strike) + b * T + 0.5 * sigma**2 * T) / (sigma * math.sqrt(T))
    d2 = d1 - sigma * math.sqrt(T)
    return s0 * math.exp(b * T) * norm.cdf(d1) - strike * norm.cdf(d2)


def gaussian_price(payoff: PayoffSpec, m, s):
    """E g(m + s N) in closed form for calls and digitals."""
    m = np.asarray(m, dtype=float)
    s = np.asarray(s, dtype=float)
    out = np.zeros(np.broadcast(m, s).shape)
    for w, k in payoff.calls:
        d2 = (m - math.log(k)) / s
        out += w * (np.exp(m + s**2 / 2) * norm.cdf(d2 + s) - k * norm.cdf(d2))
    for w, level in payoff.digitals:
        out += w * norm.cdf((m - math.log(level)) / s)
    return out


@pytest.fixture
def table_vols():
    return {
        "sqrt_abs_shift": VolSpec.sqrt_abs_shift(0.1),
        "abs_shift": VolSpec.abs_shift(0.1),
        "sqrt_quadratic": VolSpec.sqrt_quadratic(),
        "sin_sq_shift": VolSpec.sin_sq_shift(0.05),
    }
