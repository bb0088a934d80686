"""European option pricing under fractional Ornstein-Uhlenbeck stochastic volatility."""

from .fbm import FbmGrid, RngStream, fbm_cov, sample_fbm_increments
from .model import ModelParams, VolSpec
from .payoff import PayoffSpec
from .pricers import (
    PriceEstimate,
    XGrid,
    price,
    price_direct,
    price_level1,
    price_level2,
    price_level3,
)

__all__ = [
    "FbmGrid",
    "ModelParams",
    "PayoffSpec",
    "PriceEstimate",
    "RngStream",
    "VolSpec",
    "XGrid",
    "fbm_cov",
    "price",
    "price_direct",
    "price_level1",
    "price_level2",
    "price_level3",
    "sample_fbm_increments",
]
