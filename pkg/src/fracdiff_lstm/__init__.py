"""Fractional and tempered differencing of price series with LSTM forecasting and backtesting."""

from .exceptions import FracDiffLSTMError
from .fracdiff import DiffSpec, apply_diff, frac_weights, invert_diff, tempered_weights
from .lstm import LSTMRegressor
from .transformers import FracDiffTransformer, LongMemoryEstimator

__version__ = "0.1.0"

__all__ = [
    "DiffSpec",
    "FracDiffLSTMError",
    "FracDiffTransformer",
    "LSTMRegressor",
    "LongMemoryEstimator",
    "apply_diff",
    "frac_weights",
    "invert_diff",
    "tempered_weights",
    "__version__",
]
