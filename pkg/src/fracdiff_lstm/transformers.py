"""scikit-learn compatible wrappers for order estimation and differencing."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_1d
from .exceptions import ContractError
from .fracdiff import DiffSpec, apply_diff, invert_diff, weights_for
from .longmem import whittle_fit
from .stationarity import CRITICAL_VALUE, SEARCH_TAU, search_min_d

METHODS = ("integer", "fixed", "deprado", "arfima", "artfima")


def _column(X):
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ContractError(f"expected a single column, got shape {arr.shape}")
        arr = arr[:, 0]
    return arr


class FracDiffTransformer(TransformerMixin, BaseEstimator):
    """Fixed-width (tempered) fractional differencing of a single series.

    ``method`` decides how the order is chosen during :meth:`fit`:

    ``integer``
        ``d`` as given (must be whole); ``d=1`` gives log returns.
    ``fixed``
        ``d`` and ``lam`` as given.
    ``deprado``
        smallest ``d`` on a 0.01 grid that passes the ADF test.
    ``arfima`` / ``artfima``
        Whittle estimate of ``d`` (and ``lam``).

    :meth:`transform` returns an array of the input's length with NaN over the
    ``window - 1`` warm-up positions, so the output lines up with the input.

    Attributes
    ----------
    spec_ : DiffSpec
    weights_ : ndarray
    window_ : int
    fit_info_ : object
        The search or Whittle result used to pick the order, if any.
    """

    def __init__(self, method="deprado", d=1.0, lam=0.0, tau=SEARCH_TAU, critical_value=CRITICAL_VALUE):
        self.method = method
        self.d = d
        self.lam = lam
        self.tau = tau
        self.critical_value = critical_value

    def fit(self, X, y=None):
        x = check_1d(_column(X), "X")
        info = None
        if self.method == "integer":
            spec = DiffSpec("integer", self.d, 0.0, self.tau)
        elif self.method == "fixed":
            kind = "tempered" if self.lam > 0 else "fractional"
            spec = DiffSpec(kind, self.d, self.lam, self.tau)
        elif self.method == "deprado":
            info = search_min_d(x, tau=self.tau, critical_value=self.critical_value)
            spec = DiffSpec("fractional", info.d_star, 0.0, self.tau)
        elif self.method == "arfima":
            info = whittle_fit(x, "arfima")
            spec = DiffSpec("fractional", max(info.d_hat, 0.0), 0.0, self.tau)
        elif self.method == "artfima":
            info = whittle_fit(x, "artfima")
            spec = DiffSpec("tempered", info.d_hat, info.lambda_hat, self.tau)
        else:
            raise ContractError(f"method must be one of {METHODS}, got {self.method!r}")
        self.spec_ = spec
        self.weights_ = weights_for(spec)
        self.window_ = self.weights_.window
        self.fit_info_ = info
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        x = check_1d(_column(X), "X")
        out = np.full(x.size, np.nan)
        out[self.window_ - 1 :] = apply_diff(x, self.weights_)
        return out.reshape(np.shape(X))

    def inverse_transform(self, Xt, history):
        """Rebuild the levels from differenced values and the preceding ``window - 1`` levels."""
        check_is_fitted(self, "spec_")
        return invert_diff(check_1d(_column(Xt), "Xt", min_length=0), self.weights_, history)


class LongMemoryEstimator(BaseEstimator):
    """Whittle estimator of the long-memory parameters of a series.

    After :meth:`fit`, ``d_`` and ``lambda_`` hold the estimates and
    ``result_`` the full :class:`~fracdiff_lstm.longmem.LongMemFit`.
    """

    def __init__(self, model="arfima", n_restarts=5, max_iter=500):
        self.model = model
        self.n_restarts = n_restarts
        self.max_iter = max_iter

    def fit(self, X, y=None):
        self.result_ = whittle_fit(_column(X), self.model, self.n_restarts, self.max_iter)
        self.d_ = self.result_.d_hat
        self.lambda_ = self.result_.lambda_hat
        self.n_features_in_ = 1
        return self
