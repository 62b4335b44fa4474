"""scikit-learn compatible wrapper around the numpy LSTM."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_1d, check_2d, check_same_length
from .network import LstmNetwork, forward
from .training import TrainConfig, make_windows, train_network


class LSTMRegressor(RegressorMixin, BaseEstimator):
    """One-step regressor over sliding windows of feature rows.

    ``fit(X, y)`` trains on every window of ``lookback`` consecutive rows of
    ``X``, with the target taken from ``y`` at the window's last row.
    ``predict(X)`` therefore returns ``len(X) - lookback + 1`` values.

    Parameters
    ----------
    hidden_sizes : tuple of int
        Cells per stacked layer.
    dropout, recurrent_dropout : float
        Input and recurrent dropout probabilities (one mask per sequence).
    lookback, batch_size, epochs, learning_rate, l2_rate, early_stop_patience
        See :class:`~fracdiff_lstm.lstm.training.TrainConfig`.
    random_state : int
        Seeds initialisation, shuffling and dropout masks.
    """

    def __init__(
        self,
        hidden_sizes=(32,),
        dropout=0.0,
        recurrent_dropout=0.0,
        lookback=10,
        batch_size=32,
        epochs=100,
        learning_rate=1e-3,
        l2_rate=0.0,
        early_stop_patience=None,
        random_state=0,
    ):
        self.hidden_sizes = hidden_sizes
        self.dropout = dropout
        self.recurrent_dropout = recurrent_dropout
        self.lookback = lookback
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.l2_rate = l2_rate
        self.early_stop_patience = early_stop_patience
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            lookback=self.lookback,
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            l2_rate=self.l2_rate,
            seed=self.random_state,
            early_stop_patience=self.early_stop_patience,
        )

    def fit(self, X, y, validation_data=None):
        cfg = self._config()
        X = check_2d(X, "X", min_rows=self.lookback + 1)
        y = check_1d(y, "y")
        check_same_length(X, y, ("X", "y"))
        self.network_ = LstmNetwork.initialize(
            X.shape[1], tuple(self.hidden_sizes), self.dropout, self.recurrent_dropout, self.random_state
        )
        rows = np.arange(self.lookback - 1, X.shape[0])
        val_rows = None
        if validation_data is not None:
            Xv = check_2d(validation_data[0], "X_val", min_rows=self.lookback)
            yv = check_1d(validation_data[1], "y_val")
            check_same_length(Xv, yv, ("X_val", "y_val"))
            val_rows = np.arange(X.shape[0] + self.lookback - 1, X.shape[0] + Xv.shape[0])
            X, y = np.vstack([X, Xv]), np.concatenate([y, yv])
        self.network_, self.history_ = train_network(self.network_, X, y, rows, val_rows, cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_2d(X, "X", min_rows=self.lookback)
        pred, _ = forward(self.network_, make_windows(X, self.lookback), "infer")
        return pred

    def score(self, X, y, sample_weight=None):
        """R^2 against ``y`` aligned to the windows' last rows."""
        y = check_1d(y, "y")
        return super().score(X, y[self.lookback - 1 :], sample_weight)
