"""Training, prediction and random-search tuning for :class:`LstmNetwork`."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ContractError, InsufficientDataError, NumericError, TrainingError, TuningError
from .network import LstmNetwork, backward, forward

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lookback: int = 10
    batch_size: int = 32
    epochs: int = 100
    learning_rate: float = 1e-3
    l2_rate: float = 0.0
    seed: int = 0
    early_stop_patience: int | None = None

    def __post_init__(self):
        if self.lookback < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ContractError("lookback and batch_size must be >= 1 and epochs >= 0")
        if not self.learning_rate > 0:
            raise ContractError("learning_rate must be positive")
        if self.l2_rate < 0:
            raise ContractError("l2_rate must be non-negative")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture plus training configuration: one point of the tuning space."""

    hidden_sizes: tuple = (32,)
    dropout: float = 0.0
    recurrent_dropout: float = 0.0
    train: TrainConfig = field(default_factory=TrainConfig)

    def build(self, n_inputs: int, seed=None) -> LstmNetwork:
        return LstmNetwork.initialize(
            n_inputs,
            self.hidden_sizes,
            self.dropout,
            self.recurrent_dropout,
            self.train.seed if seed is None else seed,
        )

    def n_params(self, n_inputs: int) -> int:
        total, width = 0, n_inputs
        for h in self.hidden_sizes:
            total += 4 * h * (width + h + 1)
            width = h
        return total + width + 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden_sizes"] = list(self.hidden_sizes)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        return cls(
            tuple(int(h) for h in data["hidden_sizes"]),
            float(data["dropout"]),
            float(data["recurrent_dropout"]),
            TrainConfig(**data["train"]),
        )


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        out = []
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            out.append(p - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps))
        return out


def make_windows(X, lookback: int) -> np.ndarray:
    """All length-``lookback`` windows; window ``j`` ends at row ``j + lookback - 1``."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < lookback:
        raise InsufficientDataError(f"need at least {lookback} rows, got {X.shape[0]}")
    return np.ascontiguousarray(sliding_window_view(X, (lookback, X.shape[1]))[:, 0])


def _end_rows(mask, lookback):
    rows = np.flatnonzero(mask)
    return rows[rows >= lookback - 1]


def evaluate(net: LstmNetwork, windows, targets) -> float:
    pred, _ = forward(net, windows, "infer")
    return float(np.mean((pred - targets) ** 2))


def train_network(net: LstmNetwork, X, y, train_rows, val_rows, cfg: TrainConfig):
    """Mini-batch Adam on windows ending at ``train_rows``.

    Returns ``(net, history)``. ``net`` is updated in place. With early
    stopping, the parameters with the best validation loss are restored.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    L = cfg.lookback
    all_windows = make_windows(X, L)
    train_rows = np.asarray(train_rows)
    if train_rows.size < 1:
        raise InsufficientDataError("no training windows")
    Xw, yw = all_windows[train_rows - (L - 1)], y[train_rows]
    has_val = val_rows is not None and len(val_rows) > 0
    if has_val:
        val_rows = np.asarray(val_rows)
        Vw, vy = all_windows[val_rows - (L - 1)], y[val_rows]

    history = {"train_loss": [], "val_loss": []}
    if cfg.epochs == 0:
        return net, history

    rng = np.random.default_rng(cfg.seed)
    opt = Adam(net.parameters(), cfg.learning_rate)
    best_val, best_params, stale = math.inf, None, 0
    n = Xw.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            try:
                loss, grads = backward(net, Xw[idx], yw[idx], cfg.l2_rate, "train", rng)
            except NumericError as exc:
                raise TrainingError(f"training diverged at epoch {epoch}: {exc}", history) from exc
            if not math.isfinite(loss):
                raise TrainingError(f"training diverged at epoch {epoch} (loss={loss})", history)
            net.set_parameters(opt.step(net.parameters(), grads))
            batch_losses.append(loss)
        history["train_loss"].append(float(np.mean(batch_losses)))
        if has_val:
            try:
                val = evaluate(net, Vw, vy)
            except NumericError as exc:
                raise TrainingError(f"validation diverged at epoch {epoch}: {exc}", history) from exc
            if not math.isfinite(val):
                raise TrainingError(f"validation loss is not finite at epoch {epoch}", history)
            history["val_loss"].append(val)
            if cfg.early_stop_patience is not None:
                if val < best_val:
                    best_val, best_params, stale = val, [p.copy() for p in net.parameters()], 0
                else:
                    stale += 1
                    if stale >= cfg.early_stop_patience:
                        break
    if best_params is not None:
        net.set_parameters(best_params)
    return net, history


def fit(net: LstmNetwork, features, cfg: TrainConfig, train_mask=None, val_mask=None):
    """Train ``net`` on a :class:`~fracdiff_lstm.indicators.FeatureMatrix`.

    Defaults reproduce the tuning arrangement: fit on training rows outside
    the validation window and record validation loss on the validation rows.
    """
    if train_mask is None:
        train_mask = features.fit_mask
        if val_mask is None:
            val_mask = features.val_mask
    train_rows = _end_rows(train_mask, cfg.lookback)
    if train_rows.size < 1 or np.count_nonzero(train_mask) < cfg.lookback + 1:
        raise InsufficientDataError(f"need at least lookback+1={cfg.lookback + 1} training rows")
    val_rows = None if val_mask is None else _end_rows(val_mask, cfg.lookback)
    return train_network(net, features.X, features.y, train_rows, val_rows, cfg)


@dataclass(frozen=True)
class Predictions:
    """One-day-ahead predictions: made at the end of ``dates[j]`` for ``target_dates[j]``."""

    dates: np.ndarray
    target_dates: np.ndarray
    values: np.ndarray

    def to_csv(self) -> str:
        lines = ["Date,predicted_diff"] + [f"{d},{float(v)!r}" for d, v in zip(self.target_dates, self.values)]
        return "\n".join(lines) + "\n"


def predict_series(net: LstmNetwork, features, lookback: int, mask=None) -> Predictions:
    """Inference-mode predictions, de-standardised to differenced units.

    Every row from the ``lookback``-th onward gets a prediction; ``mask``
    (over rows) restricts which of those are returned.
    """
    X = features.X
    if X.shape[0] < lookback:
        raise InsufficientDataError(f"need at least {lookback} feature rows, got {X.shape[0]}")
    rows = np.arange(lookback - 1, X.shape[0])
    if mask is not None:
        rows = rows[np.asarray(mask)[rows]]
    windows = make_windows(X, lookback)[rows - (lookback - 1)]
    if rows.size == 0:
        values = np.empty(0)
    else:
        values, _ = forward(net, windows, "infer")
    return Predictions(features.dates[rows], features.target_dates[rows], features.unscale_target(values))


# ---------------------------------------------------------------------------
# tuning
# ---------------------------------------------------------------------------

DEFAULT_SPACE = {
    "layers": [1, 2],
    "cells": [16, 32, 64],
    "dropout": [0.0, 0.4],
    "recurrent_dropout": [0.0, 0.4],
    "l2_rate": [1e-6, 1e-3],
    "learning_rate": [1e-4, 1e-2],
    "batch_size": [16, 32, 64],
    "epochs": [50, 300],
    "lookback": 10,
    "early_stop_patience": None,
}


def sample_spec(space: dict, rng) -> ModelSpec:
    """Draw one :class:`ModelSpec`.

    List-valued ``layers``, ``cells`` and ``batch_size`` are choices;
    ``dropout``/``recurrent_dropout`` are uniform on ``[lo, hi]``;
    ``l2_rate``/``learning_rate`` are log-uniform; ``epochs`` is an
    inclusive integer range.
    """

    def log_uniform(lo, hi):
        return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))

    n_layers = int(rng.choice(space["layers"]))
    hidden = tuple(int(rng.choice(space["cells"])) for _ in range(n_layers))
    dropout = float(rng.uniform(*space["dropout"]))
    rec = float(rng.uniform(*space["recurrent_dropout"]))
    l2 = log_uniform(*space["l2_rate"])
    lr = log_uniform(*space["learning_rate"])
    batch = int(rng.choice(space["batch_size"]))
    epochs = int(rng.integers(space["epochs"][0], space["epochs"][1] + 1))
    cfg = TrainConfig(
        lookback=int(space.get("lookback", 10)),
        batch_size=batch,
        epochs=epochs,
        learning_rate=lr,
        l2_rate=l2,
        early_stop_patience=space.get("early_stop_patience"),
    )
    return ModelSpec(hidden, dropout, rec, cfg)


@dataclass(frozen=True)
class TuneResult:
    best: ModelSpec
    best_score: float
    log: tuple


def tune(features, space=None, budget: int = 10, seed: int = 0) -> TuneResult:
    """Random search scored by validation MSE.

    ``space`` is either a dict of ranges (see :func:`sample_spec`) or an
    explicit sequence of :class:`ModelSpec` candidates tried in order. Each
    trial gets a seed derived from ``seed`` and its index, trains on the
    training rows outside the validation window and is scored on the
    validation rows. Ties go to the smaller network, then the earlier draw.
    """
    if budget < 1:
        raise ContractError("budget must be >= 1")
    space = DEFAULT_SPACE if space is None else space
    rng = np.random.default_rng(seed)
    trial_seeds = np.random.SeedSequence(seed).generate_state(budget)
    n_inputs = features.X.shape[1]
    log = []
    for k in range(budget):
        if isinstance(space, dict):
            spec = sample_spec(space, rng)
        else:
            candidates = list(space)
            if k >= len(candidates):
                break
            spec = candidates[k]
        spec = replace(spec, train=replace(spec.train, seed=int(trial_seeds[k])))
        entry = {"trial": k, "spec": spec.to_dict(), "n_params": spec.n_params(n_inputs)}
        try:
            net = spec.build(n_inputs)
            net, history = fit(net, features, spec.train)
            score = evaluate_on(net, features, features.val_mask, spec.train.lookback)
            entry.update(status="ok", score=score, epochs_run=len(history["train_loss"]))
        except (TrainingError, NumericError) as exc:
            entry.update(status="diverged", score=math.inf, error=str(exc))
        logger.info("trial %d: %s score=%s", k, entry["status"], entry["score"])
        log.append(entry)
    ok = [e for e in log if e["status"] == "ok" and math.isfinite(e["score"])]
    if not ok:
        raise TuningError("every tuning trial diverged", tuple(log))
    winner = min(ok, key=lambda e: (e["score"], e["n_params"], e["trial"]))
    return TuneResult(ModelSpec.from_dict(winner["spec"]), winner["score"], tuple(log))


def evaluate_on(net, features, mask, lookback) -> float:
    rows = _end_rows(mask, lookback)
    if rows.size == 0:
        raise InsufficientDataError("no rows to score on")
    windows = make_windows(features.X, lookback)[rows - (lookback - 1)]
    return evaluate(net, windows, features.y[rows])
