"""Stacked LSTM regression network in numpy, with backpropagation through time.

Gate rows in the stacked weight matrices are ordered forget, input,
candidate, output. Shapes follow the batch-first convention: a batch of
windows is ``(batch, lookback, features)``.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import ContractError, NumericError

GATES = ("forget", "input", "candidate", "output")


def sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmCellParams:
    """Weights of one layer: ``W_v`` (4H x I), ``W_h`` (4H x H), ``b`` (4H)."""

    W_v: np.ndarray
    W_h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W_v = np.asarray(self.W_v, dtype=np.float64)
        self.W_h = np.asarray(self.W_h, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        four_h = self.b.shape[0]
        if four_h % 4 or self.W_v.shape[0] != four_h or self.W_h.shape != (four_h, four_h // 4):
            raise ContractError(
                f"inconsistent LSTM layer shapes W_v={self.W_v.shape} W_h={self.W_h.shape} b={self.b.shape}"
            )

    @property
    def hidden(self) -> int:
        return self.b.shape[0] // 4

    @property
    def n_inputs(self) -> int:
        return self.W_v.shape[1]

    def gate(self, name: str):
        """``(W_v, W_h, b)`` views for one gate."""
        H = self.hidden
        k = GATES.index(name)
        rows = slice(k * H, (k + 1) * H)
        return self.W_v[rows], self.W_h[rows], self.b[rows]

    @classmethod
    def zeros(cls, n_inputs: int, hidden: int) -> "LstmCellParams":
        return cls(np.zeros((4 * hidden, n_inputs)), np.zeros((4 * hidden, hidden)), np.zeros(4 * hidden))

    @classmethod
    def initialize(cls, n_inputs: int, hidden: int, rng) -> "LstmCellParams":
        limit = np.sqrt(6.0 / (n_inputs + 4 * hidden))
        W_v = rng.uniform(-limit, limit, size=(4 * hidden, n_inputs))
        W_h = np.vstack([_orthogonal(hidden, rng) for _ in GATES])
        b = np.zeros(4 * hidden)
        b[:hidden] = 1.0
        return cls(W_v, W_h, b)


def _orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@dataclass
class CellCache:
    v: np.ndarray
    h_prev: np.ndarray
    s_prev: np.ndarray
    f: np.ndarray
    i: np.ndarray
    g: np.ndarray
    o: np.ndarray
    s: np.ndarray
    tanh_s: np.ndarray


def cell_step(params: LstmCellParams, v_t, h_prev, s_prev):
    """One memory-cell update.

    ``f, i, o`` are sigmoid gates, ``g`` the tanh candidate,
    ``s_t = f * s_prev + i * g`` and ``h_t = o * tanh(s_t)``. Works on a single
    vector or a batch of row vectors.
    """
    v_t, h_prev, s_prev = (np.asarray(a, dtype=np.float64) for a in (v_t, h_prev, s_prev))
    H = params.hidden
    if v_t.shape[-1] != params.n_inputs or h_prev.shape[-1] != H or s_prev.shape[-1] != H:
        raise ContractError(
            f"cell_step expects inputs of width {params.n_inputs} and states of width {H}, got "
            f"{v_t.shape}, {h_prev.shape}, {s_prev.shape}"
        )
    z = v_t @ params.W_v.T + h_prev @ params.W_h.T + params.b
    f = sigmoid(z[..., :H])
    i = sigmoid(z[..., H : 2 * H])
    g = np.tanh(z[..., 2 * H : 3 * H])
    o = sigmoid(z[..., 3 * H :])
    s = f * s_prev + i * g
    tanh_s = np.tanh(s)
    h = o * tanh_s
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(s))):
        raise NumericError("non-finite LSTM cell output")
    return h, s, CellCache(v_t, h_prev, s_prev, f, i, g, o, s, tanh_s)


@dataclass
class LstmNetwork:
    """Stacked LSTM layers followed by an affine head on the last time step."""

    layers: list
    head_w: np.ndarray
    head_b: float = 0.0
    dropout: float = 0.0
    recurrent_dropout: float = 0.0

    def __post_init__(self):
        self.head_w = np.asarray(self.head_w, dtype=np.float64)
        self.head_b = float(self.head_b)
        for a, b in zip(self.layers, self.layers[1:]):
            if b.n_inputs != a.hidden:
                raise ContractError("layer input width must equal the previous layer's hidden size")
        if self.head_w.shape != (self.layers[-1].hidden,):
            raise ContractError("head width must equal the last layer's hidden size")
        for p in (self.dropout, self.recurrent_dropout):
            if not 0.0 <= p < 1.0:
                raise ContractError(f"dropout probabilities must be in [0, 1), got {p}")

    @classmethod
    def initialize(cls, n_inputs, hidden_sizes, dropout=0.0, recurrent_dropout=0.0, seed=0) -> "LstmNetwork":
        rng = np.random.default_rng(seed)
        layers, width = [], n_inputs
        for h in hidden_sizes:
            layers.append(LstmCellParams.initialize(width, h, rng))
            width = h
        limit = np.sqrt(6.0 / (width + 1))
        return cls(layers, rng.uniform(-limit, limit, size=width), 0.0, dropout, recurrent_dropout)

    @classmethod
    def zeros(cls, n_inputs, hidden_sizes) -> "LstmNetwork":
        layers, width = [], n_inputs
        for h in hidden_sizes:
            layers.append(LstmCellParams.zeros(width, h))
            width = h
        return cls(layers, np.zeros(width), 0.0)

    @property
    def n_inputs(self) -> int:
        return self.layers[0].n_inputs

    @property
    def hidden_sizes(self) -> tuple:
        return tuple(layer.hidden for layer in self.layers)

    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def parameters(self) -> list:
        """Parameter arrays in a fixed order (shared by gradients and optimisers)."""
        out = []
        for layer in self.layers:
            out += [layer.W_v, layer.W_h, layer.b]
        out.append(self.head_w)
        out.append(np.array([self.head_b]))
        return out

    def set_parameters(self, arrays) -> None:
        arrays = list(arrays)
        for k, layer in enumerate(self.layers):
            layer.W_v, layer.W_h, layer.b = (np.array(a, dtype=np.float64) for a in arrays[3 * k : 3 * k + 3])
        self.head_w = np.array(arrays[-2], dtype=np.float64)
        self.head_b = float(np.asarray(arrays[-1]).ravel()[0])

    def copy(self) -> "LstmNetwork":
        net = LstmNetwork(
            [LstmCellParams(l.W_v.copy(), l.W_h.copy(), l.b.copy()) for l in self.layers],
            self.head_w.copy(),
            self.head_b,
            self.dropout,
            self.recurrent_dropout,
        )
        return net

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        def enc(a):
            a = np.ascontiguousarray(a, dtype="<f8")
            return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}

        return {
            "hidden_sizes": list(self.hidden_sizes),
            "n_inputs": self.n_inputs,
            "dropout": self.dropout,
            "recurrent_dropout": self.recurrent_dropout,
            "parameters": [enc(p) for p in self.parameters()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LstmNetwork":
        def dec(item):
            return np.frombuffer(base64.b64decode(item["data"]), dtype="<f8").reshape(item["shape"]).copy()

        net = cls.zeros(data["n_inputs"], data["hidden_sizes"])
        net.dropout = data["dropout"]
        net.recurrent_dropout = data["recurrent_dropout"]
        net.set_parameters([dec(p) for p in data["parameters"]])
        return net


@dataclass
class ForwardCache:
    layer_caches: list
    masks: list
    last_h: np.ndarray
    batch: int = field(default=0)


def _draw_masks(net, batch, rng):
    masks = []
    for layer in net.layers:
        m_in = m_rec = None
        if net.dropout > 0:
            keep = 1.0 - net.dropout
            m_in = (rng.random((batch, layer.n_inputs)) < keep) / keep
        if net.recurrent_dropout > 0:
            keep = 1.0 - net.recurrent_dropout
            m_rec = (rng.random((batch, layer.hidden)) < keep) / keep
        masks.append((m_in, m_rec))
    return masks


def forward(net: LstmNetwork, windows, mode: str = "infer", seed=None):
    """Run the network over ``windows`` of shape ``(lookback, features)`` or ``(batch, lookback, features)``.

    In ``train`` mode one input mask and one recurrent mask are drawn per
    sequence (and reused across time steps) from ``seed``; masks use inverted
    scaling so ``infer`` mode needs no rescaling. Returns ``(predictions, cache)``.
    """
    x = np.asarray(windows, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[2] != net.n_inputs:
        raise ContractError(f"expected windows of width {net.n_inputs}, got shape {np.shape(windows)}")
    if mode not in ("train", "infer"):
        raise ContractError(f"mode must be 'train' or 'infer', got {mode!r}")
    B, T, _ = x.shape
    if mode == "train":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        masks = _draw_masks(net, B, rng)
    else:
        masks = [(None, None)] * len(net.layers)

    seq = x
    caches = []
    for layer, (m_in, m_rec) in zip(net.layers, masks):
        h = np.zeros((B, layer.hidden))
        s = np.zeros((B, layer.hidden))
        outputs = np.empty((B, T, layer.hidden))
        steps = []
        for t in range(T):
            v = seq[:, t] if m_in is None else seq[:, t] * m_in
            h_in = h if m_rec is None else h * m_rec
            h, s, c = cell_step(layer, v, h_in, s)
            outputs[:, t] = h
            steps.append(c)
        caches.append(steps)
        seq = outputs
    last = seq[:, -1]
    pred = last @ net.head_w + net.head_b
    if not np.all(np.isfinite(pred)):
        raise NumericError("non-finite network output")
    cache = ForwardCache(caches, masks, last, B)
    return (pred[0] if single else pred), cache


@np.errstate(over="ignore", invalid="ignore")
def weight_penalty(net: LstmNetwork) -> float:
    total = sum(float(np.sum(l.W_v**2) + np.sum(l.W_h**2)) for l in net.layers)
    return total + float(np.sum(net.head_w**2))


# divergence is reported through the finiteness checks, not floating-point warnings
@np.errstate(over="ignore", invalid="ignore")
def backward(net: LstmNetwork, windows, targets, l2_rate: float = 0.0, mode: str = "infer", seed=None):
    """Loss and gradients for a batch.

    ``loss = mean((pred - target)^2) + l2_rate * sum(W^2)`` over all weight
    matrices and the head weights (biases excluded). Gradients come back in
    the order of :meth:`LstmNetwork.parameters`.
    """
    x = np.asarray(windows, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if x.ndim == 2:
        x = x[None]
    if x.shape[0] == 0:
        raise ContractError("backward needs a non-empty batch")
    if y.size != x.shape[0]:
        raise ContractError("one target per window is required")
    pred, cache = forward(net, x, mode, seed)
    B = x.shape[0]
    resid = pred - y
    data_loss = float(np.mean(resid**2))
    loss = data_loss + l2_rate * weight_penalty(net)

    dpred = 2.0 * resid / B
    g_head_w = cache.last_h.T @ dpred + 2.0 * l2_rate * net.head_w
    g_head_b = np.array([dpred.sum()])

    grads = []
    T = x.shape[1]
    d_out = np.zeros((B, T, net.layers[-1].hidden))
    d_out[:, -1] = np.outer(dpred, net.head_w)
    for layer, steps, (m_in, m_rec) in reversed(list(zip(net.layers, cache.layer_caches, cache.masks))):
        H = layer.hidden
        gW_v = np.zeros_like(layer.W_v)
        gW_h = np.zeros_like(layer.W_h)
        gb = np.zeros_like(layer.b)
        d_in = np.zeros((B, T, layer.n_inputs))
        dh_next = np.zeros((B, H))
        ds_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            c = steps[t]
            dh = d_out[:, t] + dh_next
            do = dh * c.tanh_s
            ds = dh * c.o * (1.0 - c.tanh_s**2) + ds_next
            dz = np.empty((B, 4 * H))
            dz[:, :H] = ds * c.s_prev * c.f * (1.0 - c.f)
            dz[:, H : 2 * H] = ds * c.g * c.i * (1.0 - c.i)
            dz[:, 2 * H : 3 * H] = ds * c.i * (1.0 - c.g**2)
            dz[:, 3 * H :] = do * c.o * (1.0 - c.o)
            ds_next = ds * c.f
            gW_v += dz.T @ c.v
            gW_h += dz.T @ c.h_prev
            gb += dz.sum(axis=0)
            dv = dz @ layer.W_v
            d_in[:, t] = dv if m_in is None else dv * m_in
            dhp = dz @ layer.W_h
            dh_next = dhp if m_rec is None else dhp * m_rec
        gW_v += 2.0 * l2_rate * layer.W_v
        gW_h += 2.0 * l2_rate * layer.W_h
        grads = [gW_v, gW_h, gb] + grads
        d_out = d_in
    grads += [g_head_w, g_head_b]
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericError("non-finite gradients")
    return loss, grads


def save_checkpoint(path, net: LstmNetwork, train_config: dict, scaler_ref=None, extra=None) -> Path:
    """Write architecture, parameters, training config and scaler reference as JSON."""
    path = Path(path)
    record = {"network": net.to_dict(), "train_config": train_config, "scaler": scaler_ref}
    if extra:
        record.update(extra)
    path.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path):
    record = json.loads(Path(path).read_text(encoding="utf-8"))
    return LstmNetwork.from_dict(record["network"]), record
