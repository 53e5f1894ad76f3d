"""Stacked peephole-LSTM forecaster with a dense head.

At every step the network sees ``(inside_t, outside_t, outside_{t+1})``
divided by the normalisation divisor and predicts ``inside_{t+1}``.  The
dense head outputs the change relative to the current inside input, so an
untrained network behaves like a persistence forecast.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from ..data_model import ModeSegment, NormalizationScale, OperationMode
from .lstm import LstmCellParams, LstmState, _step, _step_backward

FORMAT_VERSION = 1
INPUT_DIM = 3

# (low, high) per tuned hyperparameter; integers are inclusive.
TABLE1_RANGES: dict[str, tuple[float, float]] = {
    "cell_dim": (10, 15),
    "max_epochs": (2, 25),
    "epoch_size": (2, 10),
    "minibatch_size": (1, 15),
    "num_layers": (1, 2),
    "l2_weight": (1e-4, 8e-4),
    "init_std": (1e-4, 8e-4),
    "noise_std": (1e-4, 8e-4),
}
INTEGER_FIELDS = ("cell_dim", "max_epochs", "epoch_size", "minibatch_size", "num_layers")


@dataclass(frozen=True)
class NetworkConfig:
    cell_dim: int = 10
    num_layers: int = 1
    l2_weight: float = 1e-4
    init_std: float = 1e-4
    noise_std: float = 1e-4
    max_epochs: int = 25
    epoch_size: int = 10
    minibatch_size: int = 1
    teacher_forcing: bool = True
    clip_norm: float = 10.0
    cocob_alpha: float = 100.0

    def __post_init__(self):
        for name in INTEGER_FIELDS:
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("l2_weight", "init_std", "noise_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.clip_norm <= 0 or self.cocob_alpha <= 0:
            raise ValueError("clip_norm and cocob_alpha must be positive")

    def within_tuning_ranges(self) -> bool:
        return all(lo <= getattr(self, k) <= hi for k, (lo, hi) in TABLE1_RANGES.items())

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(frozen=True)
class RnnModel:
    layers: tuple[LstmCellParams, ...]
    dense_w: np.ndarray  # (cell_dim,)
    dense_b: float
    scale: NormalizationScale = NormalizationScale()
    mode: OperationMode = OperationMode.PASSIVE_COOLING
    config: NetworkConfig = NetworkConfig()
    training_loss: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("model needs at least one layer")
        if self.layers[0].input_dim != INPUT_DIM:
            raise ValueError(f"first layer must take {INPUT_DIM} inputs")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if upper.input_dim != lower.cell_dim:
                raise ValueError("layer input dims do not chain")
        if np.shape(self.dense_w) != (self.layers[-1].cell_dim,):
            raise ValueError("dense head must map cell_dim -> 1")

    # parameter vector view used by the optimiser and gradient checks
    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend(layer.arrays())
        out.append(np.asarray(self.dense_w, dtype=float))
        out.append(np.array([self.dense_b], dtype=float))
        return out

    def with_parameters(self, arrays: Sequence[np.ndarray]) -> "RnnModel":
        arrays = list(arrays)
        layers = []
        for k in range(len(self.layers)):
            layers.append(LstmCellParams.from_arrays(arrays[6 * k : 6 * k + 6]))
        return replace(self, layers=tuple(layers), dense_w=np.asarray(arrays[-2], dtype=float),
                       dense_b=float(np.asarray(arrays[-1]).reshape(-1)[0]))

    @property
    def is_weight(self) -> list[bool]:
        """Which entries of ``parameters()`` carry the L2 penalty (biases do not)."""
        return ([True, True, True, True, True, False] * len(self.layers)) + [True, False]


def init_model(config: NetworkConfig, mode: OperationMode, scale: NormalizationScale,
               rng: np.random.Generator) -> RnnModel:
    layers = []
    in_dim = INPUT_DIM
    for _ in range(config.num_layers):
        layers.append(LstmCellParams.initialise(in_dim, config.cell_dim, config.init_std, rng))
        in_dim = config.cell_dim
    dense_w = rng.normal(0.0, config.init_std, config.cell_dim)
    dense_b = float(rng.normal(0.0, config.init_std))
    return RnnModel(tuple(layers), dense_w, dense_b, scale, mode, config)


# ----------------------------------------------------------------- unrolling


@dataclass
class _Batch:
    """Normalised, padded batch: ``T`` steps, ``B`` sequences."""

    start: np.ndarray  # (B,) inside value at step 0
    outside: np.ndarray  # (T + 1, B)
    target: np.ndarray  # (T, B) inside value after each step
    mask: np.ndarray  # (T, B) bool


def make_batch(inside_seqs: Sequence[np.ndarray], outside_seqs: Sequence[np.ndarray]) -> _Batch:
    lengths = [len(s) for s in inside_seqs]
    T = max(lengths) - 1
    B = len(inside_seqs)
    outside = np.empty((T + 1, B))
    target = np.zeros((T, B))
    mask = np.zeros((T, B), dtype=bool)
    start = np.empty(B)
    for j, (ins, out) in enumerate(zip(inside_seqs, outside_seqs)):
        n = len(ins)
        start[j] = ins[0]
        outside[:n, j] = out
        outside[n:, j] = out[-1]
        target[: n - 1, j] = ins[1:]
        target[n - 1 :, j] = ins[-1]
        mask[: n - 1, j] = True
    return _Batch(start, outside, target, mask)


def _forward(model: RnnModel, batch: _Batch, teacher_forcing: bool, noise: np.ndarray | None):
    T, B = batch.target.shape
    states = [(np.zeros((B, layer.cell_dim)), np.zeros((B, layer.cell_dim))) for layer in model.layers]
    preds = np.empty((T, B))
    caches = []
    tops = []
    for t in range(T):
        if t == 0:
            inside = batch.start
        elif teacher_forcing:
            inside = batch.target[t - 1]
        else:
            inside = preds[t - 1]
        x = np.stack([inside, batch.outside[t], batch.outside[t + 1]], axis=1)
        if noise is not None:
            x = x + noise[t]
        a = x
        step_caches = []
        for k, layer in enumerate(model.layers):
            h_prev, c_prev = states[k]
            h, c_new, cache = _step(layer, h_prev, c_prev, a)
            states[k] = (h, c_new)
            step_caches.append(cache)
            a = h
        preds[t] = x[:, 0] + a @ model.dense_w + model.dense_b
        caches.append(step_caches)
        tops.append(a)
    return preds, caches, tops


def sequence_loss(model: RnnModel, batch: _Batch, teacher_forcing: bool = True,
                  noise: np.ndarray | None = None, l2_weight: float | None = None) -> float:
    """Summed squared one-step errors over all valid steps plus the L2 penalty."""
    preds, _, _ = _forward(model, batch, teacher_forcing, noise)
    resid = np.where(batch.mask, preds - batch.target, 0.0)
    l2 = model.config.l2_weight if l2_weight is None else l2_weight
    penalty = sum(np.sum(p * p) for p, w in zip(model.parameters(), model.is_weight) if w)
    return float(np.sum(resid * resid) + l2 * penalty)


def loss_and_gradients(model: RnnModel, batch: _Batch, teacher_forcing: bool = True,
                       noise: np.ndarray | None = None, l2_weight: float | None = None):
    """Loss and its gradient w.r.t. ``model.parameters()`` by backpropagation through time."""
    preds, caches, tops = _forward(model, batch, teacher_forcing, noise)
    T, B = batch.target.shape
    resid = np.where(batch.mask, preds - batch.target, 0.0)
    l2 = model.config.l2_weight if l2_weight is None else l2_weight

    layer_grads = [[np.zeros_like(a) for a in layer.arrays()] for layer in model.layers]
    g_dense_w = np.zeros_like(model.dense_w, dtype=float)
    g_dense_b = 0.0
    dh_next = [np.zeros((B, layer.cell_dim)) for layer in model.layers]
    dc_next = [np.zeros((B, layer.cell_dim)) for layer in model.layers]
    dx_next_inside = np.zeros(B)

    for t in range(T - 1, -1, -1):
        dpred = 2.0 * resid[t]
        if not teacher_forcing:
            dpred = dpred + dx_next_inside
        g_dense_w += tops[t].T @ dpred
        g_dense_b += float(np.sum(dpred))
        dh = np.outer(dpred, model.dense_w)
        for k in range(len(model.layers) - 1, -1, -1):
            da, dh_prev, dc_prev = _step_backward(
                model.layers[k], caches[t][k], dh + dh_next[k], dc_next[k], layer_grads[k]
            )
            dh_next[k] = dh_prev
            dc_next[k] = dc_prev
            dh = da
        # dh is now d loss / d x_t; the residual path adds dpred to the inside input
        dx_next_inside = dh[:, 0] + dpred

    grads = [g for lg in layer_grads for g in lg] + [g_dense_w, np.array([g_dense_b])]
    params = model.parameters()
    penalty = 0.0
    for j, (p, w) in enumerate(zip(params, model.is_weight)):
        if w:
            penalty += float(np.sum(p * p))
            grads[j] = grads[j] + 2.0 * l2 * p
    loss = float(np.sum(resid * resid) + l2 * penalty)
    return loss, grads


def bptt_gradients(model: RnnModel, segment: ModeSegment, teacher_forcing: bool | None = None):
    """Gradient of the single-segment training loss (no input noise)."""
    d = model.scale.divisor
    batch = make_batch([segment.inside_array / d], [segment.outside_array / d])
    tf = model.config.teacher_forcing if teacher_forcing is None else teacher_forcing
    _, grads = loss_and_gradients(model, batch, tf)
    return grads


# ------------------------------------------------------------------ inference


def predict_iterative(model: RnnModel, start_inside: float, outside_path: Sequence[float]) -> np.ndarray:
    """Free-running forecast of ``len(outside_path) - 1`` future inside temperatures."""
    outside = np.asarray(outside_path, dtype=float)
    h = len(outside) - 1
    if h <= 0:
        if h < 0:
            raise ValueError("outside_path must contain at least the current value")
        return np.empty(0)
    d = model.scale.divisor
    states = [LstmState.zeros(layer.cell_dim) for layer in model.layers]
    out = np.empty(h)
    inside = start_inside / d
    norm_out = outside / d
    for t in range(h):
        x = np.array([inside, norm_out[t], norm_out[t + 1]])
        a = x
        for k, layer in enumerate(model.layers):
            hid, cell, _ = _step(layer, states[k].hidden, states[k].cell, a)
            states[k] = LstmState(hid, cell)
            a = hid
        inside = x[0] + float(a @ model.dense_w) + model.dense_b
        out[t] = inside
    return out * d


@dataclass(frozen=True)
class RnnPredictor:
    """Adapter exposing the common ``predict(start_inside, outside_path)`` contract."""

    model: RnnModel

    @property
    def mode(self) -> OperationMode:
        return self.model.mode

    def predict(self, start_inside: float, outside_path: Sequence[float]) -> np.ndarray:
        return predict_iterative(self.model, start_inside, outside_path)


# ---------------------------------------------------------------- persistence


def model_to_dict(model: RnnModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "rnn",
        "mode": model.mode.value,
        "divisor": model.scale.divisor,
        "config": asdict(model.config),
        "layers": [
            {name: arr.tolist() for name, arr in zip(("W", "U", "p_i", "p_f", "p_o", "b"), layer.arrays())}
            for layer in model.layers
        ],
        "dense_w": np.asarray(model.dense_w).tolist(),
        "dense_b": model.dense_b,
        "training_loss": list(model.training_loss),
    }


def model_from_dict(data: dict) -> RnnModel:
    if data.get("kind", "rnn") != "rnn":
        raise ValueError(f"not an RNN model document (kind={data.get('kind')!r})")
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {data.get('format_version')!r}")
    layers = tuple(
        LstmCellParams(*(np.asarray(layer[n], dtype=float) for n in ("W", "U", "p_i", "p_f", "p_o", "b")))
        for layer in data["layers"]
    )
    return RnnModel(
        layers=layers,
        dense_w=np.asarray(data["dense_w"], dtype=float),
        dense_b=float(data["dense_b"]),
        scale=NormalizationScale(float(data["divisor"])),
        mode=OperationMode(data["mode"]),
        config=NetworkConfig.from_dict(data["config"]),
        training_loss=tuple(data.get("training_loss", ())),
    )


def dumps_model(model: RnnModel) -> str:
    return json.dumps(model_to_dict(model))


def loads_model(text: str) -> RnnModel:
    return model_from_dict(json.loads(text))
