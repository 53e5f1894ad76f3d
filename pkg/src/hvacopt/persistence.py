"""JSON documents for every forecaster kind, dispatched on a ``kind`` tag."""
from __future__ import annotations

import json

import numpy as np

from .baselines import AsymptoteMode, DecayModel, FfnnModel, MlrModel, PersistenceModel
from .data_model import NormalizationScale
from .rnn.model import FORMAT_VERSION, RnnModel, RnnPredictor, model_from_dict, model_to_dict


def to_dict(model) -> dict:
    if isinstance(model, RnnPredictor):
        model = model.model
    if isinstance(model, RnnModel):
        return model_to_dict(model)
    head = {"format_version": FORMAT_VERSION}
    if isinstance(model, PersistenceModel):
        return {**head, "kind": "persistence"}
    if isinstance(model, MlrModel):
        return {**head, "kind": "mlr", "coefficients": list(model.coefficients), "intercept": model.intercept}
    if isinstance(model, FfnnModel):
        return {
            **head,
            "kind": "ffnn",
            "structure": list(model.structure),
            "activation": model.activation,
            "divisor": model.scale.divisor,
            "weights": [np.asarray(w).tolist() for w in model.weights],
            "biases": [np.asarray(b).tolist() for b in model.biases],
        }
    if isinstance(model, DecayModel):
        return {
            **head,
            "kind": "decay",
            "tau_estimate": model.tau_estimate,
            "asymptote_mode": model.asymptote_mode.value,
            "asymptote": model.asymptote,
            "step_minutes": model.step_minutes,
        }
    raise TypeError(f"cannot serialise {type(model).__name__}")


def from_dict(data: dict):
    """Rebuild a predictor; RNN documents come back wrapped in :class:`RnnPredictor`."""
    kind = data.get("kind")
    if data.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {data.get('format_version')!r}")
    if kind == "rnn":
        return RnnPredictor(model_from_dict(data))
    if kind == "persistence":
        return PersistenceModel()
    if kind == "mlr":
        return MlrModel(tuple(data["coefficients"]), float(data["intercept"]))
    if kind == "ffnn":
        return FfnnModel(
            tuple(data["structure"]),
            tuple(np.asarray(w, dtype=float) for w in data["weights"]),
            tuple(np.asarray(b, dtype=float) for b in data["biases"]),
            data["activation"],
            NormalizationScale(float(data["divisor"])),
        )
    if kind == "decay":
        return DecayModel(
            float(data["tau_estimate"]),
            AsymptoteMode(data["asymptote_mode"]),
            data.get("asymptote"),
            int(data.get("step_minutes", 15)),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def dumps(model) -> str:
    return json.dumps(to_dict(model), sort_keys=True)


def loads(text: str):
    return from_dict(json.loads(text))
