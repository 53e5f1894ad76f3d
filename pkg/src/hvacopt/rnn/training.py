"""Global training across many short segments, and random-search tuning."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..data_model import ModeSegment, NormalizationScale
from .cocob import CocobState, cocob_update
from .model import (
    INTEGER_FIELDS,
    TABLE1_RANGES,
    NetworkConfig,
    RnnModel,
    init_model,
    loss_and_gradients,
    make_batch,
    predict_iterative,
)

log = logging.getLogger(__name__)


def _clip(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        return [g * (max_norm / norm) for g in grads]
    return grads


def train_global(
    segments: Sequence[ModeSegment],
    config: NetworkConfig = NetworkConfig(),
    seed: int = 0,
    scale: NormalizationScale = NormalizationScale(),
) -> RnnModel:
    """Train one model across all ``segments`` of a single operation mode.

    Each epoch makes ``config.epoch_size`` shuffled passes over the corpus in
    minibatches of whole segments.  The recorded per-epoch loss is the mean
    summed loss of one pass.
    """
    if not segments:
        raise ValueError("cannot train on an empty segment list")
    modes = {s.mode for s in segments}
    if len(modes) != 1:
        raise ValueError(f"segments mix operation modes: {sorted(m.value for m in modes)}")
    mode = modes.pop()
    rng = np.random.default_rng(seed)
    model = init_model(config, mode, scale, rng)
    d = scale.divisor
    inside = [s.inside_array / d for s in segments]
    outside = [s.outside_array / d for s in segments]

    params = model.parameters()
    state = CocobState.initialise(params, alpha=config.cocob_alpha)
    history = []
    n = len(segments)
    for epoch in range(config.max_epochs):
        epoch_loss = 0.0
        for _ in range(config.epoch_size):
            order = rng.permutation(n)
            for lo in range(0, n, config.minibatch_size):
                idx = order[lo : lo + config.minibatch_size]
                batch = make_batch([inside[i] for i in idx], [outside[i] for i in idx])
                noise = rng.normal(0.0, config.noise_std, (batch.target.shape[0], len(idx), 3))
                loss, grads = loss_and_gradients(model, batch, config.teacher_forcing, noise)
                state, params = cocob_update(state, params, _clip(grads, config.clip_norm))
                model = model.with_parameters(params)
                epoch_loss += loss
        history.append(epoch_loss / config.epoch_size)
        log.debug("mode=%s epoch=%d loss=%.6g", mode.value, epoch + 1, history[-1])
    return replace(model, training_loss=tuple(history))


# --------------------------------------------------------------------- tuning


@dataclass(frozen=True)
class Trial:
    index: int
    config: NetworkConfig
    validation_rmse: float


def sample_config(rng: np.random.Generator, base: NetworkConfig = NetworkConfig(),
                  ranges: dict[str, tuple[float, float]] = TABLE1_RANGES) -> NetworkConfig:
    values = {}
    for name, (lo, hi) in ranges.items():
        if name in INTEGER_FIELDS:
            values[name] = int(rng.integers(int(lo), int(hi) + 1))
        else:
            values[name] = float(rng.uniform(lo, hi))
    return replace(base, **values)


def validation_rmse(model: RnnModel, segments: Sequence[ModeSegment]) -> float:
    """RMSE of the free-running forecast of each segment's last value."""
    errs = []
    for s in segments:
        pred = predict_iterative(model, s.inside[0], s.outside)
        errs.append(pred[-1] - s.inside[-1])
    score = float(np.sqrt(np.mean(np.square(errs))))
    return score if math.isfinite(score) else math.inf


def _holdout_last(segments: Sequence[ModeSegment]) -> list[ModeSegment]:
    return [replace(s, inside=s.inside[:-1], outside=s.outside[:-1]) for s in segments]


def _run_trial(args) -> Trial:
    index, config, segments, seed, scale = args
    model = train_global(_holdout_last(segments), config, seed, scale)
    return Trial(index, config, validation_rmse(model, segments))


def search_hyperparameters(
    segments: Sequence[ModeSegment],
    budget: int = 20,
    seed: int = 0,
    ranges: dict[str, tuple[float, float]] = TABLE1_RANGES,
    base: NetworkConfig = NetworkConfig(),
    scale: NormalizationScale = NormalizationScale(),
    jobs: int = 1,
) -> list[Trial]:
    """Random search: each trial trains on all-but-last values and scores the last."""
    if budget < 1:
        raise ValueError("tuning budget must be at least 1")
    if any(len(s) < 3 for s in segments):
        raise ValueError("tuning needs segments of length >= 3 to hold out the last value")
    rng = np.random.default_rng(seed)
    configs = [sample_config(rng, base, ranges) for _ in range(budget)]
    trial_seeds = rng.integers(0, 2**31, size=budget)
    work = [(i, cfg, list(segments), int(s), scale) for i, (cfg, s) in enumerate(zip(configs, trial_seeds))]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trials = list(pool.map(_run_trial, work))
    else:
        trials = [_run_trial(w) for w in work]
    for t in trials:
        log.info("trial %d rmse=%.4f config=%s", t.index, t.validation_rmse, t.config)
    return sorted(trials, key=lambda t: t.index)


def tune_hyperparameters(segments, ranges=TABLE1_RANGES, budget: int = 20, seed: int = 0, **kwargs) -> NetworkConfig:
    trials = search_hyperparameters(segments, budget, seed, ranges, **kwargs)
    return best_trial(trials).config


def best_trial(trials: Sequence[Trial]) -> Trial:
    # ties resolve to the earliest trial
    return min(trials, key=lambda t: (t.validation_rmse, t.index))
