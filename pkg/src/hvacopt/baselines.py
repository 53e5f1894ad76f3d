"""Classical one-step predictors run through the same iterative protocol.

Every model here exposes ``predict(start_inside, outside_path)`` returning
``len(outside_path) - 1`` forecasts, exactly like the RNN adapter, so the
evaluation harness and the setpoint optimiser treat them interchangeably.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .data_model import ModeSegment, NormalizationScale
from .thermal_oracle import RoomPhysics

FEATURE_NAMES = ("inside_t", "outside_t", "outside_next")
FFNN_STRUCTURES: tuple[tuple[int, ...], ...] = (
    (), (1,), (2,), (3,), (4,), (1, 1), (1, 2), (1, 3), (2, 3), (2, 4), (1, 1, 2), (1, 2, 2),
)
ACTIVATIONS = ("sigmoid", "tanh", "logistic")


def _path(outside_path) -> np.ndarray:
    outside = np.asarray(outside_path, dtype=float)
    if outside.ndim != 1 or len(outside) < 1:
        raise ValueError("outside_path must contain at least the current value")
    return outside


def iterate(step: Callable[[float, float, float], float], start_inside: float, outside_path) -> np.ndarray:
    """Feed each one-step prediction back as the next inside input."""
    outside = _path(outside_path)
    out = np.empty(len(outside) - 1)
    inside = float(start_inside)
    for t in range(len(out)):
        inside = step(inside, outside[t], outside[t + 1])
        out[t] = inside
    return out


def one_step_pairs(segments: Sequence[ModeSegment]) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix of (inside_t, outside_t, outside_{t+1}) and targets inside_{t+1}."""
    X, y = [], []
    for s in segments:
        ins, out = s.inside_array, s.outside_array
        X.append(np.column_stack([ins[:-1], out[:-1], out[1:]]))
        y.append(ins[1:])
    if not X:
        return np.empty((0, 3)), np.empty(0)
    return np.vstack(X), np.concatenate(y)


# ---------------------------------------------------------------- persistence


@dataclass(frozen=True)
class PersistenceModel:
    def predict(self, start_inside: float, outside_path) -> np.ndarray:
        outside = _path(outside_path)
        return np.full(len(outside) - 1, float(start_inside))


# ------------------------------------------------------------------------ MLR


class RankDeficientError(ValueError):
    pass


def ols(X: np.ndarray, y: np.ndarray, names: Sequence[str] | None = None) -> tuple[np.ndarray, float]:
    """Ordinary least squares with intercept; returns ``(coefficients, intercept)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(p)]
    if n < p + 1:
        raise ValueError(f"need at least {p + 1} training pairs, got {n}")
    A = np.column_stack([X, np.ones(n)])
    _, sv, vt = np.linalg.svd(A, full_matrices=False)
    tol = sv[0] * max(A.shape) * np.finfo(float).eps * 1e3
    if np.sum(sv > tol) < A.shape[1]:
        null = vt[-1]
        cols = [nm for nm, w in zip(names + ["intercept"], null) if abs(w) > 1e-6]
        raise RankDeficientError(f"design matrix is rank deficient; collinear columns: {', '.join(cols)}")
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return beta[:p], float(beta[p])


@dataclass(frozen=True)
class MlrModel:
    coefficients: tuple[float, ...]
    intercept: float

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if not all(math.isfinite(c) for c in self.coefficients + (self.intercept,)):
            raise ValueError("non-finite MLR coefficient")

    def step(self, inside, out_now, out_next) -> float:
        a, b, c = self.coefficients
        return a * inside + b * out_now + c * out_next + self.intercept

    def predict(self, start_inside: float, outside_path) -> np.ndarray:
        return iterate(self.step, start_inside, outside_path)


def fit_mlr(segments: Sequence[ModeSegment]) -> MlrModel:
    X, y = one_step_pairs(segments)
    coef, intercept = ols(X, y, FEATURE_NAMES)
    return MlrModel(tuple(coef), intercept)


# ----------------------------------------------------------------------- FFNN


def _act(name: str):
    if name == "tanh":
        return np.tanh, lambda a: 1.0 - a * a
    if name in ("sigmoid", "logistic"):
        return (lambda z: 0.5 * (1.0 + np.tanh(0.5 * z))), (lambda a: a * (1.0 - a))
    raise ValueError(f"unknown activation {name!r}; choose from {ACTIVATIONS}")


@dataclass(frozen=True)
class FfnnModel:
    structure: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str = "tanh"
    scale: NormalizationScale = NormalizationScale()

    def __post_init__(self):
        _act(self.activation)
        sizes = (3,) + tuple(self.structure) + (1,)
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("weights/biases do not match structure")
        for W, b, (i, o) in zip(self.weights, self.biases, zip(sizes, sizes[1:])):
            if np.shape(W) != (i, o) or np.shape(b) != (o,):
                raise ValueError("layer dims do not chain")

    def forward(self, X: np.ndarray):
        f, _ = _act(self.activation)
        acts = [X]
        a = X
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = z if k == len(self.weights) - 1 else f(z)
            acts.append(a)
        return a[:, 0], acts

    def step(self, inside, out_now, out_next) -> float:
        d = self.scale.divisor
        y, _ = self.forward(np.array([[inside / d, out_now / d, out_next / d]]))
        return float(y[0]) * d

    def predict(self, start_inside: float, outside_path) -> np.ndarray:
        return iterate(self.step, start_inside, outside_path)

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def with_parameters(self, arrays) -> "FfnnModel":
        arrays = list(arrays)
        return FfnnModel(self.structure, tuple(arrays[0::2]), tuple(arrays[1::2]), self.activation, self.scale)


def ffnn_loss_and_gradients(model: FfnnModel, X: np.ndarray, y: np.ndarray):
    """Half sum of squared errors and its gradient (normalised units)."""
    pred, acts = model.forward(X)
    _, dact = _act(model.activation)
    resid = pred - y
    loss = 0.5 * float(resid @ resid)
    delta = resid[:, None]
    grads: list[np.ndarray] = []
    for k in range(len(model.weights) - 1, -1, -1):
        grads.append(np.sum(delta, axis=0))
        grads.append(acts[k].T @ delta)
        if k > 0:
            delta = (delta @ model.weights[k].T) * dact(acts[k])
    grads.reverse()  # -> [W0, b0, W1, b1, ...]
    return loss, grads


def fit_ffnn(
    segments: Sequence[ModeSegment],
    structure: Sequence[int] = (2, 3),
    activation: str = "tanh",
    seed: int = 0,
    learning_rate: float = 0.001,
    threshold: float = 0.1,
    max_steps: int = 100_000,
    scale: NormalizationScale = NormalizationScale(),
) -> FfnnModel:
    """Full-batch gradient descent on the summed squared error.

    Stops once every partial derivative is below ``threshold``.  A step that
    would increase the loss is rejected and the rate halved, which keeps the
    fixed starting rate stable on large training sets.
    """
    _act(activation)
    structure = tuple(int(u) for u in structure)
    if any(u < 1 for u in structure):
        raise ValueError("hidden layer sizes must be positive")
    X, y = one_step_pairs(segments)
    if len(y) == 0:
        raise ValueError("no training pairs")
    X = X / scale.divisor
    y = y / scale.divisor
    rng = np.random.default_rng(seed)
    sizes = (3,) + structure + (1,)
    weights = tuple(rng.normal(0.0, 1.0, (i, o)) for i, o in zip(sizes, sizes[1:]))
    biases = tuple(rng.normal(0.0, 1.0, o) for o in sizes[1:])
    model = FfnnModel(structure, weights, biases, activation, scale)
    params = model.parameters()
    lr = learning_rate
    loss, grads = ffnn_loss_and_gradients(model, X, y)
    for _ in range(max_steps):
        if max(float(np.max(np.abs(g))) for g in grads) < threshold:
            break
        trial = model.with_parameters([p - lr * g for p, g in zip(params, grads)])
        with np.errstate(over="ignore", invalid="ignore"):
            trial_loss, trial_grads = ffnn_loss_and_gradients(trial, X, y)
        if not np.isfinite(trial_loss) or trial_loss > loss:
            lr *= 0.5  # overshoot: retry the same step at half the rate
            continue
        model, params, loss, grads = trial, trial.parameters(), trial_loss, trial_grads
    return model


# ---------------------------------------------------------------------- decay


class AsymptoteMode(str, Enum):
    OUTSIDE_TEMP = "outside_temp"
    FITTED_CONSTANT = "fitted_constant"


class UndefinedTauError(ValueError):
    pass


@dataclass(frozen=True)
class DecayModel:
    """Exponential relaxation toward the outside temperature or a fixed asymptote."""

    tau_estimate: float
    asymptote_mode: AsymptoteMode = AsymptoteMode.OUTSIDE_TEMP
    asymptote: float | None = None
    step_minutes: int = 15

    def __post_init__(self):
        object.__setattr__(self, "asymptote_mode", AsymptoteMode(self.asymptote_mode))
        if not self.tau_estimate > 0:
            raise ValueError("tau_estimate must be positive")
        if self.asymptote_mode is AsymptoteMode.FITTED_CONSTANT and self.asymptote is None:
            raise ValueError("fitted-constant decay needs an asymptote")

    @property
    def ratio(self) -> float:
        return math.exp(-self.step_minutes / self.tau_estimate)

    def step(self, inside, out_now, out_next) -> float:
        target = out_now if self.asymptote_mode is AsymptoteMode.OUTSIDE_TEMP else self.asymptote
        return target + (inside - target) * self.ratio

    def predict(self, start_inside: float, outside_path) -> np.ndarray:
        return iterate(self.step, start_inside, outside_path)

    @classmethod
    def passive_from_physics(cls, physics: RoomPhysics, step_minutes: int = 15) -> "DecayModel":
        return cls(physics.tau_passive, AsymptoteMode.OUTSIDE_TEMP, None, step_minutes)

    @classmethod
    def active_from_physics(cls, physics: RoomPhysics, step_minutes: int = 15) -> "DecayModel":
        return cls(physics.tau_active, AsymptoteMode.FITTED_CONSTANT, physics.plant_temp, step_minutes)


def fit_decay(
    segments: Sequence[ModeSegment],
    asymptote_mode: AsymptoteMode = AsymptoteMode.OUTSIDE_TEMP,
) -> DecayModel:
    """Pooled estimate of the relaxation time constant.

    Toward the outside temperature: weighted least squares on the per-step
    log gap ratios ``log|in_{t+1} - out_t| - log|in_t - out_t|``, each pair
    weighted by its inverse delta-method variance so nearly-equilibrated
    steps do not dominate.  Toward a constant: OLS of ``in_{t+1}`` on ``in_t``.
    """
    asymptote_mode = AsymptoteMode(asymptote_mode)
    if not segments:
        raise ValueError("no segments to fit")
    if any(len(s) < 2 for s in segments):
        raise ValueError("segments need at least 2 points")
    step = segments[0].step_minutes
    if asymptote_mode is AsymptoteMode.FITTED_CONSTANT:
        cur = np.concatenate([s.inside_array[:-1] for s in segments])
        nxt = np.concatenate([s.inside_array[1:] for s in segments])
        if np.ptp(cur) == 0:
            raise UndefinedTauError("inside temperature never varies; tau is undefined")
        (slope,), intercept = ols(cur[:, None], nxt, ["inside_t"])
        if not 0 < slope < 1:
            raise UndefinedTauError(f"fitted per-step ratio {slope:.4g} is not a decay")
        return DecayModel(-step / math.log(slope), asymptote_mode, intercept / (1.0 - slope), step)

    logs, weights = [], []
    for s in segments:
        ins, out = s.inside_array, s.outside_array
        g_now = ins[:-1] - out[:-1]
        g_next = ins[1:] - out[:-1]
        ok = (np.abs(g_now) > 0) & (np.abs(g_next) > 0) & (np.sign(g_now) == np.sign(g_next))
        g_now, g_next = np.abs(g_now[ok]), np.abs(g_next[ok])
        logs.append(np.log(g_next) - np.log(g_now))
        weights.append(1.0 / (1.0 / g_now**2 + 1.0 / g_next**2))
    logs = np.concatenate(logs)
    weights = np.concatenate(weights)
    if logs.size == 0:
        raise UndefinedTauError("inside equals outside throughout; tau is undefined")
    beta = float(np.sum(weights * logs) / np.sum(weights))
    if not beta < 0:
        raise UndefinedTauError(f"gaps do not decay (mean log ratio {beta:.4g})")
    return DecayModel(-step / beta, asymptote_mode, None, step)


def predict_iterative_baseline(model, start_inside: float, outside_path) -> np.ndarray:
    return model.predict(start_inside, outside_path)


# ------------------------------------------------------------ cross-validation


def fold_assignment(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > n:
        raise ValueError(f"{k} folds requested for {n} segments")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def _pooled_rmse(model, segments: Sequence[ModeSegment]) -> float:
    sq, count = 0.0, 0
    for s in segments:
        pred = model.predict(s.inside[0], s.outside)
        diff = pred - s.inside_array[1:]
        sq += float(diff @ diff)
        count += len(diff)
    return math.sqrt(sq / count) if count else 0.0


def cv_scores(
    segments: Sequence[ModeSegment],
    candidates: Sequence[Callable[[Sequence[ModeSegment]], object]],
    k: int = 10,
    seed: int = 0,
) -> np.ndarray:
    """Mean validation RMSE per candidate; folds split whole segments."""
    folds = fold_assignment(len(segments), k, seed)
    scores = np.empty(len(candidates))
    for c, fit in enumerate(candidates):
        fold_rmse = []
        for fold in folds:
            held = set(fold.tolist())
            train = [s for i, s in enumerate(segments) if i not in held]
            val = [segments[i] for i in fold]
            fold_rmse.append(_pooled_rmse(fit(train), val))
        scores[c] = float(np.mean(fold_rmse))
    return scores


def grid_search_cv(segments, candidates, k: int = 10, seed: int = 0):
    """Return the candidate with the lowest mean CV RMSE (earliest wins ties)."""
    if not candidates:
        raise ValueError("empty candidate grid")
    if k > len(segments):
        raise ValueError(f"{k} folds requested for {len(segments)} segments")
    if len(candidates) == 1:
        return candidates[0]
    scores = cv_scores(segments, candidates, k, seed)
    scores = np.where(np.isfinite(scores), scores, np.inf)
    return candidates[int(np.argmin(scores))]


def fixed(model) -> Callable[[Sequence[ModeSegment]], object]:
    """Candidate that ignores its training data."""
    return lambda _segments: model


@dataclass(frozen=True)
class FfnnCandidate:
    structure: tuple[int, ...]
    activation: str = "tanh"
    seed: int = 0
    threshold: float = 0.1
    max_steps: int = 20_000

    def __call__(self, segments):
        return fit_ffnn(segments, self.structure, self.activation, self.seed,
                        threshold=self.threshold, max_steps=self.max_steps)
