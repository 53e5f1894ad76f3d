"""Accuracy evaluation and rank-based significance testing."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .data_model import ModeSegment, OperationMode


def rmse(actual, forecast) -> float:
    a = np.asarray(actual, dtype=float)
    f = np.asarray(forecast, dtype=float)
    if a.shape != f.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {f.shape}")
    if a.size == 0:
        raise ValueError("rmse of empty sequences")
    d = a - f
    return math.sqrt(float(np.mean(d * d)))


def split_segments(segments: Sequence, ratio: float = 0.8, seed: int = 0):
    """Shuffle whole segments into ``(train, test)``; train gets round-half-up of ``ratio * n``."""
    if not 0 < ratio < 1:
        raise ValueError(f"split ratio must lie strictly between 0 and 1, got {ratio}")
    n = len(segments)
    if n < 5:
        raise ValueError(f"need at least 5 segments to split, got {n}")
    n_train = int(math.floor(ratio * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return [segments[i] for i in train_idx], [segments[i] for i in test_idx]


def split_by_mode(segments: Sequence[ModeSegment], ratio: float = 0.8, seed: int = 0):
    """Per-mode 80/20 split; returns ``({mode: train}, {mode: test})``."""
    train, test = {}, {}
    groups: dict[OperationMode, list[ModeSegment]] = {}
    for s in segments:
        groups.setdefault(s.mode, []).append(s)
    for mode in sorted(groups, key=lambda m: m.value):
        train[mode], test[mode] = split_segments(groups[mode], ratio, seed)
    return train, test


# ------------------------------------------------------------------ evaluation


@dataclass
class EvaluationReport:
    model_names: list[str]
    pooled_rmse: dict[str, float]
    segment_rmse: np.ndarray  # (segments, models); NaN where a model failed
    failures: list[tuple[int, str, str]] = field(default_factory=list)  # (segment, model, error)
    split: str = ""
    seed: int | None = None

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["model", "rmse"])
        for name in self.model_names:
            w.writerow([name, f"{self.pooled_rmse[name]:.6f}"])
        return out.getvalue()


def _pick(model, mode: OperationMode):
    if isinstance(model, Mapping):
        return model[mode]
    return model


def evaluate_models(
    models: Mapping[str, object],
    test_segments: Sequence[ModeSegment],
    horizon: int | None = None,
    split: str = "",
    seed: int | None = None,
) -> EvaluationReport:
    """Forecast every test segment from its first inside value and full outside path.

    ``models`` maps a name to a predictor or to a ``{mode: predictor}`` dict.
    With ``horizon`` set, each segment is cropped to its first ``horizon``
    forecast steps.  Pooled RMSE sums squared errors over every forecast point.
    """
    names = list(models)
    matrix = np.full((len(test_segments), len(names)), np.nan)
    sq = dict.fromkeys(names, 0.0)
    count = dict.fromkeys(names, 0)
    failures = []
    for i, seg in enumerate(test_segments):
        n = len(seg) if horizon is None else min(len(seg), horizon + 1)
        actual = seg.inside_array[1:n]
        for j, name in enumerate(names):
            try:
                pred = np.asarray(_pick(models[name], seg.mode).predict(seg.inside[0], seg.outside[:n]))
                if pred.shape != actual.shape or not np.all(np.isfinite(pred)):
                    raise ValueError("prediction has wrong length or non-finite values")
            except Exception as exc:  # recorded per cell, evaluation continues
                failures.append((i, name, f"{type(exc).__name__}: {exc}"))
                continue
            d = pred - actual
            matrix[i, j] = math.sqrt(float(np.mean(d * d)))
            sq[name] += float(d @ d)
            count[name] += len(d)
    pooled = {n: (math.sqrt(sq[n] / count[n]) if count[n] else math.nan) for n in names}
    return EvaluationReport(names, pooled, matrix, failures, split, seed)


# ----------------------------------------------------------------- statistics


def friedman_statistic(scores) -> tuple[float, np.ndarray]:
    """Tie-corrected Friedman chi-square and the mean rank of each model (1 = best)."""
    x = np.asarray(scores, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("need a (blocks >= 2) x (models >= 2) score matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("score matrix contains non-finite values")
    n, k = x.shape
    ranks = np.apply_along_axis(stats.rankdata, 1, x)
    rank_sums = ranks.sum(axis=0)
    q = 12.0 / (n * k * (k + 1)) * float(np.sum(rank_sums**2)) - 3.0 * n * (k + 1)
    ties = 0.0
    for row in x:
        _, counts = np.unique(row, return_counts=True)
        ties += float(np.sum(counts**3 - counts))
    correction = 1.0 - ties / (n * k * (k * k - 1))
    if correction <= 1e-12:
        return 0.0, rank_sums / n
    return max(q / correction, 0.0), rank_sums / n


def friedman_test(scores) -> float:
    """Upper-tail chi-square p-value (k - 1 degrees of freedom); lower scores rank better."""
    q, _ = friedman_statistic(scores)
    k = np.asarray(scores).shape[1]
    return float(stats.chi2.sf(q, k - 1)) if q > 0 else 1.0


def hochberg_adjust(p_values) -> np.ndarray:
    """Hochberg step-up adjusted p-values, returned in input order."""
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise ValueError("expected a 1-D array of p-values")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    order = np.argsort(-p, kind="stable")  # largest first
    adj_desc = np.minimum.accumulate(np.arange(1, m + 1) * p[order])
    out = np.empty(m)
    out[order] = np.minimum(adj_desc, 1.0)
    return out


@dataclass
class SignificanceReport:
    friedman_p: float
    rank_means: dict[str, float]
    best: str
    adjusted_p: dict[str, float]  # vs the best model; the best itself is omitted

    def to_json(self) -> str:
        return json.dumps(
            {
                "friedman_p": self.friedman_p,
                "best": self.best,
                "rank_means": self.rank_means,
                "comparisons": [{"model": m, "adjusted_p": p} for m, p in self.adjusted_p.items()],
            },
            indent=2,
        )


def significance(scores, model_names: Sequence[str]) -> SignificanceReport:
    """Friedman test plus Hochberg-adjusted post-hoc comparisons against the best-ranked model."""
    x = np.asarray(scores, dtype=float)
    x = x[np.all(np.isfinite(x), axis=1)]
    n, k = x.shape
    p = friedman_test(x)
    _, mean_ranks = friedman_statistic(x)
    best = int(np.argmin(mean_ranks))
    se = math.sqrt(k * (k + 1) / (6.0 * n))
    others = [j for j in range(k) if j != best]
    raw = [float(2.0 * stats.norm.sf(abs(mean_ranks[j] - mean_ranks[best]) / se)) for j in others]
    adj = hochberg_adjust(raw) if raw else []
    return SignificanceReport(
        friedman_p=p,
        rank_means={model_names[j]: float(mean_ranks[j]) for j in range(k)},
        best=model_names[best],
        adjusted_p={model_names[j]: float(a) for j, a in zip(others, adj)},
    )
