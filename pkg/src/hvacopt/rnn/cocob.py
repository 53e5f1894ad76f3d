"""COCOB-Backprop: learning-rate-free coin-betting optimiser.

Each coordinate bets a fraction of its accumulated "reward" on the sign of
the summed negative gradients.  The step size therefore adapts to the
observed gradient range; the only constant is ``alpha``, which caps the
betting fraction during the first updates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_L_INIT = 1e-8


@dataclass(frozen=True)
class CocobState:
    max_grad: tuple[np.ndarray, ...]  # L, running max of |g|
    abs_grad_sum: tuple[np.ndarray, ...]  # G
    reward: tuple[np.ndarray, ...]
    grad_sum: tuple[np.ndarray, ...]  # theta
    initial: tuple[np.ndarray, ...]  # parameters at the first update
    alpha: float = 100.0

    @classmethod
    def initialise(cls, params, alpha: float = 100.0) -> "CocobState":
        params = [np.asarray(p, dtype=float) for p in params]
        return cls(
            max_grad=tuple(np.full_like(p, _L_INIT) for p in params),
            abs_grad_sum=tuple(np.zeros_like(p) for p in params),
            reward=tuple(np.zeros_like(p) for p in params),
            grad_sum=tuple(np.zeros_like(p) for p in params),
            initial=tuple(p.copy() for p in params),
            alpha=alpha,
        )


def cocob_update(state: CocobState, params, grads) -> tuple[CocobState, list[np.ndarray]]:
    """One COCOB-Backprop step; returns the new state and new parameters."""
    if len(params) != len(grads) or len(params) != len(state.initial):
        raise ValueError("params, grads and optimiser state disagree on parameter count")
    L_new, G_new, R_new, th_new, out = [], [], [], [], []
    for idx, (w, g, L, G, R, th, w0) in enumerate(
        zip(params, grads, state.max_grad, state.abs_grad_sum, state.reward, state.grad_sum, state.initial)
    ):
        w = np.asarray(w, dtype=float)
        g = np.asarray(g, dtype=float)
        if g.shape != w.shape or w.shape != w0.shape:
            raise ValueError(f"shape mismatch for parameter {idx}: {w.shape} vs {g.shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
            raise ValueError(f"non-finite gradient for parameter {idx} ({bad} entries)")
        L = np.maximum(L, np.abs(g))
        G = G + np.abs(g)
        R = np.maximum(R - (w - w0) * g, 0.0)
        th = th + g
        w_next = w0 - th / (L * np.maximum(G + L, state.alpha * L)) * (L + R)
        L_new.append(L)
        G_new.append(G)
        R_new.append(R)
        th_new.append(th)
        out.append(w_next)
    new_state = CocobState(tuple(L_new), tuple(G_new), tuple(R_new), tuple(th_new), state.initial, state.alpha)
    return new_state, out
