"""Peephole LSTM cell: forward step and the matching backward step.

Gate layout along the last axis of ``W``, ``U`` and ``b`` is
``[input, forget, candidate, output]``.  Input and forget gates peek at the
previous cell state, the output gate at the new one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class LstmCellParams:
    W: np.ndarray  # (input_dim, 4 * cell_dim)
    U: np.ndarray  # (cell_dim, 4 * cell_dim)
    p_i: np.ndarray  # (cell_dim,)
    p_f: np.ndarray
    p_o: np.ndarray
    b: np.ndarray  # (4 * cell_dim,)

    def __post_init__(self):
        c = self.cell_dim
        if self.W.ndim != 2 or self.W.shape[1] != 4 * c:
            raise ValueError(f"W has shape {self.W.shape}, expected (input_dim, {4 * c})")
        if self.U.shape != (c, 4 * c):
            raise ValueError(f"U has shape {self.U.shape}, expected ({c}, {4 * c})")
        for name in ("p_i", "p_f", "p_o"):
            if getattr(self, name).shape != (c,):
                raise ValueError(f"{name} must have length {c}")
        if self.b.shape != (4 * c,):
            raise ValueError(f"b must have length {4 * c}")
        for arr in self.arrays():
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite LSTM parameter")

    @property
    def cell_dim(self) -> int:
        return self.U.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [self.W, self.U, self.p_i, self.p_f, self.p_o, self.b]

    @classmethod
    def from_arrays(cls, arrays) -> "LstmCellParams":
        return cls(*arrays)

    @classmethod
    def initialise(cls, input_dim: int, cell_dim: int, std: float, rng: np.random.Generator,
                   forget_bias: float = 1.0) -> "LstmCellParams":
        c = cell_dim
        b = rng.normal(0.0, std, 4 * c)
        b[c : 2 * c] += forget_bias
        return cls(
            W=rng.normal(0.0, std, (input_dim, 4 * c)),
            U=rng.normal(0.0, std, (c, 4 * c)),
            p_i=rng.normal(0.0, std, c),
            p_f=rng.normal(0.0, std, c),
            p_o=rng.normal(0.0, std, c),
            b=b,
        )

    @classmethod
    def zeros(cls, input_dim: int, cell_dim: int) -> "LstmCellParams":
        c = cell_dim
        return cls(np.zeros((input_dim, 4 * c)), np.zeros((c, 4 * c)),
                   np.zeros(c), np.zeros(c), np.zeros(c), np.zeros(4 * c))


@dataclass(frozen=True)
class LstmState:
    hidden: np.ndarray
    cell: np.ndarray

    @classmethod
    def zeros(cls, cell_dim: int, batch: int | None = None) -> "LstmState":
        shape = (cell_dim,) if batch is None else (batch, cell_dim)
        return cls(np.zeros(shape), np.zeros(shape))


def _step(params: LstmCellParams, h_prev, c_prev, x):
    c = params.cell_dim
    z = x @ params.W + h_prev @ params.U + params.b
    i = sigmoid(z[..., :c] + params.p_i * c_prev)
    f = sigmoid(z[..., c : 2 * c] + params.p_f * c_prev)
    g = np.tanh(z[..., 2 * c : 3 * c])
    c_new = f * c_prev + i * g
    o = sigmoid(z[..., 3 * c :] + params.p_o * c_new)
    tc = np.tanh(c_new)
    h = o * tc
    return h, c_new, (x, h_prev, c_prev, i, f, g, o, c_new, tc)


def cell_forward(params: LstmCellParams, state: LstmState, x) -> tuple[LstmState, np.ndarray]:
    """One step of the peephole cell; ``x`` may carry a leading batch axis."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"input has {x.shape[-1]} features, cell expects {params.input_dim}")
    if state.hidden.shape[-1] != params.cell_dim or state.cell.shape[-1] != params.cell_dim:
        raise ValueError("state dimension does not match cell_dim")
    h, c_new, _ = _step(params, state.hidden, state.cell, x)
    return LstmState(h, c_new), h


def _step_backward(params: LstmCellParams, cache, dh, dc_next, grads):
    """Backpropagate one step for a batch; accumulates into ``grads`` in place.

    Returns gradients w.r.t. the step input, previous hidden and previous cell.
    """
    x, h_prev, c_prev, i, f, g, o, c_new, tc = cache
    do = dh * tc
    dzo = do * o * (1.0 - o)
    dc = dc_next + dh * o * (1.0 - tc * tc) + dzo * params.p_o
    dzi = dc * g * i * (1.0 - i)
    dzf = dc * c_prev * f * (1.0 - f)
    dzg = dc * i * (1.0 - g * g)
    dz = np.concatenate([dzi, dzf, dzg, dzo], axis=-1)

    gW, gU, gpi, gpf, gpo, gb = grads
    gW += x.T @ dz
    gU += h_prev.T @ dz
    gpi += np.sum(dzi * c_prev, axis=0)
    gpf += np.sum(dzf * c_prev, axis=0)
    gpo += np.sum(dzo * c_new, axis=0)
    gb += np.sum(dz, axis=0)

    dx = dz @ params.W.T
    dh_prev = dz @ params.U.T
    dc_prev = dc * f + dzi * params.p_i + dzf * params.p_f
    return dx, dh_prev, dc_prev
