"""Linear autoregressive forecasting of vertex-embedding trajectories.

One shared order-p model over all vertices: z_{t+1} = b + sum_j C_j z_{t+1-j}.
Fitting is closed-form ridge least squares over rows pooled from every
(trajectory, vertex, time) triple, so it is deterministic and
permutation-invariant over the pooled rows.  Forecast beyond one step by
feeding predictions back in.  Predicted embeddings are mapped to score
colorings with a supervised head from the detection model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gnn
from .topology import CloudGraph, normalized_adjacency


@dataclass(frozen=True)
class ForecastParams:
    order: int
    coeffs: np.ndarray     # p x z x z; prediction term j is history[-1-j] @ coeffs[j]
    bias: np.ndarray       # z
    ridge: float

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.coeffs.shape[0] != self.order or self.coeffs.shape[1] != self.coeffs.shape[2] \
                or self.bias.shape != (self.coeffs.shape[1],):
            raise ValueError("coefficient shapes inconsistent with order")
        if not (np.all(np.isfinite(self.coeffs)) and np.all(np.isfinite(self.bias))):
            raise ValueError("non-finite forecast parameters")

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]


def _check_trajectory(traj) -> tuple[int, int]:
    if len(traj) < 2:
        raise ValueError("trajectory needs at least 2 steps")
    n, z = traj[0].shape
    for m in traj:
        if m.shape != (n, z):
            raise ValueError("trajectory matrices must share one shape")
    return n, z


def fit_forecaster(trajectories, p: int, ridge: float = 1e-6) -> ForecastParams:
    """Pooled ridge regression of next embedding on the previous p.

    Each training row is [z_t, z_{t-1}, .., z_{t-p+1}, 1] -> z_{t+1} for one
    vertex; all rows share coefficients.  ridge > 0 keeps the normal
    equations nonsingular (the penalty covers the bias column too, so with
    the defaults its effect is O(ridge)).
    """
    if p < 1:
        raise ValueError("order p must be >= 1")
    if ridge <= 0:
        raise ValueError("ridge must be > 0")
    if not trajectories:
        raise ValueError("no trajectories to fit")
    dims = {_check_trajectory(traj)[1] for traj in trajectories}
    if len(dims) > 1:
        raise ValueError("trajectories disagree on embedding dimension")
    z = dims.pop()

    xs, ys = [], []
    for traj in trajectories:
        steps = [np.asarray(m, dtype=np.float64) for m in traj]
        if len(steps) < p + 1:
            raise ValueError(f"trajectory of length {len(steps)} too short for order {p}")
        for t in range(p - 1, len(steps) - 1):
            lags = [steps[t - j] for j in range(p)]       # newest first
            xs.append(np.hstack(lags))
            ys.append(steps[t + 1])
    x = np.vstack(xs)
    x = np.hstack([x, np.ones((x.shape[0], 1))])
    y = np.vstack(ys)

    theta = np.linalg.solve(x.T @ x + ridge * np.eye(x.shape[1]), x.T @ y)
    coeffs = np.stack([theta[j * z:(j + 1) * z] for j in range(p)])
    return ForecastParams(order=p, coeffs=coeffs, bias=theta[-1].copy(), ridge=ridge)


def predict(params: ForecastParams, history, k: int) -> list[np.ndarray]:
    """k iterated one-step predictions from the trailing p history matrices."""
    if k < 0:
        raise ValueError("k must be >= 0")
    hist = [np.asarray(m, dtype=np.float64) for m in history]
    if len(hist) < params.order:
        raise ValueError(f"history of length {len(hist)} shorter than order {params.order}")
    if hist[0].shape[1] != params.dim:
        raise ValueError("history dimension does not match model")
    out: list[np.ndarray] = []
    window = hist[-params.order:]
    for _ in range(k):
        nxt = np.tile(params.bias, (window[-1].shape[0], 1))
        for j in range(params.order):
            nxt = nxt + window[-1 - j] @ params.coeffs[j]
        out.append(nxt)
        window = window[1:] + [nxt] if params.order > 1 else [nxt]
    return out


def color_forecast(params: ForecastParams, history, head: gnn.SupervisedHead,
                   k: int) -> np.ndarray:
    """Scores of predicted embeddings, clamped to [0, 1]; shape (k, n)."""
    if params.dim != head.weights.shape[0]:
        raise ValueError("score head dimension does not match forecaster")
    preds = predict(params, history, k)
    if not preds:
        return np.zeros((0, np.asarray(history[-1]).shape[0]))
    return np.clip(np.stack([gnn.predict(head, z) for z in preds]), 0.0, 1.0)


def embedding_trajectory(g: CloudGraph, corpus, table, params: gnn.GcnAutoencoderParams,
                         steps, window: int = 256) -> list[np.ndarray]:
    """Z_t for each requested epidemic step, re-featurizing logs up to t.

    Features at step t are the mean token vector over each vertex's last
    `window` tokens among entries stamped <= t; the encoder is frozen.
    """
    s_norm = normalized_adjacency(g)
    out = []
    for t in steps:
        rows = []
        for v in range(corpus.n):
            toks: list[str] = []
            for entry_t, tokens in corpus.entries[v]:
                if entry_t <= t:
                    toks.extend(tokens)
            if not toks:
                raise ValueError(f"vertex {v} has no log tokens at or before step {t}")
            idx = [table.vocab.lookup(tok) for tok in toks[-window:]]
            rows.append(table.vectors[idx].mean(axis=0))
        out.append(gnn.encode(s_norm, np.stack(rows), params))
    return out


def export_forecast(colors: np.ndarray, t_start: int, path) -> None:
    """CSV rows `t,vertex_id,predicted_score` for steps t_start..t_start+k-1."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,vertex_id,predicted_score\n")
        for i, row in enumerate(colors):
            for v, s in enumerate(row):
                fh.write(f"{t_start + i},{v},{float(s)!r}\n")
