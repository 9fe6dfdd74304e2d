"""Graph-convolutional autoencoder for unlabeled anomaly ranking, plus
supervised heads.

Architecture, with S the normalized adjacency and R the vertex features:

    H1    = relu(S R W0)            encoder layer 1
    Z     = S H1 W1                 encoder layer 2 (linear)
    A_hat = sigmoid(Z Z^T)          structure decoder
    R_hat = S Z W2                  attribute decoder

Training minimizes the reconstruction loss

    L = (1 - alpha) * ||A - A_hat||_F^2  +  alpha * ||R - R_hat||_F^2

with the diagonal of the structure term masked (self-reconstruction is
uninformative).  A vertex's anomaly score combines the row-wise residual
norms the same way:

    score_i = (1 - alpha) * ||a_i - a_hat_i||_2 + alpha * ||x_i - x_hat_i||_2

Optimization is plain full-batch gradient descent with analytic gradients
(derived by hand, verified against finite differences in the test suite);
no adaptive state, so runs are exactly reproducible and federated /
centralized training trajectories coincide step for step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import generator
from .topology import CloudGraph, normalized_adjacency


@dataclass(frozen=True)
class GcnAutoencoderParams:
    w0: np.ndarray   # d x h
    w1: np.ndarray   # h x z
    w2: np.ndarray   # z x d

    def __post_init__(self):
        if self.w0.shape[1] != self.w1.shape[0] or self.w1.shape[1] != self.w2.shape[0] \
                or self.w2.shape[1] != self.w0.shape[0]:
            raise ValueError("weight shapes are inconsistent")
        for w in (self.w0, self.w1, self.w2):
            if not np.all(np.isfinite(w)):
                raise ValueError("non-finite weight entries")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.w0.shape[0], self.w0.shape[1], self.w1.shape[1])

    def copy(self) -> "GcnAutoencoderParams":
        return GcnAutoencoderParams(self.w0.copy(), self.w1.copy(), self.w2.copy())


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.5
    lr: float = 1e-3
    epochs: int = 200
    hidden: int = 32
    latent: int = 16
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if self.lr <= 0 or self.epochs < 0 or self.hidden < 1 or self.latent < 1:
            raise ValueError("invalid training configuration")


def _xavier(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(d: int, hidden: int, latent: int, seed: int) -> GcnAutoencoderParams:
    rng = generator("gcn-init", seed)
    return GcnAutoencoderParams(
        w0=_xavier(rng, d, hidden),
        w1=_xavier(rng, hidden, latent),
        w2=_xavier(rng, latent, d),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def encode(s_norm: np.ndarray, feats: np.ndarray, params: GcnAutoencoderParams) -> np.ndarray:
    d = params.w0.shape[0]
    if feats.shape[1] != d or s_norm.shape[0] != feats.shape[0]:
        raise ValueError(f"shape mismatch: features {feats.shape}, operator {s_norm.shape}, d={d}")
    h1 = np.maximum(s_norm @ feats @ params.w0, 0.0)
    return s_norm @ h1 @ params.w1


def decode_structure(z: np.ndarray) -> np.ndarray:
    return _sigmoid(z @ z.T)


def decode_attributes(s_norm: np.ndarray, z: np.ndarray, params: GcnAutoencoderParams) -> np.ndarray:
    if z.shape[1] != params.w2.shape[0]:
        raise ValueError("latent dimension mismatch")
    return s_norm @ z @ params.w2


def reconstruct(g_or_s, feats: np.ndarray, params: GcnAutoencoderParams):
    """Convenience: (Z, A_hat, R_hat) from a graph or a precomputed operator."""
    s_norm = normalized_adjacency(g_or_s) if isinstance(g_or_s, CloudGraph) else g_or_s
    z = encode(s_norm, feats, params)
    return z, decode_structure(z), decode_attributes(s_norm, z, params)


def loss(adj: np.ndarray, adj_hat: np.ndarray, feats: np.ndarray, feats_hat: np.ndarray,
         alpha: float) -> float:
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    mask = 1.0 - np.eye(adj.shape[0])
    e_struct = (adj - adj_hat) * mask
    e_attr = feats - feats_hat
    return float((1.0 - alpha) * np.sum(e_struct ** 2) + alpha * np.sum(e_attr ** 2))


def anomaly_scores(adj: np.ndarray, adj_hat: np.ndarray, feats: np.ndarray,
                   feats_hat: np.ndarray, alpha: float) -> np.ndarray:
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    mask = 1.0 - np.eye(adj.shape[0])
    e_struct = (adj - adj_hat) * mask
    e_attr = feats - feats_hat
    return (1.0 - alpha) * np.linalg.norm(e_struct, axis=1) \
        + alpha * np.linalg.norm(e_attr, axis=1)


def loss_and_grads(s_norm: np.ndarray, adj: np.ndarray, feats: np.ndarray,
                   params: GcnAutoencoderParams, alpha: float):
    """Forward pass plus analytic gradients of L w.r.t. every weight matrix.

    Returns (loss, dW0, dW1, dW2).  The relu subgradient at 0 is taken as 0.
    """
    n = adj.shape[0]
    mask = 1.0 - np.eye(n)

    p = s_norm @ feats                   # n x d
    h_pre = p @ params.w0                # n x h
    h1 = np.maximum(h_pre, 0.0)
    q = s_norm @ h1                      # n x h
    z = q @ params.w1                    # n x z
    g_logits = z @ z.T
    a_hat = _sigmoid(g_logits)
    t = s_norm @ z                       # n x z
    r_hat = t @ params.w2                # n x d

    e_struct = (adj - a_hat) * mask
    e_attr = feats - r_hat
    value = float((1.0 - alpha) * np.sum(e_struct ** 2) + alpha * np.sum(e_attr ** 2))

    d_a_hat = -2.0 * (1.0 - alpha) * e_struct          # diagonal already zero
    d_logits = d_a_hat * a_hat * (1.0 - a_hat)
    d_r_hat = -2.0 * alpha * e_attr

    d_w2 = t.T @ d_r_hat
    d_t = d_r_hat @ params.w2.T
    d_z = s_norm @ d_t + (d_logits + d_logits.T) @ z

    d_w1 = q.T @ d_z
    d_q = d_z @ params.w1.T
    d_h1 = s_norm @ d_q
    d_h_pre = d_h1 * (h_pre > 0.0)
    d_w0 = p.T @ d_h_pre
    return value, d_w0, d_w1, d_w2


def train(g: CloudGraph, feats: np.ndarray, config: TrainConfig,
          start: GcnAutoencoderParams | None = None):
    """Full-batch gradient descent on the reconstruction loss.

    Returns (params, losses) where losses[0] is the loss at the starting
    parameters and losses[-1] the final loss (length epochs + 1).  A fixed
    step means the loss is not guaranteed monotone epoch to epoch.
    """
    s_norm = normalized_adjacency(g)
    adj = g.adjacency()
    if start is not None:
        params = start.copy()
        if params.w0.shape[0] != feats.shape[1]:
            raise ValueError("starting parameters do not match feature dimension")
    else:
        params = init_params(feats.shape[1], config.hidden, config.latent, config.seed)

    w0, w1, w2 = params.w0.copy(), params.w1.copy(), params.w2.copy()
    losses = []
    for epoch in range(config.epochs):
        cur = GcnAutoencoderParams(w0, w1, w2)
        value, d_w0, d_w1, d_w2 = loss_and_grads(s_norm, adj, feats, cur, config.alpha)
        if not np.isfinite(value):
            raise ValueError(f"training diverged at epoch {epoch} (lr={config.lr}): loss={value}")
        losses.append(value)
        w0 = w0 - config.lr * d_w0
        w1 = w1 - config.lr * d_w1
        w2 = w2 - config.lr * d_w2
    final = GcnAutoencoderParams(w0, w1, w2)
    z, a_hat, r_hat = reconstruct(s_norm, feats, final)
    final_loss = loss(adj, a_hat, feats, r_hat, config.alpha)
    if not np.isfinite(final_loss):
        raise ValueError(f"training diverged at epoch {config.epochs} (lr={config.lr})")
    losses.append(final_loss)
    return final, losses


def score_graph(g: CloudGraph, feats: np.ndarray, params: GcnAutoencoderParams,
                alpha: float) -> np.ndarray:
    s_norm = normalized_adjacency(g)
    z, a_hat, r_hat = reconstruct(s_norm, feats, params)
    return anomaly_scores(g.adjacency(), a_hat, feats, r_hat, alpha)


def rank_anomalies(scores: np.ndarray) -> np.ndarray:
    """Vertex ids ordered by score descending, ties broken by id ascending."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    ids = np.arange(len(scores))
    return np.lexsort((ids, -scores))


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    """Affine map of scores onto [0, 1]; a constant vector maps to zeros."""
    scores = np.asarray(scores, dtype=np.float64)
    lo, hi = scores.min(), scores.max()
    if hi == lo:
        return np.zeros_like(scores)
    return (scores - lo) / (hi - lo)


def export_heatmap(scores: np.ndarray, path) -> None:
    norm = normalize_scores(scores)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("vertex_id,score\n")
        for v, s in enumerate(norm):
            fh.write(f"{v},{float(s)!r}\n")


# -- supervised heads --------------------------------------------------------

@dataclass(frozen=True)
class SupervisedHead:
    task: str                  # "infected-indicator" or "score-regression"
    weights: np.ndarray        # z
    bias: float
    degenerate: bool = False   # labels were single-class / constant


def fit_supervised(z: np.ndarray, labels, task: str,
                   lr: float = 0.5, epochs: int = 500, ridge: float = 1e-8) -> SupervisedHead:
    """Logistic head for the infected indicator (full-batch GD from zero
    init), exact ridge least squares for score regression."""
    labels = np.asarray(labels, dtype=np.float64)
    if len(labels) != z.shape[0]:
        raise ValueError("labels must align with embedding rows")
    if task == "infected-indicator":
        if not set(np.unique(labels)) <= {0.0, 1.0}:
            raise ValueError("indicator labels must be 0/1")
        degenerate = len(np.unique(labels)) < 2
        w = np.zeros(z.shape[1])
        b = 0.0
        n = z.shape[0]
        for _ in range(epochs):
            p = _sigmoid(z @ w + b)
            err = (p - labels) / n
            w = w - lr * (z.T @ err)
            b = b - lr * float(err.sum())
        return SupervisedHead(task=task, weights=w, bias=b, degenerate=degenerate)
    if task == "score-regression":
        degenerate = float(np.ptp(labels)) == 0.0
        x = np.hstack([z, np.ones((z.shape[0], 1))])
        reg = ridge * np.eye(x.shape[1])
        reg[-1, -1] = 0.0                      # bias unpenalized
        theta = np.linalg.solve(x.T @ x + reg, x.T @ labels)
        return SupervisedHead(task=task, weights=theta[:-1], bias=float(theta[-1]),
                              degenerate=degenerate)
    raise ValueError(f"unknown task {task!r}")


def predict(head: SupervisedHead, z: np.ndarray) -> np.ndarray:
    raw = z @ head.weights + head.bias
    if head.task == "infected-indicator":
        return _sigmoid(raw)
    return raw


# -- params file: "d h z" header, then row-major weights ----------------------

def save_params(params: GcnAutoencoderParams, path) -> None:
    d, h, z = params.dims
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{d} {h} {z}\n")
        for w in (params.w0, params.w1, params.w2):
            for row in w:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_params(path) -> GcnAutoencoderParams:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("empty params file")
    d, h, z = (int(x) for x in lines[0].split())
    expect = d + h + z
    if len(lines) - 1 != expect:
        raise ValueError(f"expected {expect} weight rows, found {len(lines) - 1}")
    rows = [np.array([float(x) for x in line.split()]) for line in lines[1:]]
    w0 = np.stack(rows[:d])
    w1 = np.stack(rows[d:d + h])
    w2 = np.stack(rows[d + h:])
    return GcnAutoencoderParams(w0=w0, w1=w1, w2=w2)
