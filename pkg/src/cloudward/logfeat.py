"""Token embeddings for system logs, and per-vertex feature vectors.

Embeddings are trained from scratch with skip-gram and negative sampling:
for a (center, context) pair the objective maximizes

    log sigmoid(u_ctx . v_center) + sum_k log sigmoid(-u_neg_k . v_center)

over k negatives drawn from the unigram distribution raised to 0.75.
Training is strictly sequential with a fixed pair order and a seeded
negative stream, so a (corpus, config) pair always produces the same table.

A vertex's feature vector is the mean of the input vectors of its most
recent tokens (window-capped, so features stay fresh on a long-running
system).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import generator

UNK_TOKEN = "<unk>"
DEFAULT_FEATURE_WINDOW = 256


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]          # index -> token; UNK last
    counts: tuple[int, ...]
    index: dict
    unk_index: int

    def __len__(self):
        return len(self.tokens)

    def lookup(self, token: str) -> int:
        return self.index.get(token, self.unk_index)


@dataclass(frozen=True)
class SkipGramConfig:
    dim: int = 16
    window: int = 2
    negatives: int = 5
    lr: float = 0.05
    epochs: int = 3
    min_count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2 or self.window < 1 or self.negatives < 1:
            raise ValueError("dim >= 2, window >= 1 and negatives >= 1 required")
        if self.lr <= 0 or self.epochs < 0 or self.min_count < 1:
            raise ValueError("lr > 0, epochs >= 0, min_count >= 1 required")


@dataclass(frozen=True)
class EmbeddingTable:
    vocab: Vocabulary
    vectors: np.ndarray                      # |T| x d input vectors
    train_losses: tuple[float, ...] = ()     # mean pair loss per epoch

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.vocab.lookup(token)]


def _as_sequences(corpus) -> list[list[str]]:
    if hasattr(corpus, "sequences"):
        return corpus.sequences()
    return [list(seq) for seq in corpus]


def build_vocab(corpus, min_count: int = 1) -> Vocabulary:
    """Count tokens; those below min_count map to UNK.  Kept tokens are
    indexed by (count desc, token asc); UNK takes the last index."""
    counts: dict[str, int] = {}
    for seq in _as_sequences(corpus):
        for tok in seq:
            counts[tok] = counts.get(tok, 0) + 1
    if not counts:
        raise ValueError("corpus is empty")
    kept = sorted((t for t, c in counts.items() if c >= min_count),
                  key=lambda t: (-counts[t], t))
    if not kept:
        raise ValueError(f"corpus empty after filtering at min_count={min_count}")
    unk_count = sum(c for t, c in counts.items() if c < min_count)
    tokens = tuple(kept) + (UNK_TOKEN,)
    out_counts = tuple(counts[t] for t in kept) + (unk_count,)
    index = {t: i for i, t in enumerate(kept)}
    return Vocabulary(tokens=tokens, counts=out_counts, index=index, unk_index=len(kept))


def extract_pairs(sequence, window: int) -> list[tuple]:
    """All (center, context) pairs with |i - j| <= window, j != i."""
    if window < 1:
        raise ValueError("window must be >= 1")
    pairs = []
    n = len(sequence)
    for i in range(n):
        for j in range(max(0, i - window), min(n, i + window + 1)):
            if j != i:
                pairs.append((sequence[i], sequence[j]))
    return pairs


def sgns_pair_loss_grads(v_center, u_ctx, u_negs):
    """Loss and analytic gradients for one (center, context) pair with
    negatives.  Returns (loss, g_center, g_ctx, g_negs)."""
    scores = np.empty(1 + len(u_negs))
    scores[0] = u_ctx @ v_center
    if len(u_negs):
        scores[1:] = u_negs @ v_center
    # stable log sigmoid: log sig(x) = -log(1 + exp(-x))
    signs = np.ones_like(scores)
    signs[1:] = -1.0
    z = signs * scores
    loss = float(np.sum(np.logaddexp(0.0, -z)))
    sig = 1.0 / (1.0 + np.exp(-scores))
    labels = np.zeros_like(scores)
    labels[0] = 1.0
    err = sig - labels                      # d loss / d score
    g_center = err[0] * u_ctx
    if len(u_negs):
        g_center = g_center + err[1:] @ u_negs
    g_ctx = err[0] * v_center
    g_negs = np.outer(err[1:], v_center)
    return loss, g_center, g_ctx, g_negs


def train_embeddings(corpus, config: SkipGramConfig) -> EmbeddingTable:
    """Train input/output vector tables by per-pair SGD.  The companion
    output vectors are used only during training and dropped from the
    returned table."""
    sequences = _as_sequences(corpus)
    vocab = build_vocab(sequences, config.min_count)
    if sum(1 for c in vocab.counts if c > 0) < 2:
        raise ValueError("vocabulary too small for negative sampling (need >= 2 tokens)")

    rng = generator("sgns", config.seed)
    size = len(vocab)
    v_in = (rng.random((size, config.dim)) - 0.5) / config.dim
    v_out = np.zeros((size, config.dim))

    indexed = [[vocab.lookup(t) for t in seq] for seq in sequences]
    pairs = []
    for seq in indexed:
        pairs.extend(extract_pairs(seq, config.window))

    noise = np.array(vocab.counts, dtype=np.float64) ** 0.75
    if noise.sum() == 0:
        noise[:] = 1.0
    cdf = np.cumsum(noise / noise.sum())

    losses = []
    for epoch in range(config.epochs):
        total = 0.0
        for center, ctx in pairs:
            negs = np.searchsorted(cdf, rng.random(config.negatives))
            loss, g_c, g_ctx, g_negs = sgns_pair_loss_grads(
                v_in[center], v_out[ctx], v_out[negs])
            total += loss
            v_out[ctx] -= config.lr * g_ctx
            np.subtract.at(v_out, negs, config.lr * g_negs)   # negatives may repeat
            v_in[center] -= config.lr * g_c
        mean_loss = total / max(1, len(pairs))
        if not np.isfinite(mean_loss):
            raise ValueError(f"training diverged at epoch {epoch}: loss={mean_loss}")
        losses.append(mean_loss)
    return EmbeddingTable(vocab=vocab, vectors=v_in, train_losses=tuple(losses))


def featurize_vertex(tokens, table: EmbeddingTable,
                     window: int = DEFAULT_FEATURE_WINDOW) -> np.ndarray:
    """Mean input vector over the last min(window, len) tokens."""
    if len(tokens) == 0:
        raise ValueError("vertex has no log tokens")
    idx = [table.vocab.lookup(t) for t in tokens[-window:]]
    return table.vectors[idx].mean(axis=0)


def featurize_all(corpus, table: EmbeddingTable,
                  window: int = DEFAULT_FEATURE_WINDOW) -> np.ndarray:
    """n x d feature matrix, one row per vertex."""
    rows = []
    for v in range(corpus.n):
        tokens = corpus.tokens_for(v)
        if not tokens:
            raise ValueError(f"vertex {v} has no log entries")
        rows.append(featurize_vertex(tokens, table, window))
    return np.stack(rows)


# -- serialization: "<|T|> <d>" header then one token + d floats per line ----

def save_table(table: EmbeddingTable, path) -> None:
    for tok in table.vocab.tokens:
        if any(c.isspace() for c in tok):
            raise ValueError(f"token {tok!r} contains whitespace; not serializable")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vocab)} {table.dim}\n")
        for i, tok in enumerate(table.vocab.tokens):
            vals = " ".join(repr(float(x)) for x in table.vectors[i])
            fh.write(f"{tok} {table.vocab.counts[i]} {vals}\n")


def load_table(path) -> EmbeddingTable:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError("empty embedding file")
    size, dim = (int(x) for x in lines[0].split())
    tokens, counts, vectors = [], [], []
    for lineno, line in enumerate(lines[1:size + 1], start=2):
        parts = line.split()
        if len(parts) != dim + 2:
            raise ValueError(f"line {lineno}: expected token, count and {dim} floats")
        tokens.append(parts[0])
        counts.append(int(parts[1]))
        vectors.append([float(x) for x in parts[2:]])
    if len(tokens) != size:
        raise ValueError(f"expected {size} rows, found {len(tokens)}")
    if tokens[-1] != UNK_TOKEN:
        raise ValueError("last row must be the UNK token")
    vocab = Vocabulary(tokens=tuple(tokens), counts=tuple(counts),
                       index={t: i for i, t in enumerate(tokens[:-1])},
                       unk_index=size - 1)
    return EmbeddingTable(vocab=vocab, vectors=np.array(vectors))
