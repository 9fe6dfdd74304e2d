"""Per-vertex security scores: exploitability, impact, and a weighted
composite risk, with pooling to hyperedges and the whole cloud.

Exploitability blends normalized degree centrality with the detector's
normalized anomaly score; impact is the Monte Carlo expected fraction of
the cloud that ends up ever-infected when the epidemic is seeded at the
vertex alone.  All scores live in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .epidemic import EpidemicParams, EpidemicState, run
from .epidemic import S as _S
from .rng import derive_seed
from .topology import CloudGraph


@dataclass(frozen=True)
class ScoreWeights:
    """Nonnegative risk weights over (exploitability, impact, anomaly);
    must sum to 1."""

    w_e: float = 0.4
    w_i: float = 0.4
    w_a: float = 0.2

    def __post_init__(self):
        if min(self.w_e, self.w_i, self.w_a) < 0:
            raise ValueError("risk weights must be nonnegative")
        if abs(self.w_e + self.w_i + self.w_a - 1.0) > 1e-9:
            raise ValueError("risk weights must sum to 1")


@dataclass(frozen=True)
class SecurityScores:
    risk: float
    exploitability: float
    impact: float

    def __post_init__(self):
        for name in ("risk", "exploitability", "impact"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} score {v} outside [0, 1]")


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, float(x)))


def exploitability(g: CloudGraph, v: int, anomaly_norm: float) -> float:
    if not (0.0 <= anomaly_norm <= 1.0):
        raise ValueError("anomaly_norm must lie in [0, 1]")
    degs = g.degrees()
    max_deg = max(int(degs.max()), 1)
    return _clamp01(0.5 * (int(degs[v]) / max_deg) + 0.5 * anomaly_norm)


def impact(g: CloudGraph, v: int, params: EpidemicParams, n_rollouts: int, seed: int,
           base_state: EpidemicState | None = None) -> float:
    """Expected ever-infected fraction over seeded rollouts starting from
    a single infection at v.  Rollout seeds derive from (seed, index) so
    rollouts are independent and the reduction order is fixed.  With a
    base_state (mid-epidemic), v is seeded only while still susceptible;
    otherwise its infection is already reflected in the state."""
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    seeds = [v]
    if base_state is not None and base_state.comp[v] != _S:
        seeds = []
    total = 0
    for r in range(n_rollouts):
        traj = run(g, params, seeds, derive_seed(seed, "rollout", r), state=base_state)
        total += len(traj.ever_infected())
    return total / (n_rollouts * g.n)


def risk(expl: float, imp: float, anomaly_norm: float,
         weights: ScoreWeights = ScoreWeights()) -> float:
    return _clamp01(weights.w_e * expl + weights.w_i * imp + weights.w_a * anomaly_norm)


def score_vertices(g: CloudGraph, anomaly_norm, params: EpidemicParams,
                   n_rollouts: int = 200, seed: int = 0,
                   weights: ScoreWeights = ScoreWeights(),
                   base_state: EpidemicState | None = None) -> list[SecurityScores]:
    anomaly_norm = np.asarray(anomaly_norm, dtype=np.float64)
    if anomaly_norm.shape != (g.n,):
        raise ValueError(f"expected {g.n} anomaly values, got {anomaly_norm.shape}")
    out = []
    for v in range(g.n):
        e = exploitability(g, v, float(anomaly_norm[v]))
        i = impact(g, v, params, n_rollouts, seed, base_state=base_state)
        out.append(SecurityScores(risk=risk(e, i, float(anomaly_norm[v]), weights),
                                  exploitability=e, impact=i))
    return out


def cloud_scores(vertex_scores) -> SecurityScores:
    """Cloud-level score = componentwise mean over vertices."""
    if not vertex_scores:
        raise ValueError("no vertex scores to pool")
    n = len(vertex_scores)
    return SecurityScores(
        risk=sum(s.risk for s in vertex_scores) / n,
        exploitability=sum(s.exploitability for s in vertex_scores) / n,
        impact=sum(s.impact for s in vertex_scores) / n,
    )


def hyperedge_score(g: CloudGraph, name: str, values, mode: str = "mean") -> float:
    """Pool one per-vertex score channel over a hyperedge's members."""
    if name not in g.hyperedges:
        raise ValueError(f"unknown hyperedge {name!r}")
    members = g.hyperedges[name]
    vals = [values[v] for v in members]
    if mode == "mean":
        return float(sum(vals) / len(vals))
    if mode == "max":
        return float(max(vals))
    raise ValueError(f"unknown pooling mode {mode!r}")


def export_scores(vertex_scores, anomaly_norm, path) -> None:
    anomaly_norm = np.asarray(anomaly_norm, dtype=np.float64)
    if len(vertex_scores) != len(anomaly_norm):
        raise ValueError("score/anomaly length mismatch")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("vertex_id,risk,exploitability,impact,anomaly\n")
        for v, s in enumerate(vertex_scores):
            fh.write(f"{v},{s.risk!r},{s.exploitability!r},{s.impact!r},"
                     f"{float(anomaly_norm[v])!r}\n")
