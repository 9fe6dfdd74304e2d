"""
Synthetic workload logs and token embeddings
============================================

Turn an outbreak into per-vertex log streams, then train skip-gram
embeddings whose geometry separates benign chatter from attack tokens.
"""

import numpy as np

from cloudward.epidemic import SCENARIOS, EpidemicParams, run
from cloudward.logfeat import SkipGramConfig, featurize_all, train_embeddings
from cloudward.logsynth import generate_logs
from cloudward.topology import TopologySpec, generate_topology

g = generate_topology(TopologySpec(n=30, model="preferential", m=2), seed=3)
params = SCENARIOS["ddos"].apply(EpidemicParams(horizon=8))
traj = run(g, params, seeds=[0], seed=11)

# rate = mean log lines per vertex-step; mix = how strongly an infected
# vertex's lines lean on the scenario's attack vocabulary.
corpus = generate_logs(g, traj, SCENARIOS["ddos"], rate=4, mix=0.8, seed=5)
lines = sum(len(e) for e in corpus.entries)
print(f"corpus: {lines} log entries over {g.n} vertices")
print("sample from patient zero:")
for t, tokens in corpus.entries[0][:4]:
    print(f"  t={t}: {' '.join(tokens)}")

table = train_embeddings(corpus, SkipGramConfig(dim=16, window=2, negatives=5,
                                                epochs=4, seed=9))
print(f"\nvocabulary: {len(table.vocab.tokens)} tokens, dim {table.dim}")


def nearest(token, k=3):
    v = table.vector(token)
    sims = []
    for other in table.vocab.tokens:
        if other == token:
            continue
        w = table.vector(other)
        sims.append((float(v @ w / (np.linalg.norm(v) * np.linalg.norm(w))),
                     other))
    return sorted(sims, reverse=True)[:k]


# "flood" only ever appears inside the attack template, "session" only in
# benign sshd lines -- their neighborhoods should look nothing alike.
for probe in ("flood", "session"):
    pretty = ", ".join(f"{tok} ({sim:.2f})" for sim, tok in nearest(probe))
    print(f"nearest to {probe}: {pretty}")

# Mean-pooled vectors become the per-vertex feature matrix the detector
# consumes downstream.
feats = featurize_all(corpus, table)
print(f"\nvertex feature matrix: {feats.shape}")
