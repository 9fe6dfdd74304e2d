"""
Forecasting tomorrow's heatmap
==============================

Track each workload's latent embedding over the outbreak, fit a linear
recurrence to the trajectory, and extrapolate the infection indicator a
few steps past the end of the data.
"""

import numpy as np

from cloudward import gnn
from cloudward.epidemic import SCENARIOS, EpidemicParams, run
from cloudward.forecast import (
    color_forecast,
    embedding_trajectory,
    fit_forecaster,
    predict,
)
from cloudward.logfeat import SkipGramConfig, featurize_all, train_embeddings
from cloudward.logsynth import generate_logs
from cloudward.topology import TopologySpec, generate_topology

g = generate_topology(TopologySpec(n=30, model="uniform-random", p=0.15), seed=6)
params = SCENARIOS["hypervisor-dos"].apply(EpidemicParams(horizon=10))
traj = run(g, params, seeds=[2], seed=21)

corpus = generate_logs(g, traj, SCENARIOS["hypervisor-dos"], rate=5, mix=0.8,
                       seed=3)
table = train_embeddings(corpus, SkipGramConfig(dim=12, window=2, negatives=4,
                                                epochs=2, seed=4))
feats = featurize_all(corpus, table)
cfg = gnn.TrainConfig(alpha=0.7, lr=1e-3, epochs=150, hidden=10, latent=6,
                      seed=5)
model, _ = gnn.train(g, feats, cfg)

# Latent snapshots Z_0..Z_7 feed the forecaster; the last state's labels
# fit a small logistic head that turns embeddings into "how infected does
# this look" colors.
steps = list(range(8))
history = embedding_trajectory(g, corpus, table, model, steps)
labels = (traj.states[7].comp != 0).astype(float)
head = gnn.fit_supervised(history[-1], labels, task="infected-indicator")

fc = fit_forecaster([history], p=2, ridge=1e-6)
print(f"fitted order-{fc.order} recurrence on {len(history)} snapshots "
      f"of dim {fc.dim}")

# Sanity: how well does one-step prediction match the held-back snapshot?
held = embedding_trajectory(g, corpus, table, model, [8])[0]
err = float(np.linalg.norm(predict(fc, history, 1)[0] - held)) / \
    float(np.linalg.norm(held))
print(f"one-step relative error vs held-out Z_8: {err:.3f}")

colors = color_forecast(fc, history, head, k=3)
actual = [(traj.states[t].comp != 0).mean() for t in (8, 9, 10)]
for i, t in enumerate((8, 9, 10)):
    print(f"t={t}: predicted mean infection color {colors[i].mean():.3f}, "
          f"actual infected fraction {actual[i]:.3f}")
