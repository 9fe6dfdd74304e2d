"""
Risk, exploitability, impact
============================

Score every workload on three channels and roll the results up to
subnets and the whole deployment.

  exploitability - how easy is this vertex to break, given its exposure
                   (degree) and how anomalous it already looks
  impact         - expected fraction of the deployment infected if the
                   attack starts here (Monte Carlo over outbreak rollouts)
  risk           - weighted blend of the two plus the anomaly itself
"""

import numpy as np

from cloudward.epidemic import SCENARIOS, EpidemicParams
from cloudward.scoring import (
    ScoreWeights,
    cloud_scores,
    hyperedge_score,
    score_vertices,
)
from cloudward.topology import TopologySpec, generate_topology

g = generate_topology(TopologySpec(n=24, model="subnet-blocks", k=3,
                                   p_in=0.5, p_out=0.05), seed=5)

# Pretend the detector flagged vertex 4 hard and a few others mildly.
anomaly = np.full(g.n, 0.05)
anomaly[4] = 0.95
anomaly[13] = 0.40

params = SCENARIOS["mitm"].apply(EpidemicParams(horizon=10))
scores = score_vertices(g, anomaly, params, n_rollouts=300, seed=17,
                        weights=ScoreWeights(w_e=0.4, w_i=0.4, w_a=0.2))

print(f"{'v':>3} {'risk':>6} {'expl':>6} {'impact':>6} {'anomaly':>7}")
ranked = sorted(range(g.n), key=lambda v: -scores[v].risk)
for v in ranked[:6]:
    s = scores[v]
    print(f"{v:>3} {s.risk:>6.3f} {s.exploitability:>6.3f} "
          f"{s.impact:>6.3f} {anomaly[v]:>7.2f}")

# Subnet roll-up: the block hosting the hot vertex should stand out.
risks = [s.risk for s in scores]
print()
for name in sorted(g.hyperedges):
    mean = hyperedge_score(g, name, risks, mode="mean")
    worst = hyperedge_score(g, name, risks, mode="max")
    print(f"{name}: mean risk {mean:.3f}, worst member {worst:.3f}")

overall = cloud_scores(scores)
print(f"\ndeployment-wide: risk {overall.risk:.3f}, "
      f"exploitability {overall.exploitability:.3f}, "
      f"impact {overall.impact:.3f}")
