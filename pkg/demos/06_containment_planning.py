"""
Containment planning
====================

Mid-outbreak, pick response actions (quarantine a workload, sever a
link) that minimize a cost blending action expense, expected future
infections, and business downtime.  Compare the greedy planner against
exhaustive subset search.
"""

from cloudward import containment
from cloudward.epidemic import SCENARIOS, EpidemicParams, run
from cloudward.topology import TopologySpec, generate_topology

g = generate_topology(TopologySpec(n=14, model="subnet-blocks", k=2,
                                   p_in=0.6, p_out=0.08), seed=8)
params = SCENARIOS["co-location"].apply(EpidemicParams(horizon=30))

# Let the outbreak run three steps before the response team wakes up.
onset = run(g, params, seeds=[1], seed=34)
state = onset.states[3]
print("infected at decision time:",
      sorted(int(v) for v in range(g.n) if state.comp[v] in (1, 2)))

cfg = containment.ObjectiveConfig(
    params=params,
    lam=1.0,            # weight on expected infected vertex-steps
    mu=0.05,            # weight on quarantine downtime
    protected=frozenset({0}),   # vertex 0 hosts the control plane
    budget=2,
    horizon=8,
    n_rollouts=40,
)

baseline_j, _ = containment.evaluate_plan(g, state, (), cfg, seed=7)
print(f"\ndo-nothing objective: {baseline_j:.2f}")

for name, planner in (("greedy", containment.greedy_plan),
                      ("exhaustive", containment.exhaustive_plan)):
    plan = planner(g, state, cfg, seed=7)
    j, rep = containment.evaluate_plan(g, state, plan, cfg, seed=7)
    acts = "; ".join(a.describe() for a in plan) or "(no action)"
    print(f"\n{name}: J = {j:.2f}  ({acts})")
    print(f"  containment probability {rep.containment_prob:.2f}, "
          f"business impact {rep.business_impact:.2f}, "
          f"implementation time {rep.time_to_implement:.1f}")
