"""
Federated training with a privacy budget
========================================

Several tenants co-train one anomaly detector without pooling their logs:
each round they send clipped, noised parameter deltas, and a ledger
tracks the cumulative privacy cost.  An empirical audit then probes the
mechanism from the outside.
"""

from cloudward.federated import (
    FederationConfig,
    adjacent_sum_mechanisms,
    empirical_dp_audit,
    make_synthetic_clients,
    run_federation,
)

clients = make_synthetic_clients(count=4, vertices=12, seed=19, lr=0.02)
print(f"{len(clients)} tenants, {clients[0].feats.shape[0]} workloads each")

cfg = FederationConfig(rounds=6, clip=1.0, noise=1.0, local_epochs=2,
                       delta_target=1e-5, seed=19)
res = run_federation(clients, cfg)

print(f"\n{'round':>5} {'m':>2} {'mean |delta|':>12} {'loss':>9} "
      f"{'epsilon':>8}")
for r in res.rounds:
    print(f"{r.round:>5} {r.m:>2} {r.mean_update_norm:>12.4f} "
          f"{r.loss_global:>9.2f} {r.epsilon:>8.3f}")
print(f"\nledger after {res.ledger.rounds} rounds: "
      f"rho = {res.ledger.rho:.3f}, "
      f"epsilon = {res.ledger.epsilon:.3f} at delta = {cfg.delta_target}")

# Budget-capped variant: training halts after the first round whose
# accounted epsilon reaches 6.
capped = run_federation(clients, FederationConfig(
    rounds=6, clip=1.0, noise=1.0, local_epochs=2, epsilon_stop=6.0, seed=19))
print(f"epsilon_stop=6.0 halts after {len(capped.rounds)} rounds "
      f"(epsilon {capped.ledger.epsilon:.3f})")

# External check: feed the audit the pair of adjacent mechanisms (one
# client present vs absent).  At the accounted epsilon it must pass; a
# noiseless mechanism with the same claim must fail.
import numpy as np

delta_vec = np.zeros(8)
delta_vec[0] = 1.0
eps_claim = res.rounds[0].epsilon   # one-round budget
noisy = adjacent_sum_mechanisms(delta_vec, z=cfg.noise, s=cfg.clip, seed=1)
silent = adjacent_sum_mechanisms(delta_vec, z=0.0, s=cfg.clip, seed=1)
for label, mechs in (("noised", noisy), ("noiseless", silent)):
    audit = empirical_dp_audit(*mechs, eps_claim, 1e-5, n_trials=4000)
    verdict = "passes" if audit.passed else "FAILS"
    print(f"audit of {label} mechanism at eps={eps_claim:.3f}: {verdict} "
          f"(worst gap {audit.worst_gap:+.4f})")
