"""Containment planning: the action space, a Monte Carlo objective, and
greedy / exhaustive planners.

The objective for a plan P evaluated from state s is

    J(P) = sum of action costs
         + lam * E[infected (D or I) vertex-steps over the next H steps]
         + mu  * sum_v w_v * (quarantined steps of v within H)

The expectation is over `n_rollouts` seeded simulations; both planners
evaluate every candidate with the same rollout seeds, so the exhaustive
minimum can never exceed the greedy value on the same instance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

from .epidemic import (
    D as _D,
    I as _I,
    EpidemicParams,
    EpidemicRng,
    EpidemicState,
    quarantine_vertex,
    restore,
    sever_edge,
    step,
)
from .rng import derive_seed
from .topology import CloudGraph, canonical_edge

_KIND_RANK = {"quarantine": 0, "sever": 1, "restore": 2}


@dataclass(frozen=True)
class Action:
    kind: str                          # quarantine | sever | restore
    vertex: int | None = None
    edge: tuple[int, int] | None = None
    duration: int = 0                  # quarantine only
    cost: float = 1.0
    implement_time: int = 0

    def __post_init__(self):
        if self.kind not in _KIND_RANK:
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.cost < 0 or self.implement_time < 0:
            raise ValueError("cost and implement_time must be nonnegative")
        if self.kind == "quarantine":
            if self.vertex is None or self.edge is not None:
                raise ValueError("quarantine takes a vertex target")
            if self.duration < 1:
                raise ValueError("quarantine duration must be >= 1")
        elif self.kind == "sever":
            if self.edge is None or self.vertex is not None:
                raise ValueError("sever takes an edge target")
            object.__setattr__(self, "edge", canonical_edge(*self.edge))
        else:
            if (self.vertex is None) == (self.edge is None):
                raise ValueError("restore takes exactly one of vertex / edge")
            if self.edge is not None:
                object.__setattr__(self, "edge", canonical_edge(*self.edge))

    def target(self) -> tuple:
        return (self.vertex,) if self.vertex is not None else self.edge

    def sort_key(self) -> tuple:
        return (_KIND_RANK[self.kind], self.target())

    def describe(self) -> str:
        if self.kind == "quarantine":
            return f"quarantine vertex {self.vertex} for {self.duration} steps"
        if self.kind == "sever":
            return f"sever edge {self.edge}"
        return f"restore {self.target()}"


@dataclass(frozen=True)
class ObjectiveConfig:
    params: EpidemicParams
    lam: float = 1.0
    mu: float = 0.1
    weights: tuple[float, ...] | None = None   # per-vertex w_v; None = all ones
    protected: frozenset = frozenset()
    budget: int = 1
    horizon: int = 20
    n_rollouts: int = 30

    def __post_init__(self):
        if self.lam < 0 or self.mu < 0:
            raise ValueError("lam and mu must be nonnegative")
        if self.weights is not None and any(w < 0 for w in self.weights):
            raise ValueError("vertex weights must be nonnegative")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.horizon < 1 or self.n_rollouts < 1:
            raise ValueError("horizon and n_rollouts must be >= 1")

    def weight(self, v: int) -> float:
        return 1.0 if self.weights is None else self.weights[v]


@dataclass(frozen=True)
class EffectivenessReport:
    time_to_implement: int
    business_impact: float
    containment_prob: float

    def __post_init__(self):
        if not (0.0 <= self.containment_prob <= 1.0):
            raise ValueError("containment_prob must lie in [0, 1]")


def plan_violation(plan, cfg: ObjectiveConfig) -> str | None:
    """First constraint breach in the plan, or None if it is feasible."""
    if len(plan) > cfg.budget:
        return f"plan has {len(plan)} actions, budget is {cfg.budget}"
    for a in plan:
        if a.kind == "quarantine" and a.vertex in cfg.protected:
            return f"action '{a.describe()}' targets protected vertex {a.vertex}"
    return None


def apply_plan(g: CloudGraph, state: EpidemicState, plan) -> EpidemicState:
    """Apply actions in order at plan start; raises on unknown targets."""
    for a in plan:
        if a.kind == "quarantine":
            state = quarantine_vertex(g, state, a.vertex, a.duration)
        elif a.kind == "sever":
            state = sever_edge(g, state, a.edge)
        else:
            state = restore(g, state, a.vertex if a.vertex is not None else a.edge)
    return state


def evaluate_plan(g: CloudGraph, state: EpidemicState, plan, cfg: ObjectiveConfig,
                  seed: int = 0):
    """(J, EffectivenessReport) for a plan applied to `state` now."""
    violation = plan_violation(plan, cfg)
    if violation is not None:
        raise ValueError(violation)
    applied = apply_plan(g, state, plan)
    t0 = applied.t

    downtime = 0.0
    for v in range(applied.n):
        steps_quar = min(max(int(applied.quarantined_until[v]) - t0, 0), cfg.horizon)
        downtime += cfg.weight(v) * steps_quar
    business = cfg.mu * downtime

    sim_params = replace(cfg.params, horizon=t0 + cfg.horizon)
    infected_steps = 0
    contained = 0
    for r in range(cfg.n_rollouts):
        rng = EpidemicRng(derive_seed(seed, "rollout", r))
        cur = applied
        transmissions = 0
        for _ in range(cfg.horizon):
            if not cur.active():
                break
            cur, events = step(g, cur, sim_params, rng)
            transmissions += len(events)
            infected_steps += int(((cur.comp == _D) | (cur.comp == _I)).sum())
        if transmissions == 0:
            contained += 1

    j = (sum(a.cost for a in plan)
         + cfg.lam * (infected_steps / cfg.n_rollouts)
         + business)
    report = EffectivenessReport(
        time_to_implement=sum(a.implement_time for a in plan),
        business_impact=business,
        containment_prob=contained / cfg.n_rollouts,
    )
    return j, report


def default_candidates(g: CloudGraph, state: EpidemicState, cfg: ObjectiveConfig,
                       quarantine_cost: float = 1.0, sever_cost: float = 0.5) -> list[Action]:
    """Quarantine every unprotected vertex for H; sever every live edge
    touching a D/I vertex."""
    out = [Action(kind="quarantine", vertex=v, duration=cfg.horizon, cost=quarantine_cost)
           for v in range(g.n) if v not in cfg.protected]
    hot = {v for v in range(g.n) if state.comp[v] in (_D, _I)}
    out.extend(Action(kind="sever", edge=e, cost=sever_cost)
               for e in g.edges if (e[0] in hot or e[1] in hot) and e not in state.severed)
    return sorted(out, key=Action.sort_key)


def greedy_plan(g: CloudGraph, state: EpidemicState, cfg: ObjectiveConfig,
                candidates=None, seed: int = 0) -> tuple[Action, ...]:
    """Add the J-minimizing candidate while it strictly improves J and the
    budget allows; ties resolve to the first candidate in (kind, target)
    order."""
    if candidates is None:
        candidates = default_candidates(g, state, cfg)
    remaining = sorted(candidates, key=Action.sort_key)
    plan: list[Action] = []
    best_j, _ = evaluate_plan(g, state, tuple(plan), cfg, seed)
    while len(plan) < cfg.budget and remaining:
        chosen = None
        chosen_j = best_j
        for cand in remaining:
            trial = tuple(plan) + (cand,)
            if plan_violation(trial, cfg) is not None:
                continue
            j, _ = evaluate_plan(g, state, trial, cfg, seed)
            if j < chosen_j:
                chosen, chosen_j = cand, j
        if chosen is None:
            break
        plan.append(chosen)
        remaining.remove(chosen)
        best_j = chosen_j
    return tuple(plan)


def exhaustive_plan(g: CloudGraph, state: EpidemicState, cfg: ObjectiveConfig,
                    candidates=None, seed: int = 0,
                    max_combinations: int = 100_000) -> tuple[Action, ...]:
    """Minimize J over every candidate subset of size <= budget.  Ties go
    to the earlier subset in (size, lexicographic) enumeration order."""
    if candidates is None:
        candidates = default_candidates(g, state, cfg)
    cands = sorted(candidates, key=Action.sort_key)
    b = min(cfg.budget, len(cands))
    space = sum(math.comb(len(cands), k) for k in range(b + 1))
    if space > max_combinations:
        raise ValueError(
            f"search space of {space} plans exceeds the {max_combinations} guard")
    best_plan: tuple[Action, ...] = ()
    best_j, _ = evaluate_plan(g, state, (), cfg, seed)
    for k in range(1, b + 1):
        for combo in itertools.combinations(cands, k):
            if plan_violation(combo, cfg) is not None:
                continue
            j, _ = evaluate_plan(g, state, combo, cfg, seed)
            if j < best_j:
                best_plan, best_j = combo, j
    return best_plan


# -- plan file / report export ------------------------------------------------

def save_plan(plan, path) -> None:
    """One action per line in application order:
    `<idx> <kind> <target> <duration> <cost> <implement_time>`."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# idx kind target duration cost implement_time\n")
        for i, a in enumerate(plan):
            tgt = str(a.vertex) if a.vertex is not None else f"{a.edge[0]}-{a.edge[1]}"
            fh.write(f"{i} {a.kind} {tgt} {a.duration} {a.cost!r} {a.implement_time}\n")


def load_plan(path) -> tuple[Action, ...]:
    actions = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ValueError(f"malformed plan line {lineno}: expected 6 fields")
            _, kind, tgt, duration, cost, impl = parts
            vertex = edge = None
            if "-" in tgt:
                a, b = tgt.split("-")
                edge = (int(a), int(b))
            else:
                vertex = int(tgt)
            actions.append(Action(kind=kind, vertex=vertex, edge=edge,
                                  duration=int(duration), cost=float(cost),
                                  implement_time=int(impl)))
    return tuple(actions)


def export_report(j: float, report: EffectivenessReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("objective,time_to_implement,business_impact,containment_prob\n")
        fh.write(f"{j!r},{report.time_to_implement},"
                 f"{report.business_impact!r},{report.containment_prob!r}\n")
