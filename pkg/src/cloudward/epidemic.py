"""Discrete-time stochastic SDIR malware propagation.

Compartments: susceptible (S), delitescent (D, compromised but not yet
infective), infected (I, actively spreading), recovered (R, immune).

Step rule (synchronous, computed from the state at step start):

1. every I vertex that is not quarantined transmits independently with
   probability beta across each live edge (not severed, neither endpoint
   quarantined) to each S neighbor; newly exposed vertices become D with a
   timer of d_D steps, or I directly when d_D == 0;
2. timers of vertices that were already D tick down; a timer hitting zero
   promotes the vertex to I;
3. every vertex that was I at step start recovers with probability gamma.

Randomness is counter-based: the transmission draw for (source u, edge to
v) depends on u's infection age, not on wall-clock step, and the recovery
draw for u likewise.  Runs are reproducible from a single seed, and a run
on a graph with an edge severed consumes exactly the same draws as the
unmodified run, so severing can only delay or prevent infections, never
create new ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .rng import label_uniform
from .topology import CloudGraph, canonical_edge

S, D, I, R = 0, 1, 2, 3
COMPARTMENT_NAMES = ("S", "D", "I", "R")

SCENARIO_NAMES = (
    "ddos",
    "hypercall",
    "hypervisor-dos",
    "mitm",
    "hyperjacking",
    "co-location",
    "live-migration",
)


@dataclass(frozen=True)
class EpidemicParams:
    beta: float = 0.2          # per-edge per-step transmission probability
    delitescence: int = 1      # steps spent in D before turning infective
    gamma: float = 0.05        # per-step recovery probability
    horizon: int = 50

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0 and 0.0 <= self.gamma <= 1.0):
            raise ValueError("beta and gamma must lie in [0, 1]")
        if self.delitescence < 0 or self.horizon < 0:
            raise ValueError("delitescence and horizon must be non-negative")


@dataclass(frozen=True)
class ScenarioPreset:
    """One of the attack scenarios, with its parameter slant and the log
    template profile infected systems emit under it."""

    name: str
    overrides: dict = field(default_factory=dict)
    template_profile: str = ""

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}, expected one of {SCENARIO_NAMES}")
        if not self.template_profile:
            object.__setattr__(self, "template_profile", self.name)

    def apply(self, params: EpidemicParams) -> EpidemicParams:
        return replace(params, **self.overrides)


SCENARIOS = {
    "ddos": ScenarioPreset("ddos", {"beta": 0.5, "delitescence": 0}),
    "hypercall": ScenarioPreset("hypercall", {"beta": 0.15, "delitescence": 2}),
    "hypervisor-dos": ScenarioPreset("hypervisor-dos", {"beta": 0.3, "delitescence": 1}),
    "mitm": ScenarioPreset("mitm", {"beta": 0.1, "delitescence": 3, "gamma": 0.02}),
    "hyperjacking": ScenarioPreset("hyperjacking", {"beta": 0.08, "delitescence": 4, "gamma": 0.01}),
    "co-location": ScenarioPreset("co-location", {"beta": 0.2, "delitescence": 2}),
    "live-migration": ScenarioPreset("live-migration", {"beta": 0.35, "delitescence": 1}),
}


@dataclass(frozen=True)
class TransmissionEvent:
    src: int
    dst: int
    t: int


@dataclass(frozen=True)
class EpidemicState:
    """Value-semantics snapshot of the epidemic at step t.

    d_timer is meaningful only for D vertices; age counts completed
    infectious steps for I vertices.  A vertex v is quarantined while
    t < quarantined_until[v].
    """

    comp: np.ndarray                # int8, one of S/D/I/R per vertex
    d_timer: np.ndarray             # int32
    age: np.ndarray                 # int32, infectious steps completed
    quarantined_until: np.ndarray   # int32
    severed: frozenset[tuple[int, int]] = frozenset()
    t: int = 0

    @property
    def n(self) -> int:
        return len(self.comp)

    def counts(self) -> dict[str, int]:
        return {name: int((self.comp == c).sum()) for c, name in enumerate(COMPARTMENT_NAMES)}

    def is_quarantined(self, v: int) -> bool:
        return self.t < self.quarantined_until[v]

    def active(self) -> bool:
        """True while any vertex can still spread or become infective."""
        return bool(((self.comp == D) | (self.comp == I)).any())

    def copy_arrays(self):
        return (self.comp.copy(), self.d_timer.copy(), self.age.copy(),
                self.quarantined_until.copy())


def initial_state(g: CloudGraph) -> EpidemicState:
    return EpidemicState(
        comp=np.full(g.n, S, dtype=np.int8),
        d_timer=np.zeros(g.n, dtype=np.int32),
        age=np.zeros(g.n, dtype=np.int32),
        quarantined_until=np.zeros(g.n, dtype=np.int32),
    )


def seed_infection(state: EpidemicState, vertices) -> EpidemicState:
    """Mark the given S vertices infected (I) at the current step."""
    comp, d_timer, age, quar = state.copy_arrays()
    for v in sorted(vertices):
        if not (0 <= v < state.n):
            raise ValueError(f"seed vertex {v} out of range")
        if comp[v] != S:
            raise ValueError(
                f"cannot seed vertex {v}: compartment is {COMPARTMENT_NAMES[comp[v]]}, not S")
        comp[v] = I
        age[v] = 0
    return replace(state, comp=comp, d_timer=d_timer, age=age, quarantined_until=quar)


class EpidemicRng:
    """Stateless draw source; every draw is a pure function of
    (seed, purpose, labels)."""

    def __init__(self, seed: int):
        self.seed = seed

    def transmits(self, src: int, dst: int, age: int, beta: float) -> bool:
        return label_uniform(self.seed, "tx", src, dst, age) < beta

    def recovers(self, v: int, age: int, gamma: float) -> bool:
        return label_uniform(self.seed, "rec", v, age) < gamma


def step(g: CloudGraph, state: EpidemicState, params: EpidemicParams,
         rng: EpidemicRng) -> tuple[EpidemicState, list[TransmissionEvent]]:
    """Advance one synchronous step; returns the new state and every
    successful transmission as (src, dst, t) with t the post-step time."""
    if state.t >= params.horizon:
        raise ValueError(f"horizon {params.horizon} exceeded at t={state.t}")
    comp, d_timer, age, quar = state.copy_arrays()
    t_next = state.t + 1
    events: list[TransmissionEvent] = []

    infectious = [v for v in range(state.n) if state.comp[v] == I]
    newly_exposed: set[int] = set()
    for src in infectious:
        if state.is_quarantined(src):
            continue
        src_age = int(state.age[src]) + 1
        for e in g.incident_edges(src):
            if e in state.severed:
                continue
            dst = e[1] if e[0] == src else e[0]
            if state.is_quarantined(dst) or state.comp[dst] != S:
                continue
            if rng.transmits(src, dst, src_age, params.beta):
                events.append(TransmissionEvent(src, dst, t_next))
                newly_exposed.add(dst)

    for v in sorted(newly_exposed):
        if params.delitescence == 0:
            comp[v] = I
            age[v] = 0
        else:
            comp[v] = D
            d_timer[v] = params.delitescence

    # timers of vertices that entered this step as D
    for v in range(state.n):
        if state.comp[v] == D:
            d_timer[v] -= 1
            if d_timer[v] <= 0:
                comp[v] = I
                d_timer[v] = 0
                age[v] = 0

    for src in infectious:
        src_age = int(state.age[src]) + 1
        if rng.recovers(src, src_age, params.gamma):
            comp[src] = R
        else:
            age[src] = src_age

    new_state = EpidemicState(comp=comp, d_timer=d_timer, age=age,
                              quarantined_until=quar, severed=state.severed, t=t_next)
    return new_state, events


@dataclass(frozen=True)
class Trajectory:
    states: tuple[EpidemicState, ...]
    events: tuple[TransmissionEvent, ...]

    def ever_infected(self) -> set[int]:
        final = self.states[-1].comp
        return {v for v in range(len(final)) if final[v] != S}


def run(g: CloudGraph, params: EpidemicParams, seeds, seed: int,
        state: EpidemicState | None = None) -> Trajectory:
    """Simulate until the horizon or until no D/I vertex remains.

    `seeds` are infected on the starting state; pass an explicit `state`
    to continue from mid-epidemic (e.g. after containment actions).
    """
    rng = EpidemicRng(seed)
    cur = state if state is not None else initial_state(g)
    if seeds:
        cur = seed_infection(cur, seeds)
    states = [cur]
    events: list[TransmissionEvent] = []
    while cur.t < params.horizon and cur.active():
        cur, step_events = step(g, cur, params, rng)
        states.append(cur)
        events.extend(step_events)
    return Trajectory(states=tuple(states), events=tuple(events))


# -- containment-facing actions ---------------------------------------------

def quarantine_vertex(g: CloudGraph, state: EpidemicState, v: int, duration: int) -> EpidemicState:
    """Make v's edges inert for `duration` steps from now (k=0 is a no-op)."""
    if not (0 <= v < state.n):
        raise ValueError(f"unknown vertex {v}")
    if duration < 0:
        raise ValueError("quarantine duration must be >= 0")
    quar = state.quarantined_until.copy()
    quar[v] = max(quar[v], state.t + duration)
    return replace(state, quarantined_until=quar)


def sever_edge(g: CloudGraph, state: EpidemicState, edge) -> EpidemicState:
    e = canonical_edge(*edge)
    if e not in g.edges:
        raise ValueError(f"unknown edge {e}")
    return replace(state, severed=state.severed | {e})


def restore(g: CloudGraph, state: EpidemicState, target) -> EpidemicState:
    """Undo a quarantine (vertex target) or a severing (edge target)."""
    if isinstance(target, int):
        if not (0 <= target < state.n):
            raise ValueError(f"unknown vertex {target}")
        if not state.is_quarantined(target):
            raise ValueError(f"vertex {target} has no active quarantine to restore")
        quar = state.quarantined_until.copy()
        quar[target] = state.t
        return replace(state, quarantined_until=quar)
    e = canonical_edge(*target)
    if e not in state.severed:
        raise ValueError(f"edge {e} is not severed")
    return replace(state, severed=state.severed - {e})


# -- export ------------------------------------------------------------------

def export_trajectory(traj: Trajectory, path) -> None:
    """One JSON record per step: {t, counts, events}."""
    import json

    by_step: dict[int, list] = {}
    for ev in traj.events:
        by_step.setdefault(ev.t, []).append([ev.src, ev.dst, ev.t])
    with open(path, "w", encoding="utf-8") as fh:
        for st in traj.states:
            rec = {"t": st.t, "counts": st.counts(), "events": by_step.get(st.t, [])}
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def trajectory_summary_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,nS,nD,nI,nR\n")
        for st in traj.states:
            c = st.counts()
            fh.write(f"{st.t},{c['S']},{c['D']},{c['I']},{c['R']}\n")
