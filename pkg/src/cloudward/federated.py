"""Federated training of the detection model across clouds, with update
clipping, Gaussian noise, a privacy ledger, and an empirical DP audit.

Each round the server distributes the flattened global model M_t; every
sampled client trains locally and returns only a parameter delta (never
its graph or logs).  The server forms

    M_{t+1} = M_t + (1/m) * (sum of clipped deltas + N(0, z^2 S^2 I))

summing in ascending client-id order.  Deltas travel as short lists of
correction terms whose sequential float addition reconstructs the
client's local parameters exactly, so with one client, z=0 and no
clipping the federated trajectory is bit-identical to centralized
training — a strong regression guard on the aggregation path.

Privacy accounting is a conservative closed form: each noised round adds
rho = 1/(2 z^2) and eps = rho + 2*sqrt(rho * ln(1/delta)).  No
subsampling amplification credit is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import gnn
from .rng import generator
from .topology import CloudGraph

# -- parameter flattening -----------------------------------------------------

def flatten_params(params: gnn.GcnAutoencoderParams) -> np.ndarray:
    return np.concatenate([params.w0.ravel(), params.w1.ravel(), params.w2.ravel()])


def unflatten_params(vec: np.ndarray, dims: tuple[int, int, int]) -> gnn.GcnAutoencoderParams:
    d, h, z = dims
    sizes = (d * h, h * z, z * d)
    if vec.shape != (sum(sizes),):
        raise ValueError(f"flat vector of length {vec.shape} does not match dims {dims}")
    a = vec[:sizes[0]].reshape(d, h)
    b = vec[sizes[0]:sizes[0] + sizes[1]].reshape(h, z)
    c = vec[sizes[0] + sizes[1]:].reshape(z, d)
    return gnn.GcnAutoencoderParams(w0=a.copy(), w1=b.copy(), w2=c.copy())


# -- clients and wire messages ------------------------------------------------

@dataclass(frozen=True)
class CloudClient:
    """One cloud's private training context.  Only deltas ever leave it."""

    client_id: int
    graph: CloudGraph | None
    feats: np.ndarray
    config: gnn.TrainConfig

    def has_data(self) -> bool:
        return self.graph is not None and self.feats.size > 0


def _transport_terms(a: np.ndarray, b: np.ndarray, max_terms: int = 64) -> tuple:
    """Terms t_1..t_k with ((a + t_1) + t_2) ... == b exactly in floats."""
    y = a.copy()
    terms = []
    for _ in range(max_terms):
        if np.array_equal(y, b):
            return tuple(terms)
        t = b - y
        y = y + t
        terms.append(t)
    raise ArithmeticError("parameter delta transport did not converge")


@dataclass(frozen=True)
class ClientUpdate:
    """Server-bound message: a delta as exact-transport terms, nothing else."""

    client_id: int
    terms: tuple
    empty: bool = False

    @classmethod
    def from_delta(cls, client_id: int, delta: np.ndarray) -> "ClientUpdate":
        return cls(client_id=client_id, terms=(np.asarray(delta, dtype=np.float64),))

    def delta(self) -> np.ndarray:
        if not self.terms:
            return np.zeros(0)
        acc = self.terms[0].copy()
        for t in self.terms[1:]:
            acc = acc + t
        return acc

    def norm(self) -> float:
        return float(np.linalg.norm(self.delta())) if self.terms else 0.0

    def nbytes(self) -> int:
        return sum(t.nbytes for t in self.terms)


def local_update(client: CloudClient, m_t: np.ndarray,
                 dims: tuple[int, int, int]) -> ClientUpdate:
    """Run the client's local epochs from M_t; return the exact delta."""
    if not client.has_data():
        return ClientUpdate(client_id=client.client_id,
                            terms=(np.zeros_like(m_t),), empty=True)
    start = unflatten_params(m_t, dims)
    if start.w0.shape[0] != client.feats.shape[1]:
        raise ValueError(
            f"client {client.client_id}: model d={start.w0.shape[0]} vs features "
            f"d={client.feats.shape[1]}")
    trained, _ = gnn.train(client.graph, client.feats, client.config, start=start)
    return ClientUpdate(client_id=client.client_id,
                        terms=_transport_terms(m_t, flatten_params(trained)))


def clip_update(delta: np.ndarray, s: float) -> np.ndarray:
    """delta / max(1, ||delta||_2 / S); identity when already within S."""
    if s <= 0:
        raise ValueError("clip bound S must be > 0")
    norm = float(np.linalg.norm(delta))
    factor = max(1.0, norm / s)
    return delta if factor == 1.0 else delta / factor


def clip_client_update(update: ClientUpdate, s: float) -> ClientUpdate:
    if s <= 0:
        raise ValueError("clip bound S must be > 0")
    factor = max(1.0, update.norm() / s)
    if factor == 1.0:
        return update                        # terms untouched: exact path
    return ClientUpdate(client_id=update.client_id,
                        terms=(update.delta() / factor,), empty=update.empty)


def aggregate(m_t: np.ndarray, updates, z: float, s: float, m: int,
              rng: np.random.Generator) -> np.ndarray:
    """Apply clipped updates and one shared noise draw, each scaled by 1/m.

    Updates are applied term-by-term in ascending client-id order; noise
    N(0, z^2 S^2) per coordinate is added to the sum (skipped entirely at
    z=0 so noiseless aggregation is bit-exact).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    ups = [u if isinstance(u, ClientUpdate) else ClientUpdate.from_delta(i, u)
           for i, u in enumerate(updates)]
    out = m_t.copy()
    for u in sorted(ups, key=lambda u: u.client_id):
        for t in u.terms:
            if t.shape != m_t.shape:
                raise ValueError(f"update shape {t.shape} does not match model {m_t.shape}")
            out = out + t / m
    if z > 0.0:
        out = out + rng.normal(0.0, z * s, size=m_t.shape) / m
    return out


# -- privacy accounting --------------------------------------------------------

def epsilon_from_rho(rho: float, delta: float) -> float:
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if math.isinf(rho):
        return math.inf
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))


@dataclass
class PrivacyLedger:
    delta_target: float = 1e-5
    rounds: int = 0
    rho: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.delta_target < 1.0):
            raise ValueError("delta_target must lie in (0, 1)")

    @property
    def epsilon(self) -> float:
        return epsilon_from_rho(self.rho, self.delta_target) if self.rounds else 0.0

    def charge(self, z: float) -> None:
        self.rounds += 1
        self.rho = math.inf if z <= 0.0 else self.rho + 1.0 / (2.0 * z * z)


def account_privacy(ledger: PrivacyLedger, z: float) -> tuple[float, float]:
    """Charge one round at noise multiplier z; returns (rho, epsilon).
    z=0 yields unbounded (inf) privacy loss rather than an error."""
    ledger.charge(z)
    return ledger.rho, ledger.epsilon


# -- round loop ----------------------------------------------------------------

@dataclass(frozen=True)
class FederationConfig:
    rounds: int = 5
    clients_per_round: int | None = None   # None = every client, every round
    clip: float = math.inf         # S
    noise: float = 0.0             # z
    local_epochs: int = 1
    delta_target: float = 1e-5
    epsilon_stop: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1 or self.local_epochs < 0:
            raise ValueError("rounds must be >= 1 and local_epochs >= 0")
        if self.clients_per_round is not None and self.clients_per_round < 1:
            raise ValueError("clients_per_round must be >= 1")
        if self.clip <= 0:
            raise ValueError("clip bound S must be > 0")
        if self.noise < 0:
            raise ValueError("noise multiplier z must be >= 0")
        if self.noise > 0 and not math.isfinite(self.clip):
            raise ValueError("noise > 0 requires a finite clip bound S")
        if not (0.0 < self.delta_target < 1.0):
            raise ValueError("delta_target must lie in (0, 1)")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    m: int
    epsilon: float
    rho: float
    mean_update_norm: float
    loss_global: float


@dataclass
class FederationResult:
    params: gnn.GcnAutoencoderParams
    ledger: PrivacyLedger
    rounds: list[RoundRecord]
    params_history: list[np.ndarray]          # flattened M_0 .. M_T
    trace: list[tuple] = field(default_factory=list)  # (round, direction, type, bytes)


def _client_loss(client: CloudClient, params: gnn.GcnAutoencoderParams) -> float:
    z, a_hat, r_hat = gnn.reconstruct(client.graph, client.feats, params)
    return gnn.loss(client.graph.adjacency(), a_hat, client.feats, r_hat,
                    client.config.alpha)


def run_federation(clients, cfg: FederationConfig,
                   init: gnn.GcnAutoencoderParams | None = None,
                   keep_trace: bool = False, on_round=None) -> FederationResult:
    if not clients:
        raise ValueError("federation needs at least one client")
    ids = [c.client_id for c in clients]
    if len(set(ids)) != len(ids):
        raise ValueError("client ids must be unique")
    base = clients[0].config
    for c in clients:
        if (c.config.hidden, c.config.latent, c.config.alpha) != (base.hidden, base.latent, base.alpha):
            raise ValueError("clients disagree on model architecture")
        if c.has_data() and c.feats.shape[1] != clients[0].feats.shape[1]:
            raise ValueError("clients disagree on feature dimension")

    d = clients[0].feats.shape[1]
    dims = (d, base.hidden, base.latent)
    if init is None:
        init = gnn.init_params(d, base.hidden, base.latent, base.seed)
    m_t = flatten_params(init)

    local_cfg = {c.client_id: replace(c.config, epochs=cfg.local_epochs) for c in clients}
    ledger = PrivacyLedger(delta_target=cfg.delta_target)
    records: list[RoundRecord] = []
    history = [m_t.copy()]
    trace: list[tuple] = []

    for rnd in range(1, cfg.rounds + 1):
        m = len(clients) if cfg.clients_per_round is None \
            else min(cfg.clients_per_round, len(clients))
        pick = generator("fed-select", cfg.seed, rnd).choice(len(clients), size=m,
                                                             replace=False)
        chosen = sorted((clients[i] for i in pick), key=lambda c: c.client_id)

        updates = []
        for client in chosen:
            if keep_trace:
                trace.append((rnd, "server->client", "model", m_t.nbytes))
            worker = CloudClient(client.client_id, client.graph, client.feats,
                                 local_cfg[client.client_id])
            up = clip_client_update(local_update(worker, m_t, dims), cfg.clip)
            if keep_trace:
                trace.append((rnd, "client->server", "update", up.nbytes()))
            updates.append(up)

        noise_rng = generator("fed-noise", cfg.seed, rnd)
        m_t = aggregate(m_t, updates, cfg.noise, cfg.clip, m, noise_rng)
        history.append(m_t.copy())

        rho, eps = account_privacy(ledger, cfg.noise)
        params_now = unflatten_params(m_t, dims)
        with_data = [c for c in chosen if c.has_data()]
        loss_global = (sum(_client_loss(c, params_now) for c in with_data) / len(with_data)
                       if with_data else math.nan)
        record = RoundRecord(
            round=rnd, m=m, epsilon=eps, rho=rho,
            mean_update_norm=sum(u.norm() for u in updates) / m,
            loss_global=loss_global)
        records.append(record)
        if on_round is not None:
            on_round(record)
        if cfg.epsilon_stop is not None and eps > cfg.epsilon_stop:
            break

    return FederationResult(params=unflatten_params(m_t, dims), ledger=ledger,
                            rounds=records, params_history=history, trace=trace)


def export_round_log(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("round,m,epsilon,rho,mean_update_norm,loss_global\n")
        for r in records:
            fh.write(f"{r.round},{r.m},{r.epsilon!r},{r.rho!r},"
                     f"{r.mean_update_norm!r},{r.loss_global!r}\n")


def export_trace(trace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("round,direction,payload,bytes\n")
        for rnd, direction, kind, nbytes in trace:
            fh.write(f"{rnd},{direction},{kind},{nbytes}\n")


def make_synthetic_clients(count: int, vertices: int, seed: int,
                           hidden: int = 8, latent: int = 4,
                           alpha: float = 0.5, lr: float = 5e-4) -> list[CloudClient]:
    """Self-contained client fleet: each cloud gets its own small topology,
    epidemic, logs and features.  Used by demos, the CLI and the service."""
    from .epidemic import SCENARIOS, EpidemicParams, run
    from .logfeat import SkipGramConfig, featurize_all, train_embeddings
    from .logsynth import generate_logs
    from .rng import derive_seed
    from .topology import TopologySpec, generate_topology

    if count < 1 or vertices < 2:
        raise ValueError("need count >= 1 and vertices >= 2")
    cfg = gnn.TrainConfig(alpha=alpha, lr=lr, epochs=1, hidden=hidden, latent=latent,
                          seed=derive_seed(seed, "fed-model"))
    clients = []
    for i in range(count):
        g = generate_topology(TopologySpec(n=vertices, model="uniform-random", p=0.15),
                              derive_seed(seed, "fed-graph", i))
        traj = run(g, EpidemicParams(horizon=8), [0], derive_seed(seed, "fed-epi", i))
        corpus = generate_logs(g, traj, SCENARIOS["ddos"], rate=1, mix=0.7,
                               seed=derive_seed(seed, "fed-logs", i))
        table = train_embeddings(
            corpus, SkipGramConfig(dim=6, window=2, negatives=3, epochs=1,
                                   seed=derive_seed(seed, "fed-emb", i)))
        clients.append(CloudClient(client_id=i, graph=g,
                                   feats=featurize_all(corpus, table), config=cfg))
    return clients


# -- empirical DP audit ---------------------------------------------------------

@dataclass(frozen=True)
class AuditResult:
    passed: bool
    worst_gap: float        # max over bins of p_hat - (e^eps q_hat + delta + slack)
    n_trials: int
    bins: int


def empirical_dp_audit(mech_a, mech_b, epsilon: float, delta: float,
                       n_trials: int = 10_000, bins: int = 40) -> AuditResult:
    """Histogram check that two adjacent-input output distributions obey
    P[A in B] <= e^eps P[B in B] + delta up to binomial sampling slack.

    mech_a / mech_b map a trial index to one scalar output.  This is a
    sanity audit (it can only ever catch violations), not a proof.
    """
    if n_trials < 100:
        raise ValueError("n_trials too small for a meaningful audit")
    a = np.array([float(mech_a(i)) for i in range(n_trials)])
    b = np.array([float(mech_b(i)) for i in range(n_trials)])
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if lo == hi:
        return AuditResult(passed=True, worst_gap=-delta, n_trials=n_trials, bins=1)
    edges = np.linspace(lo, hi, bins + 1)
    p = np.histogram(a, bins=edges)[0] / n_trials
    q = np.histogram(b, bins=edges)[0] / n_trials

    e_eps = math.exp(epsilon)
    worst = -math.inf
    for top, bot in ((p, q), (q, p)):
        se_top = np.sqrt(top * (1.0 - top) / n_trials)
        se_bot = np.maximum(np.sqrt(bot * (1.0 - bot) / n_trials), 1.0 / n_trials)
        gap = top - (e_eps * bot + delta + 3.0 * (se_top + e_eps * se_bot))
        worst = max(worst, float(gap.max()))
    return AuditResult(passed=worst <= 0.0, worst_gap=worst,
                       n_trials=n_trials, bins=bins)


def adjacent_sum_mechanisms(delta_vec: np.ndarray, z: float, s: float,
                            coord: int = 0, seed: int = 0):
    """Mechanism pair for adjacency 'one client present vs absent'.

    Output is one coordinate of the noised clipped sum (the quantity whose
    sensitivity the clip bound S controls).  The same per-trial noise seed
    is used on both sides, which leaves the marginals unchanged."""
    shifted = float(clip_update(np.asarray(delta_vec, dtype=np.float64), s)[coord])

    def with_client(trial: int) -> float:
        noise = float(generator("dp-audit", seed, trial).normal(0.0, z * s)) if z > 0 else 0.0
        return shifted + noise

    def without_client(trial: int) -> float:
        noise = float(generator("dp-audit", seed, trial).normal(0.0, z * s)) if z > 0 else 0.0
        return noise

    return with_client, without_client
