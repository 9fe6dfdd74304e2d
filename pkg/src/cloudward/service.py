"""HTTP control plane for live epidemic scenarios.

Runs scenarios in memory behind a threaded JSON-over-HTTP API:

    POST /scenarios                  create (topology spec or graph, params, preset, seed)
    GET  /scenarios                  list
    GET  /scenarios/{id}/state       compartments + scores + heatmap
    POST /scenarios/{id}/steps       advance n steps
    POST /scenarios/{id}/actions     apply containment actions
    GET  /scenarios/{id}/forecast    predicted score colorings, ?k=
    POST /scenarios/{id}/plan        greedy containment suggestion
    POST /federation/jobs            start a federated training job
    GET  /federation/jobs[/{id}]     job status + round log
    GET  /scenarios/{id}/events      newline-delimited event stream, ?since=

Every response body carries schema_version.  Mutations on one scenario are
serialized by a per-scenario lock; the event stream replays from a ring
buffer (?since=seq) and then follows live with a bounded per-subscriber
queue — a subscriber that cannot keep up is disconnected rather than
blocking the publisher.
"""

from __future__ import annotations

import itertools
import json
import os
import queue
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from collections import deque
from dataclasses import replace
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import containment, federated, forecast, gnn, logfeat, logsynth, scoring
from .epidemic import (
    COMPARTMENT_NAMES,
    SCENARIOS,
    EpidemicParams,
    EpidemicRng,
    initial_state,
    run,
    seed_infection,
    step,
)
from .rng import derive_seed, generator
from .topology import (
    CloudGraph,
    HyperedgeSpec,
    TopologySpec,
    generate_topology,
    graph_from_dict,
    normalized_adjacency,
)

SCHEMA_VERSION = 1
EVENT_RING = 4096
SUBSCRIBER_QUEUE = 512

_PARAM_KEYS = {"beta", "delitescence", "gamma", "horizon"}
_TOPOLOGY_KEYS = {"n", "model", "p", "m", "k", "p_in", "p_out", "hyperedges"}
_HYPEREDGE_KEYS = {"count", "size_min", "size_max"}


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class _Subscriber:
    __slots__ = ("q", "dropped")

    def __init__(self):
        self.q: queue.Queue = queue.Queue(maxsize=SUBSCRIBER_QUEUE)
        self.dropped = False


class Scenario:
    """One live epidemic with its trained detection stack."""

    def __init__(self, scenario_id: str, graph: CloudGraph, params: EpidemicParams,
                 preset, seed: int, seeds, protected, log_rate: int = 2,
                 log_mix: float = 0.7, score_rollouts: int = 10,
                 feature_window: int = 128):
        self.id = scenario_id
        self.graph = graph
        self.params = params
        self.preset = preset
        self.seed = seed
        self.protected = frozenset(int(v) for v in protected)
        self.log_rate = log_rate
        self.log_mix = log_mix
        self.score_rollouts = score_rollouts
        self.feature_window = feature_window

        self.lock = threading.RLock()
        self.state = seed_infection(initial_state(graph), seeds)
        self.stepper = EpidemicRng(derive_seed(seed, "live-epidemic"))
        self.version = 0
        self.seq = 0
        self.ring: deque = deque(maxlen=EVENT_RING)
        self.subscribers: list[_Subscriber] = []
        self.entries: list[list] = [[] for _ in range(graph.n)]
        self.embed_history: list[np.ndarray] = []
        self._state_cache: tuple[int, dict] | None = None

        self.s_norm = normalized_adjacency(graph)
        self._train_stack(seeds)
        self._absorb_state_logs()

    # -- model stack -------------------------------------------------------

    def _train_stack(self, seeds) -> None:
        shadow = run(self.graph, self.params, seeds, derive_seed(self.seed, "shadow"))
        corpus = logsynth.generate_logs(self.graph, shadow, self.preset,
                                        rate=self.log_rate, mix=self.log_mix,
                                        seed=derive_seed(self.seed, "shadow-logs"))
        self.table = logfeat.train_embeddings(
            corpus, logfeat.SkipGramConfig(dim=8, window=2, negatives=3, lr=0.05,
                                           epochs=1, seed=derive_seed(self.seed, "embed")))
        feats = logfeat.featurize_all(corpus, self.table, window=self.feature_window)
        self.train_config = gnn.TrainConfig(alpha=0.5, lr=5e-4, epochs=120, hidden=16,
                                            latent=8, seed=derive_seed(self.seed, "gnn"))
        self.detector, _ = gnn.train(self.graph, feats, self.train_config)
        z = gnn.encode(self.s_norm, feats, self.detector)
        infected = shadow.ever_infected()
        labels = [1.0 if v in infected else 0.0 for v in range(self.graph.n)]
        self.head = gnn.fit_supervised(z, labels, "infected-indicator", epochs=200)

    def _absorb_state_logs(self) -> None:
        rows = logsynth.generate_state_logs(self.graph, self.state, self.preset,
                                            self.log_rate, self.log_mix,
                                            derive_seed(self.seed, "live-logs"))
        for v, tokens in rows:
            self.entries[v].append((self.state.t, tokens))
        self.embed_history.append(
            gnn.encode(self.s_norm, self._current_feats(), self.detector))

    def _current_feats(self) -> np.ndarray:
        rows = []
        for v in range(self.graph.n):
            toks: list[str] = []
            for _, tokens in self.entries[v]:
                toks.extend(tokens)
            rows.append(logfeat.featurize_vertex(toks, self.table, self.feature_window))
        return np.stack(rows)

    # -- events --------------------------------------------------------------

    def emit(self, kind: str, payload: dict) -> None:
        """Append to the ring and fan out; caller must hold the lock."""
        self.seq += 1
        record = {"schema_version": SCHEMA_VERSION, "scenario_id": self.id,
                  "seq": self.seq, "kind": kind, "t": int(self.state.t)}
        record.update(payload)
        self.ring.append(record)
        for sub in list(self.subscribers):
            try:
                sub.q.put_nowait(record)
            except queue.Full:
                sub.dropped = True
                self.subscribers.remove(sub)

    def subscribe(self, since: int):
        with self.lock:
            backlog = [r for r in self.ring if r["seq"] > since]
            sub = _Subscriber()
            self.subscribers.append(sub)
            return backlog, sub

    def unsubscribe(self, sub: _Subscriber) -> None:
        with self.lock:
            if sub in self.subscribers:
                self.subscribers.remove(sub)

    # -- snapshots used by event/state payloads -------------------------------

    def _view(self) -> dict:
        st = self.state
        return {
            "counts": st.counts(),
            "compartments": [int(c) for c in st.comp],
            "quarantined": [v for v in range(st.n) if st.is_quarantined(v)],
            "severed": sorted([list(e) for e in st.severed]),
            "finished": bool(st.t >= self.params.horizon),
            "active": bool(st.active()),
        }

    # -- operations ------------------------------------------------------------

    def do_steps(self, n: int, snapshot_dir: str | None = None) -> dict:
        if n < 1:
            raise ApiError(400, "n must be >= 1")
        with self.lock:
            if self.state.t >= self.params.horizon:
                raise ApiError(409, f"scenario {self.id} finished: t={self.state.t} "
                                    f"reached horizon {self.params.horizon}")
            applied = 0
            for _ in range(n):
                if self.state.t >= self.params.horizon:
                    break
                self.state, events = step(self.graph, self.state, self.params, self.stepper)
                self.version += 1
                self._absorb_state_logs()
                view = self._view()
                view["transmissions"] = [[e.src, e.dst] for e in events]
                self.emit("step", view)
                if snapshot_dir:
                    self._snapshot(snapshot_dir)
                applied += 1
            body = self._view()
            body.update({"scenario_id": self.id, "t": int(self.state.t),
                         "steps_applied": applied, "seq": self.seq})
            return body

    def do_actions(self, raw_actions) -> dict:
        if not isinstance(raw_actions, list) or not raw_actions:
            raise ApiError(400, "body must carry a nonempty 'actions' list")
        actions = [_action_from_json(a) for a in raw_actions]
        with self.lock:
            for a in actions:
                if a.kind == "quarantine" and a.vertex in self.protected:
                    raise ApiError(400, f"invalid action '{a.describe()}': vertex "
                                        f"{a.vertex} is protected")
            try:
                new_state = containment.apply_plan(self.graph, self.state, actions)
            except ValueError as exc:
                raise ApiError(400, f"invalid action: {exc}") from None
            self.state = new_state
            self.version += 1
            view = self._view()
            view["actions"] = [_action_to_json(a) for a in actions]
            self.emit("action", view)
            body = dict(view)
            body.update({"scenario_id": self.id, "t": int(self.state.t), "seq": self.seq})
            return body

    def state_payload(self) -> dict:
        with self.lock:
            if self._state_cache is not None and self._state_cache[0] == self.version:
                return self._state_cache[1]
            feats = self._current_feats()
            raw = gnn.score_graph(self.graph, feats, self.detector,
                                  self.train_config.alpha)
            anomaly = gnn.normalize_scores(raw)
            impact_params = replace(self.params,
                                    horizon=min(self.params.horizon, 15))
            vertex_scores = scoring.score_vertices(
                self.graph, anomaly, impact_params, n_rollouts=self.score_rollouts,
                seed=derive_seed(self.seed, "scores"), base_state=self.state)
            cloud = scoring.cloud_scores(vertex_scores)
            body = self._view()
            body.update({
                "scenario_id": self.id,
                "t": int(self.state.t),
                "seq": self.seq,
                "n": self.graph.n,
                "compartment_names": list(COMPARTMENT_NAMES),
                "anomaly": [float(x) for x in anomaly],
                "heatmap": [float(x) for x in anomaly],
                "scores": {
                    "risk": [s.risk for s in vertex_scores],
                    "exploitability": [s.exploitability for s in vertex_scores],
                    "impact": [s.impact for s in vertex_scores],
                },
                "cloud": {"risk": cloud.risk, "exploitability": cloud.exploitability,
                          "impact": cloud.impact},
            })
            self._state_cache = (self.version, body)
            return body

    def forecast_payload(self, k: int) -> dict:
        if k < 1:
            raise ApiError(400, "k must be >= 1")
        order = 2
        with self.lock:
            if len(self.embed_history) < order + 1:
                raise ApiError(400, f"forecast needs at least {order + 1} recorded "
                                    f"steps, have {len(self.embed_history)}")
            model = forecast.fit_forecaster([self.embed_history], p=order, ridge=1e-6)
            colors = forecast.color_forecast(model, self.embed_history, self.head, k)
            return {
                "scenario_id": self.id,
                "t": int(self.state.t),
                "k": k,
                "frames": [{"t": int(self.state.t) + i + 1,
                            "scores": [float(x) for x in colors[i]]}
                           for i in range(k)],
            }

    def plan_payload(self, body: dict) -> dict:
        horizon = int(body.get("horizon", 10))
        cfg = containment.ObjectiveConfig(
            params=self.params,
            lam=float(body.get("lam", 1.0)),
            mu=float(body.get("mu", 0.1)),
            protected=self.protected,
            budget=int(body.get("budget", 2)),
            horizon=horizon,
            n_rollouts=int(body.get("n_rollouts", 10)),
        )
        with self.lock:
            seed = derive_seed(self.seed, "plan", self.version)
            plan = containment.greedy_plan(self.graph, self.state, cfg, seed=seed)
            j, report = containment.evaluate_plan(self.graph, self.state, plan, cfg, seed)
            j_empty, _ = containment.evaluate_plan(self.graph, self.state, (), cfg, seed)
            return {
                "scenario_id": self.id,
                "t": int(self.state.t),
                "plan": [_action_to_json(a) for a in plan],
                "objective": j,
                "baseline_objective": j_empty,
                "report": {
                    "time_to_implement": report.time_to_implement,
                    "business_impact": report.business_impact,
                    "containment_prob": report.containment_prob,
                },
            }

    def _snapshot(self, directory: str) -> None:
        st = self.state
        rec = {"scenario_id": self.id, "t": int(st.t), "seq": self.seq,
               "comp": [int(x) for x in st.comp],
               "d_timer": [int(x) for x in st.d_timer],
               "age": [int(x) for x in st.age],
               "quarantined_until": [int(x) for x in st.quarantined_until],
               "severed": sorted([list(e) for e in st.severed])}
        path = os.path.join(directory, f"{self.id}.json")
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(rec, fh, sort_keys=True)
        os.replace(tmp, path)


def _action_from_json(obj) -> containment.Action:
    if not isinstance(obj, dict):
        raise ApiError(400, "each action must be an object")
    kind = obj.get("kind")
    if kind not in ("quarantine", "sever", "restore"):
        raise ApiError(400, f"unknown action kind {kind!r}")
    try:
        return containment.Action(
            kind=kind,
            vertex=int(obj["vertex"]) if obj.get("vertex") is not None else None,
            edge=tuple(int(x) for x in obj["edge"]) if obj.get("edge") is not None else None,
            duration=int(obj.get("duration", 1)),
            cost=float(obj.get("cost", 1.0)),
            implement_time=int(obj.get("implement_time", 0)),
        )
    except (ValueError, TypeError) as exc:
        raise ApiError(400, f"invalid action: {exc}") from None


def _action_to_json(a: containment.Action) -> dict:
    return {"kind": a.kind, "vertex": a.vertex,
            "edge": list(a.edge) if a.edge is not None else None,
            "duration": a.duration, "cost": a.cost,
            "implement_time": a.implement_time}


class FederationJob:
    """Background federated run over synthetic in-process clients."""

    def __init__(self, job_id: str, body: dict):
        self.id = job_id
        self.lock = threading.Lock()
        self.status = "running"
        self.error: str | None = None
        self.records: list = []
        self.config = {
            "clients": int(body.get("clients", 3)),
            "rounds": int(body.get("rounds", 3)),
            "noise": float(body.get("noise", 1.0)),
            "clip": float(body["clip"]) if body.get("clip") is not None else None,
            "local_epochs": int(body.get("local_epochs", 1)),
            "clients_per_round": (int(body["clients_per_round"])
                                  if body.get("clients_per_round") is not None else None),
            "vertices": int(body.get("vertices", 12)),
            "seed": int(body.get("seed", 0)),
        }
        if self.config["clients"] < 1:
            raise ApiError(400, "clients must be >= 1")
        self.thread = threading.Thread(target=self._run, daemon=True,
                                       name=f"fed-{job_id}")

    def _run(self) -> None:
        try:
            cfg = self.config
            # noisy aggregation needs a finite sensitivity bound
            if cfg["clip"] is None:
                clip = 1.0 if cfg["noise"] > 0 else float("inf")
            else:
                clip = cfg["clip"]
            fed_cfg = federated.FederationConfig(
                rounds=cfg["rounds"],
                clients_per_round=cfg["clients_per_round"],
                clip=clip,
                noise=cfg["noise"],
                local_epochs=cfg["local_epochs"],
                seed=cfg["seed"],
            )
            clients = federated.make_synthetic_clients(
                cfg["clients"], cfg["vertices"], cfg["seed"])
            result = federated.run_federation(clients, fed_cfg,
                                              on_round=self._on_round)
            with self.lock:
                self.status = "done"
                self.records = list(result.rounds)
        except Exception as exc:
            with self.lock:
                self.status = "error"
                self.error = str(exc)

    def _on_round(self, record) -> None:
        with self.lock:
            self.records.append(record)

    def payload(self) -> dict:
        with self.lock:
            recs = [{"round": r.round, "m": r.m, "epsilon": r.epsilon, "rho": r.rho,
                     "mean_update_norm": r.mean_update_norm,
                     "loss_global": r.loss_global} for r in self.records]
            body = {"job_id": self.id, "status": self.status, "rounds": recs,
                    "config": self.config,
                    "epsilon": recs[-1]["epsilon"] if recs else 0.0}
            if self.error:
                body["error"] = self.error
            return body


class DefenseService:
    """In-memory scenario registry plus the HTTP server around it."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 snapshot_dir: str | None = None):
        self.scenarios: dict[str, Scenario] = {}
        self.jobs: dict[str, FederationJob] = {}
        self.registry_lock = threading.Lock()
        self.snapshot_dir = snapshot_dir
        self.stopping = False
        self._counter = itertools.count(1)
        self._thread: threading.Thread | None = None
        if snapshot_dir:
            os.makedirs(snapshot_dir, exist_ok=True)
        self._httpd = ThreadingHTTPServer((host, port), _Handler)
        self._httpd.daemon_threads = True
        self._httpd.service = self
        self._routes = [
            ("POST", re.compile(r"^/scenarios$"), self._create_scenario),
            ("GET", re.compile(r"^/scenarios$"), self._list_scenarios),
            ("GET", re.compile(r"^/scenarios/([^/]+)/state$"), self._get_state),
            ("POST", re.compile(r"^/scenarios/([^/]+)/steps$"), self._post_steps),
            ("POST", re.compile(r"^/scenarios/([^/]+)/actions$"), self._post_actions),
            ("GET", re.compile(r"^/scenarios/([^/]+)/forecast$"), self._get_forecast),
            ("POST", re.compile(r"^/scenarios/([^/]+)/plan$"), self._post_plan),
            ("POST", re.compile(r"^/federation/jobs$"), self._create_job),
            ("GET", re.compile(r"^/federation/jobs$"), self._list_jobs),
            ("GET", re.compile(r"^/federation/jobs/([^/]+)$"), self._get_job),
            ("GET", re.compile(r"^/health$"), self._health),
        ]

    # -- lifecycle ------------------------------------------------------------

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._httpd.server_address[:2]
        return str(host), int(port)

    def start(self) -> "DefenseService":
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        name="cloudward-http", daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self.stopping = True
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    # -- routing ----------------------------------------------------------------

    def route(self, method: str, path: str):
        if re.fullmatch(r"/scenarios/([^/]+)/events", path):
            sid = path.split("/")[2]
            return ("stream", self._scenario(sid))
        for m, rx, fn in self._routes:
            match = rx.fullmatch(path)
            if match and m == method:
                return ("json", fn, match.groups())
        for m, rx, _fn in self._routes:
            if rx.fullmatch(path):
                raise ApiError(405, f"{method} not allowed on {path}")
        raise ApiError(404, f"no route for {path}")

    def _scenario(self, sid: str) -> Scenario:
        with self.registry_lock:
            sc = self.scenarios.get(sid)
        if sc is None:
            raise ApiError(404, f"unknown scenario {sid!r}")
        return sc

    # -- endpoint handlers: (body, query) -> (payload, status) -------------------

    def _health(self, body, query):
        return {"status": "ok"}, 200

    def _create_scenario(self, body, query):
        if not isinstance(body, dict):
            raise ApiError(400, "body must be a JSON object")
        seed = int(body.get("seed", 0))
        preset_name = body.get("preset", "ddos")
        preset = SCENARIOS.get(preset_name)
        if preset is None:
            raise ApiError(400, f"unknown preset {preset_name!r}; "
                                f"expected one of {sorted(SCENARIOS)}")
        params = preset.apply(EpidemicParams())
        raw_params = body.get("params", {})
        unknown = set(raw_params) - _PARAM_KEYS
        if unknown:
            raise ApiError(400, f"unknown params keys: {sorted(unknown)}")
        try:
            params = replace(
                params,
                beta=float(raw_params.get("beta", params.beta)),
                delitescence=int(raw_params.get("delitescence", params.delitescence)),
                gamma=float(raw_params.get("gamma", params.gamma)),
                horizon=int(raw_params.get("horizon", params.horizon)),
            )
        except ValueError as exc:
            raise ApiError(400, f"invalid params: {exc}") from None

        if ("graph" in body) == ("topology" in body):
            raise ApiError(400, "provide exactly one of 'graph' or 'topology'")
        try:
            if "graph" in body:
                graph = graph_from_dict(body["graph"])
            else:
                tbody = dict(body["topology"])
                unknown = set(tbody) - _TOPOLOGY_KEYS
                if unknown:
                    raise ApiError(400, f"unknown topology keys: {sorted(unknown)}")
                hyper = tbody.pop("hyperedges", None)
                if hyper is not None:
                    bad = set(hyper) - _HYPEREDGE_KEYS
                    if bad:
                        raise ApiError(400, f"unknown hyperedge keys: {sorted(bad)}")
                    tbody["hyperedges"] = HyperedgeSpec(**hyper)
                spec = TopologySpec(**tbody)
                graph = generate_topology(spec, derive_seed(seed, "topology"))
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ApiError):
                raise
            raise ApiError(400, f"invalid graph/topology: {exc}") from None

        seeds = body.get("seeds")
        if seeds is None:
            seeds = [int(generator("svc-seed", seed).integers(graph.n))]
        seeds = [int(v) for v in seeds]

        with self.registry_lock:
            sid = f"s{next(self._counter)}"
        try:
            sc = Scenario(sid, graph, params, preset, seed, seeds,
                          protected=body.get("protected", ()),
                          log_rate=int(body.get("log_rate", 2)),
                          log_mix=float(body.get("log_mix", 0.7)),
                          score_rollouts=int(body.get("score_rollouts", 10)),
                          feature_window=int(body.get("feature_window", 128)))
        except ValueError as exc:
            raise ApiError(400, f"could not create scenario: {exc}") from None
        with self.registry_lock:
            self.scenarios[sid] = sc
        with sc.lock:
            view = sc._view()
            view["n"] = graph.n
            view["seeds"] = seeds
            sc.emit("created", view)
            payload = dict(view)
            payload.update({"scenario_id": sid, "t": int(sc.state.t), "seed": seed,
                            "preset": preset_name, "seq": sc.seq,
                            "edges": [list(e) for e in graph.edges],
                            "hyperedges": {k: list(v) for k, v in graph.hyperedges.items()},
                            "horizon": params.horizon})
        return payload, 201

    def _list_scenarios(self, body, query):
        with self.registry_lock:
            scenarios = list(self.scenarios.values())
        items = []
        for sc in scenarios:
            with sc.lock:
                items.append({"scenario_id": sc.id, "t": int(sc.state.t),
                              "n": sc.graph.n, "counts": sc.state.counts(),
                              "finished": bool(sc.state.t >= sc.params.horizon)})
        return {"scenarios": items}, 200

    def _get_state(self, body, query, sid=None):
        return self._scenario(sid).state_payload(), 200

    def _post_steps(self, body, query, sid=None):
        if not isinstance(body, dict):
            raise ApiError(400, "body must be a JSON object")
        try:
            n = int(body.get("n", 1))
        except (TypeError, ValueError):
            raise ApiError(400, "n must be an integer") from None
        return self._scenario(sid).do_steps(n, self.snapshot_dir), 200

    def _post_actions(self, body, query, sid=None):
        if not isinstance(body, dict):
            raise ApiError(400, "body must be a JSON object")
        return self._scenario(sid).do_actions(body.get("actions")), 200

    def _get_forecast(self, body, query, sid=None):
        k = int(query.get("k", ["3"])[0])
        return self._scenario(sid).forecast_payload(k), 200

    def _post_plan(self, body, query, sid=None):
        if not isinstance(body, dict):
            raise ApiError(400, "body must be a JSON object")
        try:
            return self._scenario(sid).plan_payload(body), 200
        except ValueError as exc:
            raise ApiError(400, str(exc)) from None

    def _create_job(self, body, query):
        if not isinstance(body, dict):
            raise ApiError(400, "body must be a JSON object")
        with self.registry_lock:
            jid = f"j{next(self._counter)}"
        job = FederationJob(jid, body)
        with self.registry_lock:
            self.jobs[jid] = job
        job.thread.start()
        return job.payload(), 201

    def _list_jobs(self, body, query):
        with self.registry_lock:
            jobs = list(self.jobs.values())
        return {"jobs": [j.payload() for j in jobs]}, 200

    def _get_job(self, body, query, jid=None):
        with self.registry_lock:
            job = self.jobs.get(jid)
        if job is None:
            raise ApiError(404, f"unknown federation job {jid!r}")
        return job.payload(), 200


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "cloudward"

    def log_message(self, fmt, *args):   # keep test output quiet
        pass

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _dispatch(self, method: str) -> None:
        service: DefenseService = self.server.service
        try:
            parsed = urlparse(self.path)
            route = service.route(method, parsed.path)
            if route[0] == "stream":
                if method != "GET":
                    raise ApiError(405, "event stream is GET-only")
                query = parse_qs(parsed.query)
                since = int(query.get("since", ["0"])[0])
                self._stream_events(route[1], since)
                return
            _, fn, groups = route
            body = self._read_json() if method == "POST" else None
            payload, status = fn(body, parse_qs(parsed.query), *groups)
            self._send_json(status, payload)
        except ApiError as exc:
            self._send_json(exc.status, {"error": exc.message})
        except (BrokenPipeError, ConnectionResetError):
            pass
        except Exception as exc:   # pragma: no cover - defensive
            try:
                self._send_json(500, {"error": f"internal error: {exc}"})
            except (BrokenPipeError, ConnectionResetError):
                pass

    def _read_json(self):
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ApiError(400, f"malformed JSON body: {exc}") from None

    def _send_json(self, status: int, payload: dict) -> None:
        body = dict(payload)
        body.setdefault("schema_version", SCHEMA_VERSION)
        data = (json.dumps(body, sort_keys=True) + "\n").encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _stream_events(self, scenario: Scenario, since: int) -> None:
        backlog, sub = scenario.subscribe(since)
        service: DefenseService = self.server.service
        try:
            self.send_response(200)
            self.send_header("Content-Type", "application/x-ndjson")
            self.send_header("Cache-Control", "no-store")
            self.send_header("Connection", "close")
            self.end_headers()
            last = since
            for record in backlog:
                self.wfile.write((json.dumps(record, sort_keys=True) + "\n").encode())
                last = record["seq"]
            self.wfile.flush()
            while not service.stopping and not sub.dropped:
                try:
                    record = sub.q.get(timeout=0.25)
                except queue.Empty:
                    continue
                if record["seq"] <= last:
                    continue
                self.wfile.write((json.dumps(record, sort_keys=True) + "\n").encode())
                self.wfile.flush()
                last = record["seq"]
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            scenario.unsubscribe(sub)
