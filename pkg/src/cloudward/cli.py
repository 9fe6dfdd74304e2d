"""Batch command-line runner: seeded, config-driven, reproducible artifacts.

Subcommands build their pipeline from scratch on every run (topology ->
epidemic -> logs -> embeddings -> detector -> downstream), so two runs with
the same config and seed produce byte-identical artifacts.  Timestamps are
confined to run_meta.json; every run also writes resolved_config.toml with
the fully merged configuration it used.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace

try:
    import tomllib
except ModuleNotFoundError:                      # Python < 3.11
    import tomli as tomllib

from . import containment, federated, forecast, gnn, logfeat, logsynth, scoring, topology
from .epidemic import (
    SCENARIOS,
    EpidemicParams,
    run,
    export_trajectory,
    trajectory_summary_csv,
)
from .rng import derive_seed

_SCHEMA = {
    "seed": int,
    "topology": {
        "n": int, "model": str, "p": float, "m": int, "k": int,
        "p_in": float, "p_out": float,
        "hyperedges": {"count": int, "size_min": int, "size_max": int},
    },
    "epidemic": {"preset": str, "beta": float, "delitescence": int, "gamma": float,
                 "horizon": int, "seeds": list},
    "logs": {"rate": int, "mix": float},
    "embedding": {"dim": int, "window": int, "negatives": int, "lr": float,
                  "epochs": int, "min_count": int, "feature_window": int},
    "detector": {"alpha": float, "lr": float, "epochs": int, "hidden": int, "latent": int},
    "scores": {"w_e": float, "w_i": float, "w_a": float, "n_rollouts": int},
    "forecast": {"order": int, "ridge": float, "k": int},
    "plan": {"lam": float, "mu": float, "budget": int, "horizon": int,
             "n_rollouts": int, "protected": list, "mode": str, "at_step": int},
    "federation": {"clients": int, "rounds": int, "local_epochs": int, "clip": float,
                   "noise": float, "clients_per_round": int, "delta_target": float,
                   "epsilon_stop": float, "vertices": int},
    "audit": {"noise": float, "clip": float, "trials": int, "bins": int, "delta": float},
    "service": {"host": str, "port": int, "snapshot_dir": str},
}

_DEFAULTS = {
    "seed": 0,
    "topology": {"n": 30, "model": "subnet-blocks", "p": 0.1, "m": 1, "k": 3,
                 "p_in": 0.4, "p_out": 0.02,
                 "hyperedges": {"count": 2, "size_min": 2, "size_max": 4}},
    "epidemic": {"preset": "ddos", "seeds": [0]},
    "logs": {"rate": 2, "mix": 0.7},
    "embedding": {"dim": 16, "window": 2, "negatives": 5, "lr": 0.05, "epochs": 3,
                  "min_count": 1, "feature_window": 128},
    "detector": {"alpha": 0.5, "lr": 5e-4, "epochs": 200, "hidden": 16, "latent": 8},
    "scores": {"w_e": 0.4, "w_i": 0.4, "w_a": 0.2, "n_rollouts": 100},
    "forecast": {"order": 2, "ridge": 1e-6, "k": 3},
    "plan": {"lam": 1.0, "mu": 0.1, "budget": 2, "horizon": 10, "n_rollouts": 20,
             "protected": [], "mode": "greedy", "at_step": 3},
    "federation": {"clients": 3, "rounds": 5, "local_epochs": 1, "noise": 1.0,
                   "delta_target": 1e-5, "vertices": 12},
    "audit": {"noise": 2.0, "clip": 1.0, "trials": 10000, "bins": 40, "delta": 1e-5},
    "service": {"host": "127.0.0.1", "port": 8080},
}


class CliError(Exception):
    pass


def _validate(user: dict, schema: dict, prefix: str = "") -> None:
    for key, value in user.items():
        if key not in schema:
            raise CliError(f"unknown config key '{prefix}{key}'")
        want = schema[key]
        if isinstance(want, dict):
            if not isinstance(value, dict):
                raise CliError(f"config key '{prefix}{key}' must be a section")
            _validate(value, want, prefix=f"{prefix}{key}.")
        elif want is list:
            if not isinstance(value, list):
                raise CliError(f"config key '{prefix}{key}' must be a list")
        elif want is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise CliError(f"config key '{prefix}{key}' must be a number")
        elif want is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise CliError(f"config key '{prefix}{key}' must be an integer")
        elif want is str and not isinstance(value, str):
            raise CliError(f"config key '{prefix}{key}' must be a string")


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None) -> dict:
    user: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except FileNotFoundError:
            raise CliError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise CliError(f"malformed config {path}: {exc}") from None
    _validate(user, _SCHEMA)
    return _merge(_DEFAULTS, user)


# -- resolved-config TOML emitter ---------------------------------------------

def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)} to TOML")


def _emit_toml(cfg: dict, path: str) -> None:
    lines = []
    sections = []
    for key in sorted(cfg):
        if isinstance(cfg[key], dict):
            sections.append(key)
        elif cfg[key] is not None:
            lines.append(f"{key} = {_toml_scalar(cfg[key])}")

    def emit_section(name: str, body: dict) -> None:
        scalars = {k: v for k, v in body.items() if not isinstance(v, dict)}
        if scalars or not body:
            lines.append(f"\n[{name}]")
            for k in sorted(scalars):
                if scalars[k] is not None:
                    lines.append(f"{k} = {_toml_scalar(scalars[k])}")
        for k in sorted(body):
            if isinstance(body[k], dict):
                emit_section(f"{name}.{k}", body[k])

    for name in sections:
        emit_section(name, cfg[name])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines).lstrip("\n") + "\n")


class ArtifactSink:
    """Registers artifact paths so a failed run can clean up after itself."""

    def __init__(self, outdir: str):
        self.outdir = outdir
        self.created: list[str] = []
        os.makedirs(outdir, exist_ok=True)

    def path(self, name: str) -> str:
        p = os.path.join(self.outdir, name)
        self.created.append(p)
        return p

    def discard_all(self) -> None:
        for p in self.created:
            try:
                os.remove(p)
            except FileNotFoundError:
                pass


# -- shared pipeline stages -----------------------------------------------------

def _graph(cfg: dict, seed: int) -> topology.CloudGraph:
    t = cfg["topology"]
    spec = topology.TopologySpec(
        n=t["n"], model=t["model"], p=t["p"], m=t["m"], k=t["k"],
        p_in=t["p_in"], p_out=t["p_out"],
        hyperedges=topology.HyperedgeSpec(**t["hyperedges"]))
    return topology.generate_topology(spec, derive_seed(seed, "topology"))


def _params_and_preset(cfg: dict):
    e = cfg["epidemic"]
    preset = SCENARIOS.get(e["preset"])
    if preset is None:
        raise CliError(f"unknown preset {e['preset']!r}; expected one of {sorted(SCENARIOS)}")
    params = preset.apply(EpidemicParams())
    params = replace(params,
                     beta=float(e.get("beta", params.beta)),
                     delitescence=int(e.get("delitescence", params.delitescence)),
                     gamma=float(e.get("gamma", params.gamma)),
                     horizon=int(e.get("horizon", params.horizon)))
    return params, preset


def _trajectory(cfg, seed, g):
    params, _ = _params_and_preset(cfg)
    seeds = [int(v) for v in cfg["epidemic"]["seeds"]]
    return run(g, params, seeds, derive_seed(seed, "epidemic"))


def _corpus(cfg, seed, g, traj):
    _, preset = _params_and_preset(cfg)
    return logsynth.generate_logs(g, traj, preset, rate=cfg["logs"]["rate"],
                                  mix=cfg["logs"]["mix"], seed=derive_seed(seed, "logs"))


def _table(cfg, seed, corpus):
    emb = cfg["embedding"]
    return logfeat.train_embeddings(corpus, logfeat.SkipGramConfig(
        dim=emb["dim"], window=emb["window"], negatives=emb["negatives"],
        lr=emb["lr"], epochs=emb["epochs"], min_count=emb["min_count"],
        seed=derive_seed(seed, "embedding")))


def _features(cfg, corpus, table):
    return logfeat.featurize_all(corpus, table, window=cfg["embedding"]["feature_window"])


def _detector(cfg, seed, g, feats):
    det = cfg["detector"]
    config = gnn.TrainConfig(alpha=det["alpha"], lr=det["lr"], epochs=det["epochs"],
                             hidden=det["hidden"], latent=det["latent"],
                             seed=derive_seed(seed, "detector"))
    params, losses = gnn.train(g, feats, config)
    return config, params, losses


# -- subcommands ------------------------------------------------------------------

def cmd_generate(cfg, seed, sink):
    g = _graph(cfg, seed)
    topology.save_graph(g, sink.path("graph.json"))


def cmd_simulate(cfg, seed, sink):
    g = _graph(cfg, seed)
    topology.save_graph(g, sink.path("graph.json"))
    traj = _trajectory(cfg, seed, g)
    export_trajectory(traj, sink.path("trajectory.jsonl"))
    trajectory_summary_csv(traj, sink.path("trajectory.csv"))


def cmd_logs(cfg, seed, sink):
    g = _graph(cfg, seed)
    traj = _trajectory(cfg, seed, g)
    corpus = _corpus(cfg, seed, g, traj)
    logsynth.export_logs(corpus, sink.path("logs.txt"))


def cmd_embed(cfg, seed, sink):
    g = _graph(cfg, seed)
    traj = _trajectory(cfg, seed, g)
    corpus = _corpus(cfg, seed, g, traj)
    table = _table(cfg, seed, corpus)
    logfeat.save_table(table, sink.path("embeddings.txt"))


def cmd_train(cfg, seed, sink):
    g = _graph(cfg, seed)
    traj = _trajectory(cfg, seed, g)
    corpus = _corpus(cfg, seed, g, traj)
    table = _table(cfg, seed, corpus)
    feats = _features(cfg, corpus, table)
    _, params, losses = _detector(cfg, seed, g, feats)
    gnn.save_params(params, sink.path("model.params"))
    with open(sink.path("losses.csv"), "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, value in enumerate(losses):
            fh.write(f"{i},{value!r}\n")


def cmd_detect(cfg, seed, sink):
    g = _graph(cfg, seed)
    traj = _trajectory(cfg, seed, g)
    corpus = _corpus(cfg, seed, g, traj)
    table = _table(cfg, seed, corpus)
    feats = _features(cfg, corpus, table)
    config, params, _ = _detector(cfg, seed, g, feats)
    raw = gnn.score_graph(g, feats, params, config.alpha)
    gnn.export_heatmap(raw, sink.path("heatmap.csv"))
    sc = cfg["scores"]
    epi_params, _ = _params_and_preset(cfg)
    anomaly = gnn.normalize_scores(raw)
    vertex_scores = scoring.score_vertices(
        g, anomaly, epi_params, n_rollouts=sc["n_rollouts"],
        seed=derive_seed(seed, "scores"),
        weights=scoring.ScoreWeights(sc["w_e"], sc["w_i"], sc["w_a"]))
    scoring.export_scores(vertex_scores, anomaly, sink.path("scores.csv"))


def cmd_forecast(cfg, seed, sink):
    g = _graph(cfg, seed)
    traj = _trajectory(cfg, seed, g)
    corpus = _corpus(cfg, seed, g, traj)
    table = _table(cfg, seed, corpus)
    feats = _features(cfg, corpus, table)
    config, params, _ = _detector(cfg, seed, g, feats)
    fc = cfg["forecast"]
    steps = [st.t for st in traj.states]
    history = forecast.embedding_trajectory(g, corpus, table, params, steps,
                                            window=cfg["embedding"]["feature_window"])
    if len(history) < fc["order"] + 1:
        raise CliError(f"trajectory too short ({len(history)} steps) for "
                       f"order-{fc['order']} forecasting")
    model = forecast.fit_forecaster([history], p=fc["order"], ridge=fc["ridge"])
    infected = traj.ever_infected()
    labels = [1.0 if v in infected else 0.0 for v in range(g.n)]
    head = gnn.fit_supervised(history[-1], labels, "infected-indicator")
    colors = forecast.color_forecast(model, history, head, fc["k"])
    forecast.export_forecast(colors, steps[-1] + 1, sink.path("forecast.csv"))


def cmd_plan(cfg, seed, sink):
    g = _graph(cfg, seed)
    traj = _trajectory(cfg, seed, g)
    pl = cfg["plan"]
    state = traj.states[min(pl["at_step"], len(traj.states) - 1)]
    epi_params, _ = _params_and_preset(cfg)
    obj = containment.ObjectiveConfig(
        params=epi_params, lam=pl["lam"], mu=pl["mu"],
        protected=frozenset(int(v) for v in pl["protected"]),
        budget=pl["budget"], horizon=pl["horizon"], n_rollouts=pl["n_rollouts"])
    plan_seed = derive_seed(seed, "plan")
    if pl["mode"] == "greedy":
        plan = containment.greedy_plan(g, state, obj, seed=plan_seed)
    elif pl["mode"] == "exhaustive":
        plan = containment.exhaustive_plan(g, state, obj, seed=plan_seed)
    else:
        raise CliError(f"unknown plan mode {pl['mode']!r}; expected greedy or exhaustive")
    j, report = containment.evaluate_plan(g, state, plan, obj, plan_seed)
    containment.save_plan(plan, sink.path("plan.txt"))
    containment.export_report(j, report, sink.path("plan_report.csv"))


def cmd_federate(cfg, seed, sink):
    fed = cfg["federation"]
    fed_seed = derive_seed(seed, "federation")
    clients = federated.make_synthetic_clients(fed["clients"], fed["vertices"], fed_seed)
    # noisy aggregation needs a finite sensitivity bound
    default_clip = 1.0 if fed["noise"] > 0 else math.inf
    fed_cfg = federated.FederationConfig(
        rounds=fed["rounds"],
        clients_per_round=fed.get("clients_per_round"),
        clip=float(fed.get("clip", default_clip)),
        noise=fed["noise"],
        local_epochs=fed["local_epochs"],
        delta_target=fed["delta_target"],
        epsilon_stop=fed.get("epsilon_stop"),
        seed=fed_seed)
    result = federated.run_federation(clients, fed_cfg)
    federated.export_round_log(result.rounds, sink.path("round_log.csv"))
    gnn.save_params(result.params, sink.path("fed_model.params"))


def cmd_audit_dp(cfg, seed, sink):
    aud = cfg["audit"]
    if aud["clip"] <= 0:
        raise CliError("audit.clip must be > 0")
    audit_seed = derive_seed(seed, "audit")
    client = federated.make_synthetic_clients(1, 10, audit_seed)[0]
    init = gnn.init_params(client.feats.shape[1], client.config.hidden,
                           client.config.latent, client.config.seed)
    update = federated.local_update(
        client, federated.flatten_params(init),
        (client.feats.shape[1], client.config.hidden, client.config.latent))
    ledger = federated.PrivacyLedger(delta_target=aud["delta"])
    rho, eps = federated.account_privacy(ledger, aud["noise"])
    mech_with, mech_without = federated.adjacent_sum_mechanisms(
        update.delta(), aud["noise"], aud["clip"], coord=0, seed=audit_seed)
    result = federated.empirical_dp_audit(mech_with, mech_without, eps, aud["delta"],
                                          n_trials=aud["trials"], bins=aud["bins"])
    with open(sink.path("audit.csv"), "w", encoding="utf-8") as fh:
        fh.write("noise,clip,epsilon,delta,trials,bins,passed,worst_gap\n")
        fh.write(f"{aud['noise']!r},{aud['clip']!r},{eps!r},{aud['delta']!r},"
                 f"{result.n_trials},{result.bins},{result.passed},{result.worst_gap!r}\n")


def cmd_serve(cfg, seed, sink, host=None, port=None):
    from .service import DefenseService

    svc = cfg["service"]
    server = DefenseService(host=host or svc["host"],
                            port=svc["port"] if port is None else port,
                            snapshot_dir=svc.get("snapshot_dir"))
    bound = server.address
    print(f"serving on http://{bound[0]}:{bound[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


_COMMANDS = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "logs": cmd_logs,
    "embed": cmd_embed,
    "train": cmd_train,
    "detect": cmd_detect,
    "forecast": cmd_forecast,
    "plan": cmd_plan,
    "federate": cmd_federate,
    "audit-dp": cmd_audit_dp,
    "serve": cmd_serve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cloudward",
        description="Epidemic simulation, anomaly detection, containment planning "
                    "and federated training for cloud topologies.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="global seed override")
        p.add_argument("--out", default="out", help="artifact directory")
        if name == "serve":
            p.add_argument("--host", default=None)
            p.add_argument("--port", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg["seed"])
        cfg["seed"] = seed

        if args.command == "serve":
            cmd_serve(cfg, seed, None, host=args.host, port=args.port)
            return 0

        sink = ArtifactSink(args.out)
        started = time.time()
        try:
            _emit_toml(cfg, sink.path("resolved_config.toml"))
            _COMMANDS[args.command](cfg, seed, sink)
        except Exception:
            sink.discard_all()
            raise
        meta = {"command": args.command, "seed": seed,
                "started_at": started, "finished_at": time.time()}
        with open(os.path.join(args.out, "run_meta.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, sort_keys=True)
            fh.write("\n")
        for p in sink.created:
            print(f"wrote {p}")
        return 0
    except (CliError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
