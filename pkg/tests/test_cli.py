import http.client
import json
import subprocess
import sys
from dataclasses import replace

import pytest

import oracles
from cloudward import containment, gnn, logfeat, topology
from cloudward.cli import load_config, main
from cloudward.epidemic import SCENARIOS, EpidemicParams, run
from cloudward.rng import derive_seed

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

FAST_CONFIG = """\
seed = 3

[topology]
n = 10
model = "subnet-blocks"
k = 2
p_in = 0.7
p_out = 0.1

[topology.hyperedges]
count = 1

[epidemic]
preset = "ddos"
horizon = 6
seeds = [0]

[embedding]
dim = 6
epochs = 1

[detector]
epochs = 30
hidden = 8
latent = 4

[scores]
n_rollouts = 10

[plan]
budget = 1
horizon = 4
n_rollouts = 4
at_step = 2

[federation]
clients = 2
rounds = 2
vertices = 6

[audit]
trials = 400
bins = 10
"""


@pytest.fixture
def cfg_path(tmp_path):
    path = tmp_path / "config.toml"
    path.write_text(FAST_CONFIG)
    return str(path)


def run_cmd(cmd, cfg_path, out, extras=()):
    return main([cmd, "--config", cfg_path, "--out", str(out), *extras])


def dir_files(path):
    return {p.name: p.read_bytes() for p in path.iterdir() if p.is_file()}


def test_generate_writes_graph_and_resolved_config(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert run_cmd("generate", cfg_path, out) == 0
    names = set(dir_files(out))
    assert names == {"graph.json", "resolved_config.toml", "run_meta.json"}
    g = topology.load_graph(out / "graph.json")
    assert g.n == 10
    resolved = tomllib.loads((out / "resolved_config.toml").read_text())
    assert resolved["seed"] == 3
    assert resolved["detector"]["epochs"] == 30
    assert resolved["logs"]["rate"] == 2          # default carried through
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["command"] == "generate" and meta["seed"] == 3
    assert set(meta) == {"command", "seed", "started_at", "finished_at"}


def test_simulate_artifacts(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert run_cmd("simulate", cfg_path, out) == 0
    rows = [json.loads(line) for line in (out / "trajectory.jsonl").read_text().splitlines()]
    assert rows[0]["t"] == 0
    assert [r["t"] for r in rows] == list(range(len(rows)))
    csv_lines = (out / "trajectory.csv").read_text().splitlines()
    assert csv_lines[0] == "t,nS,nD,nI,nR"
    assert len(csv_lines) == len(rows) + 1


def test_logs_embed_train_artifacts(cfg_path, tmp_path):
    out = tmp_path / "logs"
    assert run_cmd("logs", cfg_path, out) == 0
    assert (out / "logs.txt").read_text().strip()

    out = tmp_path / "embed"
    assert run_cmd("embed", cfg_path, out) == 0
    table = logfeat.load_table(out / "embeddings.txt")
    assert table.dim == 6

    out = tmp_path / "train"
    assert run_cmd("train", cfg_path, out) == 0
    params = gnn.load_params(out / "model.params")
    assert params.dims == (6, 8, 4)
    loss_lines = (out / "losses.csv").read_text().splitlines()
    assert loss_lines[0] == "epoch,loss"
    assert len(loss_lines) == 32          # initial loss plus one per epoch


def test_detect_is_byte_deterministic(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cmd("detect", cfg_path, a) == 0
    assert run_cmd("detect", cfg_path, b) == 0
    files_a, files_b = dir_files(a), dir_files(b)
    assert set(files_a) == {"resolved_config.toml", "heatmap.csv", "scores.csv",
                            "run_meta.json"}
    for name in files_a:
        if name == "run_meta.json":
            continue                      # timestamps live here by design
        assert files_a[name] == files_b[name], name
    header = files_a["scores.csv"].decode().splitlines()[0]
    assert header == "vertex_id,risk,exploitability,impact,anomaly"
    assert files_a["heatmap.csv"].decode().splitlines()[0] == "vertex_id,score"


def test_seed_override_changes_outputs(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cmd("detect", cfg_path, a) == 0
    assert run_cmd("detect", cfg_path, b, extras=("--seed", "99")) == 0
    assert dir_files(a)["scores.csv"] != dir_files(b)["scores.csv"]
    meta = json.loads((b / "run_meta.json").read_text())
    assert meta["seed"] == 99


def test_unknown_config_key_fails_before_artifacts(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[topology]\nbogus = 1\n")
    out = tmp_path / "out"
    assert main(["generate", "--config", str(bad), "--out", str(out)]) == 1
    assert "error: unknown config key 'topology.bogus'" in capsys.readouterr().err
    assert not out.exists()


def test_failed_run_discards_partial_artifacts(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[epidemic]\npreset = "zzz"\n')
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(bad), "--out", str(out)]) == 1
    assert "unknown preset" in capsys.readouterr().err
    assert out.exists() and list(out.iterdir()) == []


def test_config_file_errors(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["generate", "--config", str(tmp_path / "none.toml"),
                 "--out", str(out)]) == 1
    assert "config file not found" in capsys.readouterr().err
    broken = tmp_path / "broken.toml"
    broken.write_text("seed = [unclosed\n")
    assert main(["generate", "--config", str(broken), "--out", str(out)]) == 1
    assert "malformed config" in capsys.readouterr().err


def test_config_type_validation(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('[detector]\nepochs = "many"\n')
    with pytest.raises(Exception, match="must be an integer"):
        load_config(str(path))


def test_forecast_artifact(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert run_cmd("forecast", cfg_path, out) == 0
    lines = (out / "forecast.csv").read_text().splitlines()
    assert lines[0] == "t,vertex_id,predicted_score"
    assert len(lines) == 1 + 3 * 10       # k=3 frames, 10 vertices
    first_t = int(lines[1].split(",")[0])
    assert all(0.0 <= float(line.split(",")[2]) <= 1.0 for line in lines[1:])
    assert first_t >= 1


def test_exhaustive_plan_matches_enumeration_oracle(tmp_path):
    cfg_text = (FAST_CONFIG
                .replace("n = 10", "n = 6")
                .replace("budget = 1", "budget = 2")
                .replace("at_step = 2", 'at_step = 2\nmode = "exhaustive"'))
    path = tmp_path / "c.toml"
    path.write_text(cfg_text)
    out = tmp_path / "out"
    assert main(["plan", "--config", str(path), "--out", str(out)]) == 0
    got = containment.load_plan(out / "plan.txt")

    # rebuild the exact instance the command planned over
    cfg = load_config(str(path))
    seed = cfg["seed"]
    t = cfg["topology"]
    g = topology.generate_topology(
        topology.TopologySpec(n=t["n"], model=t["model"], p=t["p"], m=t["m"], k=t["k"],
                              p_in=t["p_in"], p_out=t["p_out"],
                              hyperedges=topology.HyperedgeSpec(**t["hyperedges"])),
        derive_seed(seed, "topology"))
    params = replace(SCENARIOS["ddos"].apply(EpidemicParams()), horizon=6)
    traj = run(g, params, [0], derive_seed(seed, "epidemic"))
    state = traj.states[min(2, len(traj.states) - 1)]
    pl = cfg["plan"]
    obj = containment.ObjectiveConfig(params=params, lam=pl["lam"], mu=pl["mu"],
                                      budget=pl["budget"], horizon=pl["horizon"],
                                      n_rollouts=pl["n_rollouts"])
    cands = containment.default_candidates(g, state, obj)
    want, want_j = oracles.best_plan_by_enumeration(
        g, state, obj, cands, containment.evaluate_plan, derive_seed(seed, "plan"))
    assert got == want
    report_line = (out / "plan_report.csv").read_text().splitlines()[1]
    assert float(report_line.split(",")[0]) == want_j


def test_federate_deterministic_and_accounted(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cmd("federate", cfg_path, a) == 0
    assert run_cmd("federate", cfg_path, b) == 0
    files_a, files_b = dir_files(a), dir_files(b)
    assert files_a["round_log.csv"] == files_b["round_log.csv"]
    assert files_a["fed_model.params"] == files_b["fed_model.params"]
    lines = files_a["round_log.csv"].decode().splitlines()
    assert lines[0] == "round,m,epsilon,rho,mean_update_norm,loss_global"
    assert len(lines) == 3
    assert float(lines[1].split(",")[2]) == pytest.approx(5.298525912188081)
    assert float(lines[2].split(",")[2]) == pytest.approx(7.786140424415112)


def test_audit_dp_artifact(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert run_cmd("audit-dp", cfg_path, out) == 0
    lines = (out / "audit.csv").read_text().splitlines()
    assert lines[0] == "noise,clip,epsilon,delta,trials,bins,passed,worst_gap"
    cells = lines[1].split(",")
    assert float(cells[0]) == 2.0 and float(cells[1]) == 1.0
    assert cells[6] == "True"
    assert float(cells[7]) <= 0.0


def test_serve_announces_address(cfg_path):
    proc = subprocess.Popen(
        [sys.executable, "-m", "cloudward.cli", "serve", "--config", cfg_path,
         "--port", "0"],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    try:
        line = proc.stdout.readline().strip()
        assert line.startswith("serving on http://127.0.0.1:")
        port = int(line.rsplit(":", 1)[1])
        conn = http.client.HTTPConnection("127.0.0.1", port, timeout=10)
        conn.request("GET", "/health")
        resp = conn.getresponse()
        assert resp.status == 200
        assert json.loads(resp.read())["status"] == "ok"
        conn.close()
    finally:
        proc.terminate()
        proc.wait(timeout=10)
