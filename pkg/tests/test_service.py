import http.client
import json
import time

import pytest

from cloudward.service import DefenseService

RING6 = {"n": 6, "edges": [[0, 1], [1, 2], [2, 3], [3, 4], [4, 5], [0, 5]]}


@pytest.fixture(scope="module")
def svc():
    service = DefenseService(port=0).start()
    yield service
    service.stop()


def call(svc, method, path, body=None, raw=None):
    host, port = svc.address
    conn = http.client.HTTPConnection(host, port, timeout=60)
    data = raw if raw is not None else (
        json.dumps(body).encode() if body is not None else None)
    conn.request(method, path, body=data,
                 headers={"Content-Type": "application/json"} if data else {})
    resp = conn.getresponse()
    payload = json.loads(resp.read().decode())
    conn.close()
    return resp.status, payload


def make_scenario(svc, **extra):
    body = {"graph": RING6, "preset": "ddos", "seed": 5, "seeds": [0],
            "params": {"horizon": 6}}
    body.update(extra)
    status, payload = call(svc, "POST", "/scenarios", body)
    assert status == 201, payload
    return payload


def read_events(svc, sid, since, count):
    host, port = svc.address
    conn = http.client.HTTPConnection(host, port, timeout=20)
    conn.request("GET", f"/scenarios/{sid}/events?since={since}")
    resp = conn.getresponse()
    assert resp.status == 200
    assert resp.getheader("Content-Type") == "application/x-ndjson"
    records = [json.loads(resp.fp.readline()) for _ in range(count)]
    conn.close()
    return records


def test_health(svc):
    status, payload = call(svc, "GET", "/health")
    assert status == 200
    assert payload["status"] == "ok"
    assert payload["schema_version"] == 1


def test_create_scenario_payload(svc):
    payload = make_scenario(svc)
    assert payload["scenario_id"].startswith("s")
    assert payload["t"] == 0
    assert payload["seq"] == 1
    assert payload["counts"]["S"] == 5 and payload["counts"]["I"] == 1
    assert len(payload["compartments"]) == 6
    assert payload["quarantined"] == [] and payload["severed"] == []
    assert payload["finished"] is False and payload["active"] is True
    assert payload["horizon"] == 6
    assert sorted(map(tuple, payload["edges"])) == sorted(
        tuple(sorted(e)) for e in RING6["edges"])


def test_create_rejects_bad_bodies(svc):
    status, p = call(svc, "POST", "/scenarios", {"preset": "ddos"})
    assert status == 400 and "exactly one of" in p["error"]
    status, p = call(svc, "POST", "/scenarios",
                     {"graph": RING6, "topology": {"n": 4}})
    assert status == 400 and "exactly one of" in p["error"]
    status, p = call(svc, "POST", "/scenarios", {"graph": RING6, "preset": "nope"})
    assert status == 400 and "unknown preset" in p["error"]
    status, p = call(svc, "POST", "/scenarios",
                     {"graph": RING6, "params": {"spread": 2}})
    assert status == 400 and "unknown params keys" in p["error"]
    status, p = call(svc, "POST", "/scenarios",
                     {"topology": {"n": 8, "flavor": "x"}})
    assert status == 400 and "unknown topology keys" in p["error"]
    status, p = call(svc, "POST", "/scenarios",
                     {"topology": {"n": 1, "model": "uniform-random"}})
    assert status == 400 and "n must be >= 2" in p["error"]


def test_create_from_topology_spec(svc):
    body = {"topology": {"n": 8, "model": "subnet-blocks", "k": 2,
                         "p_in": 0.9, "p_out": 0.2,
                         "hyperedges": {"count": 1, "size_min": 2, "size_max": 3}},
            "preset": "mitm", "seed": 9, "params": {"horizon": 5}}
    status, payload = call(svc, "POST", "/scenarios", body)
    assert status == 201
    assert len(payload["compartments"]) == 8
    assert payload["preset"] == "mitm"
    #k=2 block hyperedges plus the one requested shared-library group
    assert sorted(payload["hyperedges"]) == ["library_0", "subnet_0", "subnet_1"]


def test_state_payload_shape(svc):
    sid = make_scenario(svc)["scenario_id"]
    status, st = call(svc, "GET", f"/scenarios/{sid}/state")
    assert status == 200
    assert st["n"] == 6
    assert st["compartment_names"] == ["S", "D", "I", "R"]
    assert len(st["anomaly"]) == 6
    assert st["heatmap"] == st["anomaly"]
    assert all(0.0 <= x <= 1.0 for x in st["anomaly"])
    for channel in ("risk", "exploitability", "impact"):
        vals = st["scores"][channel]
        assert len(vals) == 6
        assert all(0.0 <= x <= 1.0 for x in vals)
        assert 0.0 <= st["cloud"][channel] <= 1.0
    # cached payload is stable while nothing mutates
    assert call(svc, "GET", f"/scenarios/{sid}/state")[1] == st


def test_steps_advance_and_finish(svc):
    sid = make_scenario(svc, params={"horizon": 3})["scenario_id"]
    status, p = call(svc, "POST", f"/scenarios/{sid}/steps", {"n": 2})
    assert status == 200
    assert p["steps_applied"] == 2 and p["t"] == 2
    status, p = call(svc, "POST", f"/scenarios/{sid}/steps", {"n": 5})
    assert status == 200
    assert p["steps_applied"] == 1 and p["t"] == 3 and p["finished"] is True
    status, p = call(svc, "POST", f"/scenarios/{sid}/steps", {"n": 1})
    assert status == 409
    assert "reached horizon" in p["error"]
    status, p = call(svc, "POST", f"/scenarios/{sid}/steps", {"n": 0})
    assert status == 400 and "n must be >= 1" in p["error"]


def test_actions_endpoint(svc):
    sid = make_scenario(svc, protected=[3])["scenario_id"]
    acts = [{"kind": "quarantine", "vertex": 1, "duration": 4},
            {"kind": "sever", "edge": [2, 3]}]
    status, p = call(svc, "POST", f"/scenarios/{sid}/actions", {"actions": acts})
    assert status == 200
    assert p["quarantined"] == [1]
    assert p["severed"] == [[2, 3]]
    assert [a["kind"] for a in p["actions"]] == ["quarantine", "sever"]

    status, p = call(svc, "POST", f"/scenarios/{sid}/actions",
                     {"actions": [{"kind": "quarantine", "vertex": 3, "duration": 2}]})
    assert status == 400 and "protected" in p["error"]
    status, p = call(svc, "POST", f"/scenarios/{sid}/actions",
                     {"actions": [{"kind": "scrub", "vertex": 0}]})
    assert status == 400 and "unknown action kind" in p["error"]
    status, p = call(svc, "POST", f"/scenarios/{sid}/actions", {"actions": []})
    assert status == 400 and "nonempty" in p["error"]
    status, p = call(svc, "POST", f"/scenarios/{sid}/actions",
                     raw=b"{not json")
    assert status == 400 and "malformed JSON" in p["error"]


def test_forecast_needs_history_then_projects(svc):
    sid = make_scenario(svc)["scenario_id"]
    status, p = call(svc, "GET", f"/scenarios/{sid}/forecast?k=2")
    assert status == 400 and "needs at least 3" in p["error"]
    call(svc, "POST", f"/scenarios/{sid}/steps", {"n": 2})
    status, p = call(svc, "GET", f"/scenarios/{sid}/forecast?k=2")
    assert status == 200
    assert p["k"] == 2 and len(p["frames"]) == 2
    assert [f["t"] for f in p["frames"]] == [3, 4]
    for frame in p["frames"]:
        assert len(frame["scores"]) == 6
        assert all(0.0 <= s <= 1.0 for s in frame["scores"])
    status, p = call(svc, "GET", f"/scenarios/{sid}/forecast?k=0")
    assert status == 400 and "k must be >= 1" in p["error"]


def test_plan_endpoint(svc):
    sid = make_scenario(svc)["scenario_id"]
    status, p = call(svc, "POST", f"/scenarios/{sid}/plan",
                     {"budget": 1, "horizon": 4, "n_rollouts": 4})
    assert status == 200
    assert p["objective"] <= p["baseline_objective"]
    assert len(p["plan"]) <= 1
    assert set(p["report"]) == {"time_to_implement", "business_impact",
                                "containment_prob"}


def test_event_stream_order_and_replay(svc):
    sid = make_scenario(svc)["scenario_id"]
    call(svc, "POST", f"/scenarios/{sid}/steps", {"n": 2})
    call(svc, "POST", f"/scenarios/{sid}/actions",
         {"actions": [{"kind": "quarantine", "vertex": 2, "duration": 2}]})
    records = read_events(svc, sid, since=0, count=4)
    assert [r["seq"] for r in records] == [1, 2, 3, 4]
    assert [r["kind"] for r in records] == ["created", "step", "step", "action"]
    assert all(r["scenario_id"] == sid for r in records)
    assert all(r["schema_version"] == 1 for r in records)
    assert records[1]["t"] == 1 and records[2]["t"] == 2
    assert "transmissions" in records[1]
    assert records[3]["quarantined"] == [2]

    tail = read_events(svc, sid, since=2, count=2)
    assert [r["seq"] for r in tail] == [3, 4]


def test_event_stream_follows_live(svc):
    sid = make_scenario(svc)["scenario_id"]
    host, port = svc.address
    conn = http.client.HTTPConnection(host, port, timeout=20)
    conn.request("GET", f"/scenarios/{sid}/events")
    resp = conn.getresponse()
    first = json.loads(resp.fp.readline())
    assert first["kind"] == "created"
    call(svc, "POST", f"/scenarios/{sid}/steps", {"n": 1})
    live = json.loads(resp.fp.readline())
    assert live["kind"] == "step" and live["seq"] == 2
    conn.close()


def test_federation_job_lifecycle(svc):
    body = {"clients": 2, "rounds": 2, "noise": 1.0, "vertices": 6, "seed": 1}
    status, p = call(svc, "POST", "/federation/jobs", body)
    assert status == 201
    jid = p["job_id"]
    assert p["status"] in ("running", "done")

    deadline = time.time() + 60
    while time.time() < deadline:
        status, p = call(svc, "GET", f"/federation/jobs/{jid}")
        assert status == 200
        if p["status"] != "running":
            break
        time.sleep(0.1)
    assert p["status"] == "done", p.get("error")
    assert len(p["rounds"]) == 2
    assert p["epsilon"] == pytest.approx(7.786140424415112)
    assert p["rounds"][0]["epsilon"] == pytest.approx(5.298525912188081)

    status, listing = call(svc, "GET", "/federation/jobs")
    assert status == 200
    assert jid in [j["job_id"] for j in listing["jobs"]]

    status, p = call(svc, "POST", "/federation/jobs", {"clients": 0})
    assert status == 400 and "clients must be >= 1" in p["error"]
    status, p = call(svc, "GET", "/federation/jobs/j999")
    assert status == 404 and "unknown federation job" in p["error"]


def test_error_codes(svc):
    status, p = call(svc, "GET", "/scenarios/s999/state")
    assert status == 404 and "unknown scenario" in p["error"]
    status, p = call(svc, "GET", "/nope")
    assert status == 404 and "no route" in p["error"]
    status, p = call(svc, "POST", "/health")
    assert status == 405
    sid = make_scenario(svc)["scenario_id"]
    status, p = call(svc, "GET", f"/scenarios/{sid}/steps")
    assert status == 405 and "not allowed" in p["error"]


def test_scenario_listing(svc):
    sid = make_scenario(svc)["scenario_id"]
    status, p = call(svc, "GET", "/scenarios")
    assert status == 200
    entry = next(s for s in p["scenarios"] if s["scenario_id"] == sid)
    assert entry["n"] == 6 and entry["t"] == 0 and entry["finished"] is False
