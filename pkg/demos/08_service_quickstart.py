"""
Driving the HTTP service
========================

Start the defense service in-process, walk a scenario through its paces
over plain REST calls, and tail the ordered event stream a console would
subscribe to.
"""

import json
from http.client import HTTPConnection

from cloudward.service import DefenseService

svc = DefenseService(port=0).start()
host, port = svc.address
print(f"service listening on {host}:{port}")


def call(method, path, body=None):
    conn = HTTPConnection(host, port, timeout=10)
    payload = None if body is None else json.dumps(body)
    conn.request(method, path, body=payload,
                 headers={"Content-Type": "application/json"})
    resp = conn.getresponse()
    out = json.loads(resp.read())
    conn.close()
    return resp.status, out


try:
    status, scenario = call("POST", "/scenarios", {
        "topology": {"n": 20, "model": "preferential", "m": 2},
        "preset": "mitm",
        "seed": 11,
        "seeds": [0],
        "params": {"horizon": 12},
    })
    sid = scenario["scenario_id"]
    print(f"created scenario {sid}: {scenario['counts']}")

    status, out = call("POST", f"/scenarios/{sid}/steps", {"n": 4})
    print(f"advanced to t={out['t']}, counts {out['counts']}")

    status, out = call("POST", f"/scenarios/{sid}/actions", {
        "actions": [{"kind": "quarantine", "vertex": 0, "duration": 6}]})
    print(f"applied quarantine, quarantined={out['quarantined']}")

    status, state = call("GET", f"/scenarios/{sid}/state")
    hot = [v for v, c in enumerate(state["compartments"]) if c in (1, 2)]
    print(f"state at t={state['t']}: infected {hot}, "
          f"anomaly heatmap head {state['heatmap'][:4]}")

    # The event stream replays every mutation in sequence order -- this is
    # what keeps an operator console consistent after a reconnect.
    conn = HTTPConnection(host, port, timeout=10)
    conn.request("GET", f"/scenarios/{sid}/events?since=0")
    resp = conn.getresponse()
    print("\nevent log so far:")
    for _ in range(6):
        event = json.loads(resp.fp.readline())
        extra = ""
        if event["kind"] == "step":
            extra = f" t={event['t']} transmissions={len(event['transmissions'])}"
        print(f"  seq {event['seq']}: {event['kind']}{extra}")
    conn.close()
finally:
    svc.stop()
print("\nservice stopped")
