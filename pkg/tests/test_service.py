import threading
import urllib.error
import urllib.request
from pathlib import Path

import pytest

from isoplan.energization import compute_energization, normal_state, parse_state
from isoplan.service import make_server
from isoplan.switching import OperatingOrder, SwitchOp, execute_op
from isoplan.topology import load_topology

FIXTURES = Path(__file__).parent.parent / "fixtures"


class Client:
    def __init__(self, port):
        self.port = port

    def call(self, method, path, body=None, role=None, director=None):
        req = urllib.request.Request(
            f"http://127.0.0.1:{self.port}{path}",
            data=body.encode() if body is not None else None, method=method)
        if role:
            req.add_header("X-Role", role)
        if director:
            req.add_header("X-Director", director)
        try:
            with urllib.request.urlopen(req, timeout=10) as r:
                return r.status, r.read().decode()
        except urllib.error.HTTPError as e:
            return e.code, e.read().decode()

    def get(self, path):
        return self.call("GET", path)

    def post(self, path, body="", role="director", director="PD1"):
        return self.call("POST", path, body, role, director)


@pytest.fixture()
def minimal_server():
    net_text = (FIXTURES / "minimal/minimal.net").read_text()
    topo = load_topology(net_text)
    state = parse_state((FIXTURES / "minimal/normal.state").read_text(), topo)
    server = make_server(topo, state, port=0, net_text=net_text)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield Client(server.server_address[1]), topo, state, server
    server.shutdown()


@pytest.fixture()
def minimal2_server():
    net_text = (FIXTURES / "minimal2/minimal2.net").read_text()
    topo = load_topology(net_text)
    server = make_server(topo, normal_state(), port=0, net_text=net_text)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield Client(server.server_address[1]), topo, server
    server.shutdown()


def drive_pops(client, sid):
    assert client.post(f"/pops/{sid}/request")[0] == 200
    assert client.post(f"/pops/{sid}/acknowledge", role="dispatcher", director="TD1")[0] == 200
    assert client.post(f"/pops/{sid}/put_in_effect", role="dispatcher", director="TD1")[0] == 200


def test_network_and_state_roundtrip(minimal_server):
    client, topo, _, _ = minimal_server
    status, body = client.get("/network")
    assert status == 200 and "section st1" in body
    status, body = client.get("/state")
    assert status == 200
    assert all(f"energized {n}" in body for n in topo.nodes)


def test_full_isolation_step_through(minimal_server):
    client, topo, state0, server = minimal_server
    status, body = client.post("/isolations", "request min1 sections=st1\n")
    assert status == 201
    assert "plan min1 plate=pm1 session=pops-min1" in body
    drive_pops(client, "pops-min1")
    for _ in range(10):
        status, body = client.post("/orders/min1-t1/step")
        assert status == 200, body
    status, body = client.post("/orders/min1-t1/step")
    assert status == 409 and "ORDER_COMPLETE" in body
    status, body = client.get("/state")
    assert "grounded n2" in body and "grounded n3" in body
    assert "violation" not in body
    # the batch path lands on the same state
    from isoplan.switching import parse_requests, plan_isolation, run_sequence
    req = parse_requests("request min1 sections=st1\n")["min1"]
    plan = plan_isolation(topo, state0, req)
    batch_final, _, _ = run_sequence(topo, state0, plan.sequence)
    room = server.rooms["r1"]
    assert room.state.snapshot() == batch_final.snapshot()


def test_ground_work_gated_on_pops(minimal_server):
    client, _, _, _ = minimal_server
    client.post("/isolations", "request min1 sections=st1\n")
    for _ in range(6):    # device and tag work is fine before the plate order
        status, body = client.post("/orders/min1-t1/step")
        assert status == 200, body
    status, body = client.post("/orders/min1-t1/step")
    assert status == 409 and "POPS_NOT_IN_EFFECT" in body
    drive_pops(client, "pops-min1")
    status, _ = client.post("/orders/min1-t1/step")
    assert status == 200


def test_hot_ground_409_when_stepped_out_of_order(minimal2_server):
    client, _, _ = minimal2_server
    status, body = client.post("/isolations", "request m2c sections=sc\n")
    assert status == 201, body
    drive_pops(client, "pops-m2c")
    # the t2 form alone: open b2, tag b2, then try to ground the still-live track
    assert client.post("/orders/m2c-t2/step")[0] == 200   # open b2
    assert client.post("/orders/m2c-t2/step")[0] == 200   # tag b2
    status, body = client.post("/orders/m2c-t2/step")     # test gc1: reads live
    assert status == 200 and "note=live" in body
    status, body = client.post("/orders/m2c-t2/step")     # apply gc1
    assert status == 409
    assert "kind=HOT_GROUND" in body
    # checklist did not advance past the rejected op
    status, body = client.get("/orders/m2c-t2")
    assert "next 3" in body


def test_load_open_409_for_cross_jumper(minimal2_server):
    client, _, _ = minimal2_server
    status, body = client.post("/isolations", "request m2a sections=sa\n")
    assert status == 201, body
    drive_pops(client, "pops-m2a")
    assert client.post("/orders/m2a-t1/step")[0] == 200   # open b1
    status, body = client.post("/orders/m2a-t1/step")     # open tc under load
    assert status == 409 and "kind=LOAD_OPEN" in body
    # the other form first makes it legal
    assert client.post("/orders/m2a-t2/step")[0] == 200   # open b2
    status, body = client.post("/orders/m2a-t1/step")     # tc again, now dead
    assert status == 200, body


def test_event_stream_reconstructs_state(minimal_server):
    client, topo, state0, server = minimal_server
    client.post("/isolations", "request min1 sections=st1\n")
    drive_pops(client, "pops-min1")
    for _ in range(10):
        client.post("/orders/min1-t1/step")
    status, body = client.get("/events?since=0")
    assert status == 200
    events = [dict(kv.split("=", 1) for kv in line.split()) for line in body.splitlines()]
    seqs = [int(e["seq"]) for e in events]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
    # fold op events through execute_op independently
    cur = state0
    order = OperatingOrder(id="fold", line_group="t1", ops=[], director="PD1")
    for e in events:
        if e["kind"] != "op":
            continue
        op = SwitchOp(kind=e["op"], target=e["target"], actor=e["actor"], order_ref="fold")
        order.ops.append(op)
        cur, rec = execute_op(topo, cur, op, authority="PD1", order=order)
        order.records.append(rec)
    assert cur.snapshot() == server.rooms["r1"].state.snapshot()


def test_events_since_filters_and_long_poll_timeout(minimal_server):
    client, _, _, _ = minimal_server
    client.post("/isolations", "request min1 sections=st1\n")
    status, body = client.get("/events?since=0")
    n = len(body.splitlines())
    assert n >= 1
    status, body = client.get(f"/events?since={n}&timeout=0.1")
    assert status == 200 and body == ""


def test_restore_gated_on_release(minimal_server):
    client, _, _, _ = minimal_server
    client.post("/isolations", "request min1 sections=st1\n")
    drive_pops(client, "pops-min1")
    for _ in range(10):
        client.post("/orders/min1-t1/step")
    for _ in range(9):
        status, body = client.post("/orders/min1-t1-restore/step")
        assert status == 200, body
    status, body = client.post("/orders/min1-t1-restore/step")
    assert status == 409 and "POPS_NOT_RELEASED" in body
    assert client.post("/pops/pops-min1/request_release")[0] == 200
    status, body = client.post("/orders/min1-t1-restore/step")
    assert status == 200
    assert client.post("/pops/pops-min1/release", role="dispatcher")[0] == 200
    status, body = client.get("/state")
    assert "position" not in body    # everything back to normal


def test_pops_roles_and_illegal_transitions(minimal_server):
    client, _, _, _ = minimal_server
    client.post("/isolations", "request min1 sections=st1\n")
    status, body = client.post("/pops/pops-min1/acknowledge", role="dispatcher")
    assert status == 409 and "ILLEGAL_TRANSITION" in body
    status, body = client.post("/pops/pops-min1/request", role="dispatcher")
    assert status == 422 and "WRONG_ROLE" in body
    status, body = client.post("/pops/pops-min1/request", role="director")
    assert status == 200
    status, body = client.post("/pops/nope/request")
    assert status == 404


def test_double_header_confirmation_flow(minimal2_server):
    client, _, _ = minimal2_server
    client.post("/isolations", "request m2a sections=sa\n", director="PD1")
    client.post("/isolations", "request m2c sections=sc\n", director="PD2")
    # both plans command b1, b2 and tc; PD2 owns the second one
    status, body = client.post("/orders/m2a-t1/share", "director=PD2")
    assert status == 200
    assert "b1" in body and "tc" in body
    drive_pops(client, "pops-m2a")
    status, body = client.post("/orders/m2a-t1/step")
    assert status == 409 and "NEEDS_CONFIRMATION" in body
    assert client.post("/orders/m2a-t1/confirm", "device=b1\ndirector=PD1")[0] == 200
    status, body = client.post("/orders/m2a-t1/step")
    assert status == 409    # still waiting on the second director
    assert client.post("/orders/m2a-t1/confirm", "device=b1\ndirector=PD2")[0] == 200
    status, body = client.post("/orders/m2a-t1/step")
    assert status == 200, body
    # confirmations are consumed per operation
    status, body = client.post("/orders/m2a-t1/confirm", "device=tc\ndirector=PD1")
    assert status == 200


def test_unknown_ids_404(minimal_server):
    client, _, _, _ = minimal_server
    assert client.get("/orders/nope")[0] == 404
    assert client.post("/orders/nope/step")[0] == 404
    assert client.get("/nope")[0] == 404


def test_malformed_isolation_400_or_422(minimal_server):
    client, _, _, _ = minimal_server
    status, _ = client.post("/isolations", "gibberish\n")
    assert status == 400
    status, body = client.post("/isolations", "request r9 sections=nope\n")
    assert status == 422 and "BAD_TARGET_SECTION" in body


def test_simulate_endpoint(minimal_server):
    client, _, _, _ = minimal_server
    client.post("/isolations", "request min1 sections=st1\n")
    status, body = client.post("/simulate", "plan=min1\nstart=22:00\nend=05:00\n"
                                            "service_clear=23:00\nmode=expected\n")
    assert status == 200
    assert any(",contractor_work," in row for row in body.splitlines())


def test_concurrent_steps_are_serialized(minimal_server):
    client, _, _, _ = minimal_server
    client.post("/isolations", "request min1 sections=st1\n")
    drive_pops(client, "pops-min1")
    results = []
    lock = threading.Lock()

    def hammer():
        while True:
            status, body = client.post("/orders/min1-t1/step")
            with lock:
                results.append(status)
            if status != 200:
                return

    threads = [threading.Thread(target=hammer) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results.count(200) == 10    # exactly one success per op, no double fires
    status, body = client.get("/state")
    assert "grounded n2" in body and "violation" not in body


def test_gets_never_mutate(minimal_server):
    client, _, _, server = minimal_server
    client.post("/isolations", "request min1 sections=st1\n")
    before = server.rooms["r1"].state.snapshot()
    n_events = len(server.rooms["r1"].events)
    for path in ("/network", "/state", "/orders/min1-t1", "/orders", "/plans",
                 "/events?since=0"):
        assert client.get(path)[0] == 200
    assert server.rooms["r1"].state.snapshot() == before
    assert len(server.rooms["r1"].events) == n_events


def test_multiple_rooms(minimal_server):
    net_text = (FIXTURES / "minimal/minimal.net").read_text()
    topo = load_topology(net_text)
    server = make_server(topo, normal_state(), port=0, rooms=2, net_text=net_text)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    client = Client(server.server_address[1])
    assert client.post("/rooms/r2/isolations", "request rx sections=st1\n")[0] == 201
    assert client.get("/rooms/r1/plans")[1] == ""
    assert "plan rx" in client.get("/rooms/r2/plans")[1]
    assert client.get("/rooms/r9/state")[0] == 404
    server.shutdown()
