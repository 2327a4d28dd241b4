import json
import re
import socket
import threading
import time

import pytest

from irdb.cli import ProtocolClient, start_in_process_session
from irdb.session_server import (DebugServer, PipeTransport, Session,
                                 SocketLineTransport, WebSocketTransport)

from conftest import FIXTURES, fixture_path


def new_client():
    transport = start_in_process_session(source_roots=[FIXTURES])
    return ProtocolClient(transport)


def launch(client, name, **kw):
    args = {"program": fixture_path(name)}
    args.update(kw)
    return client.request("launch", args)


# -- handshake and basic catalog


def test_launch_stop_on_entry_emits_stopped_entry():
    c = new_client()
    resp = launch(c, "fact.ll", stopOnEntry=True)
    assert resp["success"]
    ev = c.wait_stop()
    assert ev["event"] == "stopped"
    assert ev["body"]["reason"] == "entry"
    c.request("disconnect")


def test_set_breakpoints_resolves_listing_location():
    c = new_client()
    launch(c, "fact.ll", stopOnEntry=True)
    c.wait_stop()
    resp = c.request("setBreakpoints",
                     {"file": "fact.c",
                      "breakpoints": [{"line": 5, "column": 3}]})
    (bp,) = resp["body"]["breakpoints"]
    assert bp["verified"] and (bp["line"], bp["column"]) == (5, 3)
    c.request("disconnect")


def test_variables_at_outermost_return_of_fact_5():
    c = new_client()
    launch(c, "fact.ll", entry="fact", args=[5], stopOnEntry=True)
    c.wait_stop()
    c.request("setBreakpoints",
              {"file": "fact.c", "breakpoints": [{"line": 5, "column": 3}]})
    # run to the outermost activation's return (single remaining frame)
    while True:
        c.request("continue")
        ev = c.wait_stop()
        assert ev["event"] == "stopped"
        frames = c.request("stackTrace")["body"]["frames"]
        if len(frames) == 1:
            break
    scopes = c.request("scopes",
                       {"frameId": frames[0]["frameId"]})["body"]["scopes"]
    local = next(s for s in scopes if s["name"] == "Local")
    out = c.request("variables",
                    {"ref": local["variablesReference"]})["body"]["variables"]
    as_map = {v["name"]: (v["value"], v["type"]) for v in out}
    assert as_map == {"n": ("5", "int"), "result": ("120", "int")}
    c.request("disconnect")


def test_restart_frame_reports_step_stop_at_entry():
    c = new_client()
    launch(c, "fact.ll", entry="fact", args=[2], stopOnEntry=True)
    c.wait_stop()
    c.request("stepExpr")
    c.wait_stop()
    frames = c.request("stackTrace")["body"]["frames"]
    resp = c.request("restartFrame", {"frameId": frames[0]["frameId"]})
    assert resp["success"]
    ev = c.wait_stop()
    assert ev["body"]["reason"] == "step"
    assert ev["body"]["topFrame"]["line"] == 1
    c.request("disconnect")


def test_step_while_running_is_invalid_state():
    c = new_client()
    resp = launch(c, "spinloop.ll")  # runs in the controller thread
    assert resp["success"]
    time.sleep(0.1)  # ensure the run is ongoing
    resp = c.request("stepOver")
    assert not resp["success"]
    assert "invalid-state" in resp["error"]
    c.request("pause")
    ev = c.wait_stop()
    assert ev["body"]["reason"] == "pause"
    c.request("disconnect")


def test_pause_during_long_loop_stops_at_statement():
    c = new_client()
    launch(c, "spinloop.ll")
    time.sleep(0.15)
    resp = c.request("pause")
    assert resp["success"]
    ev = c.wait_stop()
    assert ev["body"]["reason"] == "pause"
    top = ev["body"]["topFrame"]
    assert top["line"] >= 1 and top["column"] >= 1
    c.request("disconnect")


def test_unknown_command_answered():
    c = new_client()
    resp = c.request("frobnicate")
    assert not resp["success"]
    assert "unknown-command" in resp["error"]
    c.request("disconnect")


def test_malformed_message_answered():
    server_side, client_side = PipeTransport.pair()
    session = Session(server_side, source_roots=[FIXTURES])
    threading.Thread(target=session.serve, daemon=True).start()
    client_side.write("this is not json")
    reply = json.loads(client_side.read())
    assert reply["success"] is False
    assert "malformed" in reply["error"]
    client_side.write(json.dumps({"seq": 1, "kind": "request",
                                  "command": "disconnect"}))


def test_variable_refs_invalidated_on_resume():
    c = new_client()
    launch(c, "fact.ll", entry="fact", args=[1], stopOnEntry=True)
    c.wait_stop()
    c.request("setBreakpoints",
              {"file": "fact.c", "breakpoints": [{"line": 5, "column": 3}]})
    c.request("continue")
    c.wait_stop()
    frames = c.request("stackTrace")["body"]["frames"]
    scopes = c.request("scopes",
                       {"frameId": frames[0]["frameId"]})["body"]["scopes"]
    ref = scopes[0]["variablesReference"]
    c.request("continue")
    c.wait_stop()
    resp = c.request("variables", {"ref": ref})
    assert not resp["success"]
    c.request("disconnect")


def test_statement_locations_for_ui_markers():
    c = new_client()
    launch(c, "fact.ll", stopOnEntry=True)
    c.wait_stop()
    resp = c.request("statementLocations", {"file": "fact.c"})
    locs = {(l["line"], l["column"]) for l in resp["body"]["locations"]}
    assert (5, 3) in locs and (3, 9) in locs and (3, 7) in locs
    c.request("disconnect")


def test_breakpoints_set_before_launch_bind_at_launch():
    c = new_client()
    resp = c.request("setBreakpoints",
                     {"file": "fact.c",
                      "breakpoints": [{"line": 5, "column": 3}]})
    assert resp["success"]
    assert resp["body"]["breakpoints"][0]["verified"] is False  # pending
    launch(c, "fact.ll")
    ev = c.wait_stop()
    assert ev["event"] == "stopped"
    assert ev["body"]["reason"] == "breakpoint"
    c.request("disconnect")


def test_output_events_carry_guest_prints(tmp_path):
    path = tmp_path / "hello.ll"
    path.write_text("""
@fmt = private constant [12 x i8] c"hello %d...\\00"
declare i32 @printf(ptr, ...)
define i32 @main() {
entry:
  %0 = call i32 (ptr, ...) @printf(ptr @fmt, i32 42)
  ret i32 0
}
""")
    c = new_client()
    c.request("launch", {"program": str(path)})
    texts = []
    while True:
        ev = c.next_event()
        if ev is None or ev["event"] == "exited":
            break
        if ev["event"] == "output":
            texts.append(ev["body"]["text"])
    assert "".join(texts) == "hello 42..."
    c.request("disconnect")


# -- enabling/disabling column breakpoints through the protocol


def test_column_breakpoints_toggle_independently():
    def hits(disable_col7):
        c = new_client()
        launch(c, "fact.ll", entry="fact", args=[1], stopOnEntry=True)
        c.wait_stop()
        resp = c.request("setBreakpoints",
                         {"file": "fact.c",
                          "breakpoints": [{"line": 3, "column": 7},
                                          {"line": 3, "column": 9}]})
        bps = resp["body"]["breakpoints"]
        if disable_col7:
            target = next(b for b in bps if b["column"] == 7)
            r = c.request("enableBreakpoint",
                          {"id": target["id"], "enabled": False})
            assert r["success"]
        cols = []
        while True:
            c.request("continue")
            ev = c.wait_stop()
            if ev["event"] == "exited":
                break
            cols.append(ev["body"]["topFrame"]["column"])
        c.request("disconnect")
        return cols

    assert hits(disable_col7=False) == [9, 7, 9]
    assert hits(disable_col7=True) == [9, 9]


# -- protocol determinism


SCRIPT = [
    ("launch", {"program": fixture_path("fact.ll"), "entry": "fact",
                "args": [3], "stopOnEntry": True}, True),
    ("setBreakpoints", {"file": "fact.c",
                        "breakpoints": [{"line": 5, "column": 3}]}, False),
    ("continue", {}, True),
    ("stackTrace", {}, False),
    ("scopes", {"frameId": 4}, False),
    ("variables", {"ref": 1}, False),
    ("stepExpr", {}, True),
    ("continue", {}, True),
    ("disconnect", {}, False),
]

_ADDR = re.compile(r"0x[0-9a-fA-F]+")


def _normalize(msg):
    msg = dict(msg)
    msg.pop("seq", None)

    def scrub(v):
        if isinstance(v, str):
            return _ADDR.sub("0xADDR", v)
        if isinstance(v, dict):
            return {k: scrub(x) for k, x in v.items()}
        if isinstance(v, list):
            return [scrub(x) for x in v]
        return v

    return scrub(msg)


def run_script():
    transport = start_in_process_session(source_roots=[FIXTURES])
    client = ProtocolClient(transport)
    log = []
    for command, args, waits in SCRIPT:
        resp = client.request(command, args)
        log.append(_normalize(resp))
        if waits:
            ev = client.wait_stop()
            log.append(_normalize(ev))
    client.close()
    return log


def test_protocol_replay_is_deterministic():
    assert run_script() == run_script()


# -- real transports


def test_raw_tcp_transport_session():
    server = DebugServer(0, source_roots=[FIXTURES])
    port = server.start()
    sock = socket.create_connection(("127.0.0.1", port))
    transport = SocketLineTransport(sock)
    client = ProtocolClient(transport)
    resp = client.request("launch", {"program": fixture_path("fact.ll"),
                                     "stopOnEntry": True})
    assert resp["success"]
    ev = client.wait_stop()
    assert ev["body"]["reason"] == "entry"
    client.request("disconnect")
    server.stop()


def test_websocket_handshake_and_session():
    server = DebugServer(0, source_roots=[FIXTURES])
    port = server.start()
    sock = socket.create_connection(("127.0.0.1", port))
    key = "dGhlIHNhbXBsZSBub25jZQ=="
    sock.sendall((f"GET / HTTP/1.1\r\nHost: localhost:{port}\r\n"
                  "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                  f"Sec-WebSocket-Key: {key}\r\n"
                  "Sec-WebSocket-Version: 13\r\n\r\n").encode())
    head = b""
    while b"\r\n\r\n" not in head:
        head += sock.recv(4096)
    assert b"101" in head.split(b"\r\n", 1)[0]
    assert WebSocketTransport.accept_key(key).encode() in head
    transport = WebSocketTransport(sock)
    client = ProtocolClient(transport)
    resp = client.request("launch", {"program": fixture_path("fact.ll"),
                                     "stopOnEntry": True})
    assert resp["success"]
    ev = client.wait_stop()
    assert ev["body"]["reason"] == "entry"
    client.request("disconnect")
    server.stop()


def test_http_serves_placeholder_page():
    server = DebugServer(0, source_roots=[FIXTURES])
    port = server.start()
    sock = socket.create_connection(("127.0.0.1", port))
    sock.sendall(b"GET / HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
    data = b""
    while True:
        chunk = sock.recv(4096)
        if not chunk:
            break
        data += chunk
    assert b"200 OK" in data
    assert b"irdb" in data
    server.stop()


def test_transport_loss_frees_session_slot():
    server = DebugServer(0, source_roots=[FIXTURES])
    port = server.start()
    sock = socket.create_connection(("127.0.0.1", port))
    t = SocketLineTransport(sock)
    c = ProtocolClient(t)
    c.request("launch", {"program": fixture_path("fact.ll"),
                         "stopOnEntry": True})
    c.wait_stop()
    sock.shutdown(socket.SHUT_RDWR)  # abrupt loss, no disconnect
    sock.close()
    time.sleep(0.2)
    # a new session must be accepted afterwards
    sock2 = socket.create_connection(("127.0.0.1", port))
    c2 = ProtocolClient(SocketLineTransport(sock2))
    resp = c2.request("launch", {"program": fixture_path("fact.ll"),
                                 "stopOnEntry": True})
    assert resp["success"]
    c2.request("disconnect")
    server.stop()
