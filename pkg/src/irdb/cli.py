"""Command-line entry point: run programs, serve debug sessions, REPL.

Exit codes: 2 for parse errors, 1 for guest traps, otherwise the low 8
bits of the entry function's return value.
"""

from __future__ import annotations

import argparse
import json
import os
import queue
import sys
import threading

from .debug_meta import DescriptorBuilder, SourceRegistry
from .hostfuncs import DEFAULT_HOST
from .interpreter import ExecutionState, call_function, make_int
from .ir_model import IntType
from .ir_parser import ParseError, parse_module
from .session_server import (DebugServer, PipeTransport, Session,
                             SocketLineTransport, TransportClosed,
                             serve_stdio)


def _source_roots(flag_values):
    roots = list(flag_values or [])
    env = os.environ.get("IRDB_SOURCE_ROOTS", "")
    if env:
        roots.extend(p for p in env.split(os.pathsep) if p)
    return roots


def _load(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# run


def cmd_run(ns):
    try:
        text = _load(ns.program)
    except OSError as e:
        print(f"irdb: {e}", file=sys.stderr)
        return 2
    try:
        module = parse_module(text, ns.program)
    except ParseError as e:
        print(f"{ns.program}:{e.line}:{e.column}: error: {e.message}",
              file=sys.stderr)
        if e.snippet:
            print(f"  {e.snippet}", file=sys.stderr)
        return 2
    builder = DescriptorBuilder(SourceRegistry(_source_roots(ns.source_root)))
    state = ExecutionState(
        module, host=DEFAULT_HOST,
        output=lambda t: (sys.stdout.write(t), sys.stdout.flush()),
        locator=lambda ref: builder.build_location(module, ref))
    fn = module.function(ns.entry)
    if fn is None or not fn.is_defined:
        print(f"irdb: no entry function {ns.entry!r} in {ns.program}",
              file=sys.stderr)
        return 2
    args = []
    for raw, (_, ty) in zip(ns.args, fn.params):
        bits = ty.bits if isinstance(ty, IntType) else 64
        args.append(make_int(bits, int(raw, 0)))
    outcome = call_function(state, ns.entry, args)
    if outcome.kind == "trapped":
        print(f"trap: {outcome.message}", file=sys.stderr)
        for frame, loc in outcome.stack:
            name = frame.func.ir_name.lstrip("@")
            if frame.func.subprogram_ref is not None:
                scope = builder.build_scope(module, frame.func.subprogram_ref)
                name = scope.source_name or name
            where = f"{loc}" if loc is not None else "<unknown>"
            print(f"  at {where} in {name}", file=sys.stderr)
        return 1
    value = outcome.value
    return (value.value & 0xFF) if hasattr(value, "value") else 0


# ---------------------------------------------------------------------------
# debug


def _ui_dir():
    env = os.environ.get("IRDB_UI_DIR")
    if env and os.path.isdir(env):
        return env
    here = os.path.dirname(os.path.dirname(os.path.dirname(
        os.path.abspath(__file__))))
    for candidate in (os.path.join(here, "frontend", "dist"),
                      os.path.join(os.getcwd(), "frontend", "dist")):
        if os.path.isdir(candidate):
            return candidate
    return None


def cmd_debug(ns):
    roots = _source_roots(ns.source_root)
    defaults = {"program": ns.program, "stopOnEntry": ns.stop_on_entry}
    if ns.stdio:
        print("irdb: protocol on stdio", file=sys.stderr)
        serve_stdio(source_roots=roots, defaults=defaults)
        return 0
    server = DebugServer(ns.port, source_roots=roots, ui_dir=_ui_dir(),
                         defaults=defaults)
    try:
        port = server.start()
    except OSError as e:
        print(f"irdb: cannot listen on port {ns.port}: {e}", file=sys.stderr)
        return 1
    print(f"serving ws://localhost:{port}, UI at http://localhost:{port}")
    sys.stdout.flush()
    try:
        server._stopped.wait()
    except KeyboardInterrupt:
        server.stop()
    return 0


# ---------------------------------------------------------------------------
# protocol client (used by the REPL; also importable for scripting)


class ProtocolClient:
    """A protocol-level client: sends requests, queues events."""

    def __init__(self, transport, on_event=None):
        self.transport = transport
        self.on_event = on_event
        self.events = queue.Queue()
        self._responses = {}
        self._lock = threading.Lock()
        self._seq = 0
        self._closed = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        while True:
            try:
                line = self.transport.read()
            except TransportClosed:
                self._closed.set()
                self.events.put(None)
                return
            try:
                msg = json.loads(line)
            except ValueError:
                continue
            if msg.get("kind") == "response":
                with self._lock:
                    waiter = self._responses.get(msg.get("seq"))
                if waiter is not None:
                    waiter.put(msg)
            elif msg.get("kind") == "event":
                if self.on_event is not None:
                    self.on_event(msg)
                self.events.put(msg)

    def request(self, command, arguments=None, timeout=30):
        with self._lock:
            self._seq += 1
            seq = self._seq
            waiter = queue.Queue()
            self._responses[seq] = waiter
        self.transport.write(json.dumps({
            "seq": seq, "kind": "request", "command": command,
            "arguments": arguments or {}}))
        try:
            return waiter.get(timeout=timeout)
        finally:
            with self._lock:
                self._responses.pop(seq, None)

    def next_event(self, timeout=30):
        return self.events.get(timeout=timeout)

    def wait_event(self, name, timeout=30):
        while True:
            ev = self.next_event(timeout)
            if ev is None:
                raise TransportClosed
            if ev.get("event") == name:
                return ev

    def wait_stop(self, timeout=30):
        """Next stopped or exited event."""
        while True:
            ev = self.next_event(timeout)
            if ev is None:
                raise TransportClosed
            if ev.get("event") in ("stopped", "exited"):
                return ev

    def close(self):
        try:
            self.transport.close()
        except Exception:
            pass


def start_in_process_session(source_roots=(), host=None, defaults=None):
    """A session served over an in-memory pipe; returns the client side."""
    server_side, client_side = PipeTransport.pair()
    session = Session(server_side, source_roots=source_roots, host=host,
                      defaults=defaults)
    thread = threading.Thread(target=session.serve, daemon=True)
    thread.start()
    return client_side


# ---------------------------------------------------------------------------
# repl


_REPL_HELP = """commands:
  b FILE:LINE[:COL]   set a breakpoint
  d ID                disable a breakpoint
  e ID                re-enable a breakpoint
  c                   continue
  s                   step expression
  n                   step over
  fin                 step out
  bt                  backtrace
  scopes              show scopes and variables for the top frame
  p NAME              print one variable
  restart [FRAMEID]   restart a frame (default: top)
  q                   quit
"""


class Repl:
    def __init__(self, client, program, out=None):
        self.client = client
        self.program = program
        self.out = out if out is not None else sys.stdout
        self.breakpoints = {}  # file -> list of requests
        self.top_frame_id = None
        self.running = True

    def _print(self, text):
        self.out.write(text + "\n")
        self.out.flush()

    def handle_event(self, ev):
        name = ev.get("event")
        body = ev.get("body", {})
        if name == "stopped":
            top = body.get("topFrame", {})
            self.top_frame_id = top.get("frameId")
            where = ""
            if "file" in top:
                where = f"{top['file']}:{top['line']}:{top['column']}"
            label = body.get("reason", "")
            if body.get("breakpointId") is not None:
                label = f"breakpoint {body['breakpointId']}"
            self._print(f"stopped at {where} ({label})" if where
                        else f"stopped ({label})")
        elif name == "exited":
            self._print(f"exited with code {body.get('code')}")
            self.running = False
        elif name == "output":
            self.out.write(body.get("text", ""))
            self.out.flush()

    def launch(self):
        resp = self.client.request("launch", {"program": self.program,
                                              "stopOnEntry": True})
        if not resp.get("success"):
            self._print(f"error: {resp.get('error')}")
            self.running = False
            return
        self.client.wait_stop()

    def execute(self, line):
        parts = line.split()
        if not parts:
            return True
        cmd, rest = parts[0], parts[1:]
        if cmd == "q":
            self.client.request("disconnect")
            return False
        if cmd == "b" and rest:
            spec = rest[0].split(":")
            file = spec[0]
            req = {"line": int(spec[1])}
            if len(spec) > 2:
                req["column"] = int(spec[2])
            self.breakpoints.setdefault(file, []).append(req)
            resp = self.client.request("setBreakpoints",
                                       {"file": file,
                                        "breakpoints": self.breakpoints[file]})
            for bp in resp.get("body", {}).get("breakpoints", []):
                state = "resolved" if bp.get("verified") else "pending"
                col = f":{bp['column']}" if bp.get("column") else ""
                self._print(f"breakpoint {bp['id']} at {file}:{bp['line']}"
                            f"{col} ({state})")
            return True
        if cmd in ("d", "e") and rest:
            resp = self.client.request("enableBreakpoint",
                                       {"id": int(rest[0]),
                                        "enabled": cmd == "e"})
            if not resp.get("success"):
                self._print(f"error: {resp.get('error')}")
            return True
        if cmd in ("c", "s", "n", "fin"):
            command = {"c": "continue", "s": "stepExpr", "n": "stepOver",
                       "fin": "stepOut"}[cmd]
            resp = self.client.request(command)
            if not resp.get("success"):
                self._print(f"error: {resp.get('error')}")
                return True
            self.client.wait_stop()
            return self.running
        if cmd == "bt":
            resp = self.client.request("stackTrace")
            for i, fr in enumerate(resp.get("body", {}).get("frames", [])):
                where = ""
                if "file" in fr:
                    where = f" at {fr['file']}:{fr['line']}:{fr['column']}"
                self._print(f"#{i} {fr['name']}{where}")
            return True
        if cmd == "scopes":
            for scope, variables in self._scopes():
                self._print(f"{scope}:")
                for v in variables:
                    self._print(f"  {v['name']}: {v['type']} = {v['value']}")
            return True
        if cmd == "p" and rest:
            for _, variables in self._scopes():
                for v in variables:
                    if v["name"] == rest[0]:
                        self._print(f"{v['name']}: {v['type']} = {v['value']}")
                        return True
            self._print(f"no variable named {rest[0]!r}")
            return True
        if cmd == "restart":
            frame_id = int(rest[0]) if rest else self.top_frame_id
            resp = self.client.request("restartFrame", {"frameId": frame_id})
            if not resp.get("success"):
                self._print(f"error: {resp.get('error')}")
                return True
            self.client.wait_stop()
            return True
        self._print(_REPL_HELP)
        return True

    def _scopes(self):
        resp = self.client.request("scopes", {"frameId": self.top_frame_id})
        out = []
        for scope in resp.get("body", {}).get("scopes", []):
            vresp = self.client.request(
                "variables", {"ref": scope["variablesReference"]})
            out.append((scope["name"],
                        vresp.get("body", {}).get("variables", [])))
        return out


def cmd_repl(ns):
    roots = _source_roots(ns.source_root)
    if ns.connect:
        import socket
        host, _, port = ns.connect.rpartition(":")
        sock = socket.create_connection((host or "127.0.0.1", int(port)))
        transport = SocketLineTransport(sock)
    else:
        transport = start_in_process_session(source_roots=roots)
    repl = Repl(None, ns.program)
    client = ProtocolClient(transport, on_event=repl.handle_event)
    repl.client = client
    repl.launch()
    stream = open(ns.script) if ns.script else sys.stdin
    try:
        while repl.running:
            if stream is sys.stdin:
                sys.stdout.write("(irdb) ")
                sys.stdout.flush()
            line = stream.readline()
            if not line:
                break
            if not repl.execute(line.strip()):
                break
    finally:
        if stream is not sys.stdin:
            stream.close()
        client.close()
    return 0


# ---------------------------------------------------------------------------


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="irdb",
        description="Interpreter and source-level debugger for textual "
                    "LLVM IR")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a program to completion")
    p_run.add_argument("program")
    p_run.add_argument("--entry", default="main")
    p_run.add_argument("--source-root", action="append", default=[])
    p_run.add_argument("args", nargs="*", help="integer arguments")
    p_run.set_defaults(func=cmd_run)

    p_debug = sub.add_parser("debug", help="serve a debug session")
    p_debug.add_argument("program")
    p_debug.add_argument("--port", type=int, default=4711)
    p_debug.add_argument("--stdio", action="store_true")
    p_debug.add_argument("--stop-on-entry", action="store_true")
    p_debug.add_argument("--source-root", action="append", default=[])
    p_debug.set_defaults(func=cmd_debug)

    p_repl = sub.add_parser("repl", help="interactive terminal debugger")
    p_repl.add_argument("program")
    p_repl.add_argument("--source-root", action="append", default=[])
    p_repl.add_argument("--connect", help="HOST:PORT of a remote session")
    p_repl.add_argument("--script", help="read commands from a file")
    p_repl.set_defaults(func=cmd_repl)

    ns, extra = parser.parse_known_args(argv)
    if ns.command == "run":
        ns.args = list(ns.args) + extra
    elif extra:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
