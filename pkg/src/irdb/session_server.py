"""Debug sessions over a newline-delimited JSON message protocol.

One structured document per line, UTF-8.  Requests carry a client-chosen
seq; the response repeats it.  Events carry no seq.  The full message
catalog is documented in docs/protocol.md.

Three sequential activities cooperate per session: the transport reader,
the engine controller (which owns the DebugEngine), and the shared writer.
pause and disconnect are handled on the reader thread; everything else is
serialized through the controller's command queue.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import queue
import socket
import sys
import threading

from .debug_engine import (CannotStep, DebugEngine, EngineExit, InvalidFrame)
from .debug_meta import SourceRegistry
from .hostfuncs import DEFAULT_HOST
from .ir_parser import ParseError, parse_module
from .value_inspection import render

_EXEC_COMMANDS = ("continue", "stepExpr", "stepInto", "stepOver", "stepOut",
                  "restartFrame")
_QUERY_COMMANDS = ("stackTrace", "scopes", "variables", "setBreakpoints",
                   "enableBreakpoint", "statementLocations", "source")


# ---------------------------------------------------------------------------
# Transports


class TransportClosed(Exception):
    pass


class StdioTransport:
    def __init__(self, stdin=None, stdout=None):
        self._in = stdin or sys.stdin
        self._out = stdout or sys.stdout

    def read(self):
        line = self._in.readline()
        if not line:
            raise TransportClosed
        return line.rstrip("\n")

    def write(self, text):
        self._out.write(text + "\n")
        self._out.flush()

    def close(self):
        pass


class SocketLineTransport:
    """Newline-delimited messages over a TCP socket."""

    def __init__(self, sock, first_chunk=b""):
        self.sock = sock
        self._buf = bytearray(first_chunk)

    def read(self):
        while b"\n" not in self._buf:
            try:
                chunk = self.sock.recv(65536)
            except OSError:
                raise TransportClosed from None
            if not chunk:
                raise TransportClosed
            self._buf += chunk
        line, _, rest = bytes(self._buf).partition(b"\n")
        self._buf = bytearray(rest)
        return line.decode("utf-8").rstrip("\r")

    def write(self, text):
        try:
            self.sock.sendall(text.encode("utf-8") + b"\n")
        except OSError:
            raise TransportClosed from None

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class PipeTransport:
    """In-memory duplex transport for tests and the embedded REPL."""

    def __init__(self, inbox, outbox):
        self._inbox = inbox
        self._outbox = outbox

    @classmethod
    def pair(cls):
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b), cls(b, a)

    def read(self):
        item = self._inbox.get()
        if item is None:
            raise TransportClosed
        return item

    def write(self, text):
        self._outbox.put(text)

    def close(self):
        self._outbox.put(None)


_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class WebSocketTransport:
    """Minimal RFC 6455 server endpoint: unfragmented text frames, plus
    ping/pong and close handling.  One protocol message per text frame."""

    def __init__(self, sock):
        self.sock = sock

    def read(self):
        while True:
            opcode, payload = self._read_frame()
            if opcode == 0x1:
                return payload.decode("utf-8")
            if opcode == 0x9:  # ping
                self._send_frame(0xA, payload)
                continue
            if opcode == 0x8:  # close
                raise TransportClosed
            # ignore pong/binary

    def _read_exact(self, n):
        out = bytearray()
        while len(out) < n:
            try:
                chunk = self.sock.recv(n - len(out))
            except OSError:
                raise TransportClosed from None
            if not chunk:
                raise TransportClosed
            out += chunk
        return bytes(out)

    def _read_frame(self):
        head = self._read_exact(2)
        fin = head[0] & 0x80
        opcode = head[0] & 0x0F
        masked = head[1] & 0x80
        length = head[1] & 0x7F
        if not fin:
            raise TransportClosed  # fragmentation unsupported
        if length == 126:
            length = int.from_bytes(self._read_exact(2), "big")
        elif length == 127:
            length = int.from_bytes(self._read_exact(8), "big")
        mask = self._read_exact(4) if masked else b"\0\0\0\0"
        data = bytearray(self._read_exact(length))
        if masked:
            for i in range(len(data)):
                data[i] ^= mask[i % 4]
        return opcode, bytes(data)

    def _send_frame(self, opcode, payload):
        head = bytearray([0x80 | opcode])
        n = len(payload)
        if n < 126:
            head.append(n)
        elif n < 1 << 16:
            head.append(126)
            head += n.to_bytes(2, "big")
        else:
            head.append(127)
            head += n.to_bytes(8, "big")
        try:
            self.sock.sendall(bytes(head) + payload)
        except OSError:
            raise TransportClosed from None

    def write(self, text):
        self._send_frame(0x1, text.encode("utf-8"))

    def close(self):
        try:
            self._send_frame(0x8, b"")
        except TransportClosed:
            pass
        try:
            self.sock.close()
        except OSError:
            pass

    @staticmethod
    def accept_key(key):
        digest = hashlib.sha1((key + _WS_GUID).encode()).digest()
        return base64.b64encode(digest).decode()


# ---------------------------------------------------------------------------
# Session


class Session:
    """One debug session: a client connection driving one program."""

    def __init__(self, transport, source_roots=(), host=None,
                 program_loader=None, defaults=None):
        self.transport = transport
        self.source_roots = list(source_roots)
        self.host = dict(DEFAULT_HOST if host is None else host)
        self.program_loader = program_loader or self._load_file
        self.defaults = defaults or {}
        self.engine = None
        self.phase = "idle"  # idle | suspended | running | exited
        self._commands = queue.Queue()
        self._write_lock = threading.Lock()
        self._var_refs = {}
        self._next_ref = 0
        self._pending_breakpoints = {}
        self._closing = False

    # -- plumbing

    def _load_file(self, path):
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()

    def _send(self, payload):
        with self._write_lock:
            try:
                self.transport.write(json.dumps(payload, sort_keys=True))
            except TransportClosed:
                self._closing = True

    def _respond(self, msg, body=None):
        self._send({"seq": msg.get("seq", -1), "kind": "response",
                    "command": msg.get("command", ""), "success": True,
                    "body": body or {}})

    def _fail(self, msg, error):
        self._send({"seq": msg.get("seq", -1), "kind": "response",
                    "command": msg.get("command", ""), "success": False,
                    "error": error})

    def _event(self, name, body):
        self._send({"kind": "event", "event": name, "body": body})

    # -- serving

    def serve(self):
        reader = threading.Thread(target=self._read_loop, daemon=True)
        reader.start()
        try:
            while not self._closing:
                msg = self._commands.get()
                if msg is None:
                    break
                self._dispatch(msg)
        finally:
            self._shutdown()

    def _read_loop(self):
        while True:
            try:
                line = self.transport.read()
            except TransportClosed:
                break
            if not line.strip():
                continue
            try:
                msg = json.loads(line)
                if not isinstance(msg, dict):
                    raise ValueError("message must be an object")
            except ValueError as e:
                self._send({"seq": -1, "kind": "response", "command": "",
                            "success": False, "error": f"malformed message: {e}"})
                continue
            command = msg.get("command", "")
            if command == "pause":
                if self.engine is not None and self.phase == "running":
                    self.engine.pause()
                    self._respond(msg)
                else:
                    self._fail(msg, "invalid-state: nothing to pause")
                continue
            if command == "disconnect":
                self._respond(msg)
                break
            if self.phase == "running" and (command in _EXEC_COMMANDS
                                            or command in _QUERY_COMMANDS
                                            or command == "launch"):
                self._fail(msg, "invalid-state: program is running")
                continue
            self._commands.put(msg)
        # transport gone or disconnect requested: stop the controller
        if self.engine is not None:
            self.engine.abort.set()
        self._closing = True
        self._commands.put(None)

    def _shutdown(self):
        if self.engine is not None:
            self.engine.abort.set()
            self.engine = None
        self._var_refs.clear()
        self.transport.close()

    # -- command dispatch (controller thread)

    def _dispatch(self, msg):
        command = msg.get("command", "")
        args = msg.get("arguments", {}) or {}
        handler = getattr(self, "_cmd_" + command, None)
        if handler is None:
            self._fail(msg, f"unknown-command: {command!r}")
            return
        try:
            handler(msg, args)
        except InvalidFrame as e:
            self._fail(msg, f"invalid-frame: {e}")
        except CannotStep as e:
            self._fail(msg, f"cannot-step: {e}")
        except ParseError as e:
            self._fail(msg, f"parse-error: {e}")
        except TransportClosed:
            self._closing = True

    def _cmd_launch(self, msg, args):
        if self.engine is not None:
            self._fail(msg, "invalid-state: already launched")
            return
        program = args.get("program") or self.defaults.get("program", "")
        try:
            text = self.program_loader(program)
        except OSError as e:
            self._fail(msg, f"cannot-load: {e}")
            return
        module = parse_module(text, program)
        registry = SourceRegistry(self.source_roots)
        self.engine = DebugEngine(module, host=self.host, registry=registry,
                                  output=lambda t: self._event("output",
                                                               {"text": t}))
        for file, requests in self._pending_breakpoints.items():
            self.engine.set_breakpoints(file, requests)
        self._pending_breakpoints.clear()
        self._respond(msg)
        entry = args.get("entry") or "main"
        call_args = args.get("args") or []
        stop_on_entry = args.get("stopOnEntry")
        if stop_on_entry is None:
            stop_on_entry = self.defaults.get("stopOnEntry", False)
        self.phase = "running"
        result = self.engine.launch(entry, call_args,
                                    stop_on_entry=bool(stop_on_entry))
        self._emit_stop(result)

    def _cmd_setBreakpoints(self, msg, args):
        file = args.get("file", "")
        requests = args.get("breakpoints", [])
        if self.engine is None:
            self._pending_breakpoints[file] = requests
            body = {"breakpoints": [
                {"id": 0, "verified": False, "line": r.get("line"),
                 "column": r.get("column"), "enabled": r.get("enabled", True)}
                for r in requests]}
            self._respond(msg, body)
            return
        bps = self.engine.set_breakpoints(file, requests)
        body = {"breakpoints": [self._bp_json(bp) for bp in bps]}
        self._respond(msg, body)

    @staticmethod
    def _bp_json(bp):
        out = {"id": bp.id, "verified": bp.resolved is not None,
               "line": bp.line, "column": bp.column, "enabled": bp.enabled}
        if bp.resolved is not None:
            out["line"] = bp.resolved.line
            out["column"] = bp.resolved.column
        return out

    def _cmd_enableBreakpoint(self, msg, args):
        self._require_engine(msg)
        bp = self.engine.enable_breakpoint(args.get("id"),
                                           bool(args.get("enabled", True)))
        if bp is None:
            self._fail(msg, f"unknown breakpoint {args.get('id')}")
            return
        self._respond(msg, {"breakpoint": self._bp_json(bp)})

    def _require_engine(self, msg):
        if self.engine is None:
            raise InvalidFrame("no program launched")

    def _resume(self, msg, mode):
        self._require_engine(msg)
        if self.phase not in ("suspended",):
            self._fail(msg, f"invalid-state: cannot {mode} while {self.phase}")
            return
        engine = self.engine
        try:
            engine.check_stepping(mode)
        except CannotStep as e:
            self._fail(msg, f"cannot-step: {e}")
            return
        self._invalidate_refs()
        self.phase = "running"
        self._respond(msg)
        result = engine.resume(mode)
        self._emit_stop(result)

    def _cmd_continue(self, msg, args):
        self._resume(msg, "continue")

    def _cmd_stepExpr(self, msg, args):
        self._resume(msg, "stepExpr")

    def _cmd_stepInto(self, msg, args):
        self._resume(msg, "stepInto")

    def _cmd_stepOver(self, msg, args):
        self._resume(msg, "stepOver")

    def _cmd_stepOut(self, msg, args):
        self._resume(msg, "stepOut")

    def _emit_stop(self, result):
        if isinstance(result, EngineExit):
            self.phase = "exited"
            self._event("exited", {"code": result.code})
            return
        self.phase = "suspended"
        top = result.frames[0] if result.frames else None
        body = {"reason": result.reason, "description": result.description}
        if result.breakpoint_id is not None:
            body["breakpointId"] = result.breakpoint_id
        if top is not None:
            body["topFrame"] = self._frame_json(top)
        self._event("stopped", body)

    @staticmethod
    def _frame_json(view):
        loc = view.location
        out = {"frameId": view.frame_id, "name": view.function_source_name}
        if loc is not None:
            out.update({"file": loc.file_name, "line": loc.line,
                        "column": loc.column,
                        "sourceAvailable": loc.resolved is not None})
        return out

    def _cmd_stackTrace(self, msg, args):
        self._require_engine(msg)
        if self.phase not in ("suspended", "exited"):
            self._fail(msg, "invalid-state: not suspended")
            return
        frames = self.engine.build_stack()
        self._respond(msg, {"frames": [self._frame_json(f) for f in frames]})

    def _cmd_scopes(self, msg, args):
        self._require_engine(msg)
        if self.phase != "suspended":
            self._fail(msg, "invalid-state: not suspended")
            return
        scopes = self.engine.collect_scopes(args.get("frameId"))
        out = []
        for scope in scopes:
            ref = self._new_ref(("scope", scope))
            out.append({"name": scope.name, "variablesReference": ref,
                        "count": len(scope.variables)})
        self._respond(msg, {"scopes": out})

    def _cmd_variables(self, msg, args):
        self._require_engine(msg)
        if self.phase != "suspended":
            self._fail(msg, "invalid-state: not suspended")
            return
        ref = args.get("ref", args.get("variablesReference"))
        target = self._var_refs.get(ref)
        if target is None:
            self._fail(msg, f"unknown variables reference {ref}")
            return
        out = []
        if target[0] == "scope":
            entries = target[1].variables  # (name, DisplayNode)
            for name, node in entries:
                out.append(self._variable_json(name, node))
        else:
            for name, source_value in target[1]:
                node = render(source_value, self.engine.state.memory)
                out.append(self._variable_json(name, node))
        self._respond(msg, {"variables": out})

    def _variable_json(self, name, node):
        ref = 0
        if node.children:
            ref = self._new_ref(("children", node.children))
        return {"name": name, "value": node.display, "type": node.type_name,
                "variablesReference": ref}

    def _new_ref(self, payload):
        self._next_ref += 1
        self._var_refs[self._next_ref] = payload
        return self._next_ref

    def _invalidate_refs(self):
        self._var_refs.clear()
        self._next_ref = 0

    def _cmd_restartFrame(self, msg, args):
        self._require_engine(msg)
        if self.phase != "suspended":
            self._fail(msg, "invalid-state: not suspended")
            return
        self._invalidate_refs()
        result = self.engine.restart_frame(args.get("frameId"))
        self._respond(msg)
        self._emit_stop(result)

    def _cmd_statementLocations(self, msg, args):
        self._require_engine(msg)
        locs = self.engine.statement_locations(args.get("file", ""))
        self._respond(msg, {"locations": [{"line": l, "column": c}
                                          for l, c in locs]})

    def _cmd_source(self, msg, args):
        self._require_engine(msg)
        text = self.engine.source_text(args.get("file", ""))
        if text is None:
            self._fail(msg, "source-unavailable")
            return
        self._respond(msg, {"content": text})


# ---------------------------------------------------------------------------
# Servers


def _session_banner(kind, port, out=sys.stderr):
    if kind == "ws":
        print(f"serving ws://localhost:{port}, UI at http://localhost:{port}",
              file=out)


class DebugServer:
    """Accepts connections on one port.

    Incoming bytes decide the transport: an HTTP request either upgrades to
    a websocket session or fetches a static UI asset; a JSON line starts a
    raw TCP session.  One debug session at a time; static assets are served
    concurrently.
    """

    def __init__(self, port, source_roots=(), host=None, ui_dir=None,
                 defaults=None):
        self.port = port
        self.source_roots = source_roots
        self.host = host
        self.ui_dir = ui_dir
        self.defaults = defaults
        self._session_active = threading.Lock()
        self._listener = None
        self._stopped = threading.Event()

    def start(self):
        self._listener = socket.create_server(("127.0.0.1", self.port))
        self.port = self._listener.getsockname()[1]
        thread = threading.Thread(target=self._accept_loop, daemon=True)
        thread.start()
        return self.port

    def stop(self):
        self._stopped.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass

    def serve_forever(self):
        self.start()
        self._stopped.wait()

    def _accept_loop(self):
        while not self._stopped.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._handle, args=(conn,),
                             daemon=True).start()

    def _handle(self, conn):
        try:
            first = conn.recv(4096, socket.MSG_PEEK)
        except OSError:
            return
        if not first:
            conn.close()
            return
        if first.lstrip()[:1] == b"{":
            transport = SocketLineTransport(conn)
            self._run_session(transport)
            return
        self._handle_http(conn)

    def _handle_http(self, conn):
        data = bytearray()
        while b"\r\n\r\n" not in data and len(data) < 65536:
            try:
                chunk = conn.recv(4096)
            except OSError:
                return
            if not chunk:
                break
            data += chunk
        head = bytes(data).split(b"\r\n\r\n", 1)[0].decode("latin-1")
        lines = head.split("\r\n")
        request_line = lines[0] if lines else ""
        headers = {}
        for line in lines[1:]:
            if ":" in line:
                k, v = line.split(":", 1)
                headers[k.strip().lower()] = v.strip()
        if headers.get("upgrade", "").lower() == "websocket":
            key = headers.get("sec-websocket-key", "")
            accept = WebSocketTransport.accept_key(key)
            resp = ("HTTP/1.1 101 Switching Protocols\r\n"
                    "Upgrade: websocket\r\nConnection: Upgrade\r\n"
                    f"Sec-WebSocket-Accept: {accept}\r\n\r\n")
            try:
                conn.sendall(resp.encode("latin-1"))
            except OSError:
                return
            self._run_session(WebSocketTransport(conn))
            return
        self._serve_static(conn, request_line)

    def _run_session(self, transport):
        if not self._session_active.acquire(blocking=False):
            try:
                transport.write(json.dumps({
                    "kind": "event", "event": "error",
                    "body": {"error": "a session is already active"}}))
            except TransportClosed:
                pass
            transport.close()
            return
        try:
            Session(transport, source_roots=self.source_roots,
                    host=self.host, defaults=self.defaults).serve()
        finally:
            self._session_active.release()

    _PLACEHOLDER = (b"<!doctype html><meta charset=utf-8>"
                    b"<title>irdb</title><p>irdb debug server is running. "
                    b"Build the web UI (frontend/) to get the full "
                    b"debugger interface.</p>")

    def _serve_static(self, conn, request_line):
        parts = request_line.split()
        path = parts[1] if len(parts) > 1 else "/"
        path = path.split("?", 1)[0]
        if path == "/":
            path = "/index.html"
        content, ctype = None, "text/html; charset=utf-8"
        if self.ui_dir:
            full = os.path.normpath(os.path.join(self.ui_dir, path.lstrip("/")))
            if full.startswith(os.path.normpath(self.ui_dir)) \
                    and os.path.isfile(full):
                with open(full, "rb") as fh:
                    content = fh.read()
                ctype = _content_type(full)
        if content is None and path == "/index.html":
            content = self._PLACEHOLDER
        if content is None:
            resp = b"HTTP/1.1 404 Not Found\r\nConnection: close\r\n\r\n"
            try:
                conn.sendall(resp)
            finally:
                conn.close()
            return
        head = ("HTTP/1.1 200 OK\r\n"
                f"Content-Type: {ctype}\r\n"
                f"Content-Length: {len(content)}\r\n"
                "Connection: close\r\n\r\n").encode("latin-1")
        try:
            conn.sendall(head + content)
        except OSError:
            pass
        finally:
            conn.close()


def _content_type(path):
    for ext, ctype in ((".html", "text/html; charset=utf-8"),
                       (".js", "text/javascript"),
                       (".css", "text/css"),
                       (".map", "application/json"),
                       (".json", "application/json")):
        if path.endswith(ext):
            return ctype
    return "application/octet-stream"


def serve_stdio(source_roots=(), host=None, defaults=None):
    Session(StdioTransport(), source_roots=source_roots, host=host,
            defaults=defaults).serve()


def serve_port(port, source_roots=(), host=None, ui_dir=None, defaults=None):
    server = DebugServer(port, source_roots=source_roots, host=host,
                         ui_dir=ui_dir, defaults=defaults)
    server.serve_forever()
