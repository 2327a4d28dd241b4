#!/usr/bin/env python3
"""Record a protocol transcript for the web UI's replay test.

Drives an in-process session against the fact fixture the same way the
browser front-end would, capturing every sent and received message in
arrival order, with named checkpoints where the UI snapshot test will
assert its rendered state.  Output: frontend/test/transcript.json.
"""

import json
import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))

from irdb.session_server import PipeTransport, Session  # noqa: E402
import threading  # noqa: E402

FIXTURES = os.path.join(ROOT, "tests", "fixtures")


class Recorder:
    def __init__(self):
        server_side, self.client = PipeTransport.pair()
        session = Session(server_side, source_roots=[FIXTURES])
        threading.Thread(target=session.serve, daemon=True).start()
        self.log = []
        self.seq = 0

    def checkpoint(self, name):
        self.log.append({"checkpoint": name})

    def request(self, command, arguments=None, wait_stop=False):
        self.seq += 1
        msg = {"seq": self.seq, "kind": "request", "command": command,
               "arguments": arguments or {}}
        self.client.write(json.dumps(msg))
        self.log.append({"dir": "send", "msg": msg})
        response = None
        stopped = not wait_stop
        while response is None or not stopped:
            got = json.loads(self.client.read())
            self.log.append({"dir": "recv", "msg": got})
            if got.get("kind") == "response" and got.get("seq") == self.seq:
                response = got
                if not response.get("success"):
                    stopped = True
            if got.get("kind") == "event" and got.get("event") in ("stopped",
                                                                   "exited"):
                stopped = True
        return response


def main():
    r = Recorder()
    program = os.path.join(FIXTURES, "fact.ll")
    r.request("launch", {"program": program, "stopOnEntry": True},
              wait_stop=True)
    r.request("source", {"file": "fact.c"})
    r.request("statementLocations", {"file": "fact.c"})
    r.request("stackTrace")
    r.checkpoint("entry")
    resp = r.request("setBreakpoints",
                     {"file": "fact.c",
                      "breakpoints": [{"line": 5, "column": 3},
                                      {"line": 3, "column": 9}]})
    bps = {b["column"]: b["id"] for b in resp["body"]["breakpoints"]}
    r.checkpoint("breakpoints-set")
    r.request("continue", wait_stop=True)
    resp = r.request("stackTrace")
    top = resp["body"]["frames"][0]["frameId"]
    resp = r.request("scopes", {"frameId": top})
    local_ref = resp["body"]["scopes"][0]["variablesReference"]
    r.request("variables", {"ref": local_ref})
    r.checkpoint("first-breakpoint")
    r.request("enableBreakpoint", {"id": bps[9], "enabled": False})
    r.checkpoint("toggled")
    r.request("continue", wait_stop=True)
    resp = r.request("stackTrace")
    frames = resp["body"]["frames"]
    top = frames[0]["frameId"]
    resp = r.request("scopes", {"frameId": top})
    local_ref = resp["body"]["scopes"][0]["variablesReference"]
    r.request("variables", {"ref": local_ref})
    r.checkpoint("deep-stack")
    r.request("restartFrame", {"frameId": top}, wait_stop=True)
    r.request("stackTrace")
    r.checkpoint("restarted")
    r.request("stepExpr", wait_stop=True)
    r.request("stackTrace")
    r.checkpoint("stepped")
    r.request("disconnect")

    out = os.path.join(ROOT, "frontend", "test", "transcript.json")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as fh:
        json.dump(r.log, fh, indent=1)
        fh.write("\n")
    print(f"wrote {out} ({len(r.log)} entries)")


if __name__ == "__main__":
    main()
