#!/usr/bin/env python3
"""Record native exit codes for the fixture corpus into manifest.json.

Each corpus program is compiled with the system C/C++ compiler, run, and
its exit status frozen.  Run once when fixtures change; the test suite
consumes the committed manifest and never needs a compiler.
"""

import json
import os
import subprocess
import sys
import tempfile

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")

CORPUS = [
    ("fact", "fact.c", "fact.ll"),
    ("loop", "loop.c", "loop.ll"),
    ("point", "point.c", "point.ll"),
    ("calc", "calc.cpp", "calc.ll"),
    ("list", "list.c", "list.ll"),
    ("global", "global.c", "global.ll"),
    ("namespace", "namespace.cpp", "namespace.ll"),
    ("fib", "fib.c", "fib.ll"),
]


def native_exit(source_path):
    compiler = "g++" if source_path.endswith(".cpp") else "gcc"
    with tempfile.TemporaryDirectory() as tmp:
        exe = os.path.join(tmp, "a.out")
        subprocess.run([compiler, source_path, "-o", exe], check=True)
        proc = subprocess.run([exe])
        return proc.returncode


def main():
    fixtures = os.path.abspath(FIXTURES)
    entries = []
    for name, source, ll in CORPUS:
        code = native_exit(os.path.join(fixtures, source))
        entries.append({"name": name, "source": source, "ll": ll,
                        "entry": "main", "native_exit": code})
        print(f"{name}: {code}")
    manifest = {"corpus": entries}
    out = os.path.join(fixtures, "manifest.json")
    with open(out, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    sys.exit(main())
