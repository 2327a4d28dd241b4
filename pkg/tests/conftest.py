import json
import os

import pytest

from irdb.debug_engine import DebugEngine, EngineExit
from irdb.debug_meta import DescriptorBuilder, SourceRegistry
from irdb.hostfuncs import DEFAULT_HOST
from irdb.ir_parser import parse_module

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

_module_cache = {}


def fixture_path(name):
    return os.path.join(FIXTURES, name)


def load_text(name):
    with open(fixture_path(name), "r", encoding="utf-8") as fh:
        return fh.read()


def parse_fixture(name):
    # modules are immutable after parsing; share them across tests
    if name not in _module_cache:
        _module_cache[name] = parse_module(load_text(name), name)
    return _module_cache[name]


def make_engine(name, with_sources=True, output=None):
    roots = [FIXTURES] if with_sources else []
    return DebugEngine(parse_fixture(name), host=DEFAULT_HOST,
                       registry=SourceRegistry(roots), output=output)


def make_builder(with_sources=True):
    roots = [FIXTURES] if with_sources else []
    return DescriptorBuilder(SourceRegistry(roots))


def step_until_exit(engine, state, mode="stepExpr"):
    """Yield every suspension while stepping to completion."""
    while not isinstance(state, EngineExit):
        yield state
        state = engine.resume(mode)
    yield state


@pytest.fixture(scope="session")
def manifest():
    with open(fixture_path("manifest.json")) as fh:
        return json.load(fh)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion."""
    reports = []
    for status in ("passed", "failed", "error"):
        reports.extend(terminalreporter.stats.get(status, []))
    acceptance = sorted(
        (r for r in reports
         if getattr(r, "when", "call") == "call"
         and "test_acceptance" in r.nodeid),
        key=lambda r: r.nodeid)
    if not acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for r in acceptance:
        status = "PASS" if r.passed else "FAIL"
        name = r.nodeid.split("::")[-1]
        terminalreporter.write_line(f"{status}  {name}")


@pytest.fixture
def fixtures_dir():
    return FIXTURES
