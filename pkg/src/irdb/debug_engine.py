"""Source-level debugging core.

Tagging walks each function's instruction stream once: consecutive
instructions sharing one dbg location form a single statement region and
only the first carries the Statement tag, which yields expression-level
stepping.  Function entries (Root) are suspension points of their own:
stepping into a call, stop-on-entry and frame restart all report the
function's declaration location before its first statement runs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .debug_meta import DescriptorBuilder, SourceRegistry
from .interpreter import ExecutionState, make_int
from .ir_parser import parse_intrinsic_call
from .value_inspection import BindingTracker, render, resolve_symbol

STATEMENT = "statement"
ROOT = "root"
CALL = "call"


class InvalidFrame(Exception):
    pass


class CannotStep(Exception):
    """Stepping is impossible at the current position (source unavailable)."""


@dataclass
class ProgramTags:
    # instruction uid -> LocationDescriptor of its statement region start
    statements: dict = field(default_factory=dict)
    calls: set = field(default_factory=set)
    # function ir_name -> entry LocationDescriptor (None without debug info)
    roots: dict = field(default_factory=dict)

    def tags_for(self, uid):
        tags = set()
        if uid in self.statements:
            tags.add(STATEMENT)
        if uid in self.calls:
            tags.add(CALL)
        return tags


def tag_program(module, builder: DescriptorBuilder) -> ProgramTags:
    tags = ProgramTags()
    for fn in module.functions:
        if not fn.is_defined:
            continue
        root_loc = None
        if fn.subprogram_ref is not None:
            scope = builder.build_scope(module, fn.subprogram_ref)
            line, col = scope.entry or (1, 1)
            root_loc = builder.make_location(scope, line, col)
        tags.roots[fn.ir_name] = root_loc
        prev = None
        for ins in fn.instructions():
            if ins.kind == "call" and parse_intrinsic_call(ins) is not None:
                continue  # metadata-only instructions carry no tags
            if getattr(ins, "dbg_ref", None) is not None:
                loc = builder.build_location(module, ins.dbg_ref)
                if prev is None or not loc.same_position(prev):
                    tags.statements[ins.uid] = loc
                prev = loc
            if ins.kind == "call":
                callee = ins.operands[0]
                callee_fn = module.function(getattr(callee, "name", "")) \
                    if hasattr(callee, "name") else None
                if callee_fn is not None and callee_fn.subprogram_ref is not None:
                    tags.calls.add(ins.uid)
                elif not hasattr(callee, "name"):
                    # indirect call: may hit a guest handle or foreign callable
                    tags.calls.add(ins.uid)
    return tags


# ---------------------------------------------------------------------------
# Breakpoints


@dataclass
class Breakpoint:
    id: int
    file: str
    line: int
    column: int | None
    enabled: bool = True
    resolved: object = None  # LocationDescriptor


def _file_matches(requested: str, loc_file: str) -> bool:
    if not requested or not loc_file:
        return False
    if requested == loc_file:
        return True
    import os
    return os.path.basename(requested) == os.path.basename(loc_file)


# ---------------------------------------------------------------------------
# Suspension views


@dataclass
class StackFrameView:
    frame_id: int
    function_source_name: str
    location: object  # LocationDescriptor | None


@dataclass
class SuspendedState:
    reason: str  # entry | breakpoint | step | pause | trap
    description: str
    frames: list  # StackFrameView, top first
    breakpoint_id: int | None = None

    @property
    def location(self):
        return self.frames[0].location if self.frames else None


@dataclass
class EngineExit:
    code: int


@dataclass
class DebugScope:
    name: str  # "Local" | "<static>" | named-scope name
    variables: list  # (name, DisplayNode)


# ---------------------------------------------------------------------------
# Engine


class DebugEngine:
    """Drives one execution under debugger control.

    Owned by a single controller; the only cross-thread communication is
    the interrupt flag, checked at statement boundaries.
    """

    def __init__(self, module, host=None, registry: SourceRegistry = None,
                 output=None):
        self.module = module
        self.builder = DescriptorBuilder(registry)
        self.tags = tag_program(module, self.builder)
        self.tracker = BindingTracker(module, self.builder)
        self.state = ExecutionState(
            module, host=host, output=output,
            locator=lambda ref: self.builder.build_location(module, ref),
            binding_recorder=self.tracker.record)
        self.tracker.register_globals(self.state.global_addrs)
        self.breakpoints = []
        self._bp_ids = 0
        self.interrupt = threading.Event()
        self.abort = threading.Event()
        self.suspended = None
        self.exit_code = None

    # -- breakpoints

    def set_breakpoints(self, file, requests):
        """Replace all breakpoints of one file; returns them in request
        order.  Requests with no matching statement stay pending."""
        self.breakpoints = [bp for bp in self.breakpoints
                            if not _file_matches(file, bp.file)]
        out = []
        for req in requests:
            self._bp_ids += 1
            bp = Breakpoint(id=self._bp_ids, file=file,
                            line=req.get("line", 0),
                            column=req.get("column"),
                            enabled=req.get("enabled", True))
            bp.resolved = self._resolve_breakpoint(bp)
            self.breakpoints.append(bp)
            out.append(bp)
        return out

    def _resolve_breakpoint(self, bp):
        best = None
        for loc in self.tags.statements.values():
            if not _file_matches(bp.file, loc.file_name):
                continue
            if loc.line != bp.line:
                continue
            if bp.column is not None and loc.column < bp.column:
                continue
            if best is None or (loc.line, loc.column) < (best.line, best.column):
                best = loc
        return best

    def enable_breakpoint(self, bp_id, enabled):
        for bp in self.breakpoints:
            if bp.id == bp_id:
                bp.enabled = enabled
                return bp
        return None

    def _match_breakpoint(self, loc):
        for bp in self.breakpoints:
            if bp.enabled and bp.resolved is not None \
                    and bp.resolved.same_position(loc):
                return bp
        return None

    def statement_locations(self, file):
        """Resolved statement positions in one file (for UI column markers)."""
        seen = set()
        out = []
        for loc in self.tags.statements.values():
            if _file_matches(file, loc.file_name):
                key = (loc.line, loc.column)
                if key not in seen:
                    seen.add(key)
                    out.append(key)
        return sorted(out)

    def source_text(self, file):
        """The resolved text of a source file named by the program's debug
        info, or None when it is inaccessible."""
        candidates = list(self.tags.roots.values()) \
            + list(self.tags.statements.values())
        for loc in candidates:
            if loc is None:
                continue
            if _file_matches(file, loc.file_name):
                scope = loc.scope
                while scope is not None and scope.source_text is None:
                    scope = scope.parent
                if scope is not None and scope.source_text is not None:
                    return scope.source_text
        return None

    # -- launch / resume

    def launch(self, entry="main", args=(), stop_on_entry=False):
        fn = self.module.function(entry)
        if fn is None or not fn.is_defined:
            raise InvalidFrame(f"no entry function {entry!r}")
        int_args = []
        for a, (_, ty) in zip(args, fn.params):
            int_args.append(a if not isinstance(a, int)
                            else make_int(getattr(ty, "bits", 64), a))
        self.state.push_frame(fn, int_args)
        if stop_on_entry:
            return self._suspend("entry", "stopped on entry")
        return self.resume("continue", _initial=True)

    def check_stepping(self, mode):
        """Raise CannotStep when a step mode cannot run from the current
        suspension point (the original source is unavailable there)."""
        if mode in ("stepExpr", "stepInto", "stepOver", "stepOut"):
            if self.suspended is not None and self.suspended.reason == "trap":
                return
            cur = self.suspended.location if self.suspended else None
            if cur is not None and cur.resolved is None:
                raise CannotStep(
                    "source for the current position is not available")

    def resume(self, mode, _initial=False):
        """Run until the mode's predicate suspends execution, a breakpoint
        hits, the program exits, or a trap occurs."""
        if self.exit_code is not None:
            return EngineExit(self.exit_code)
        if self.suspended is not None and self.suspended.reason == "trap":
            return self._exit(1)
        self.check_stepping(mode)
        ref_loc = self.suspended.location if self.suspended else None
        ref_depth = len(self.state.frames)
        self.suspended = None
        state = self.state
        first = not _initial
        while True:
            if self.abort.is_set():
                return self._exit(0)
            site = state.next_site()
            if site.kind == "done":
                outcome = state.outcome
                if outcome.kind == "returned":
                    value = outcome.value
                    code = value.value & 0xFF if hasattr(value, "value") else 0
                    return self._exit(code)
                return self._suspend("trap", outcome.message)
            if not first:
                stop = self._check_stop(site, mode, ref_loc, ref_depth)
                if stop is not None:
                    return stop
            first = False
            state.advance()

    def _check_stop(self, site, mode, ref_loc, ref_depth):
        if site.kind == "entry":
            root_loc = self.tags.roots.get(site.frame.func.ir_name)
            if root_loc is None:
                return None
            if mode in ("stepExpr", "stepInto"):
                return self._suspend("step", "entered function")
            return None
        loc = self.tags.statements.get(site.instr.uid)
        if loc is None:
            return None
        if self.interrupt.is_set():
            self.interrupt.clear()
            return self._suspend("pause", "paused")
        bp = self._match_breakpoint(loc)
        if bp is not None:
            return self._suspend("breakpoint", f"breakpoint {bp.id}",
                                 breakpoint_id=bp.id)
        if mode == "continue":
            return None
        differs = ref_loc is None or not loc.same_position(ref_loc)
        if mode in ("stepExpr", "stepInto"):
            if differs:
                return self._suspend("step", "stepped")
        elif mode == "stepOver":
            if differs and site.depth <= ref_depth:
                return self._suspend("step", "stepped")
        elif mode == "stepOut":
            if site.depth < ref_depth:
                return self._suspend("step", "stepped")
        return None

    def pause(self):
        self.interrupt.set()

    # -- state inspection

    def current_location(self, frame_index=None):
        """Location of a live frame: the engine's suspension point for the
        top frame, the pending call site for callers."""
        frames = self.state.frames
        if not frames:
            return None
        if frame_index is None:
            frame_index = len(frames) - 1
        frame = frames[frame_index]
        if frame_index == len(frames) - 1:
            site = self.state.next_site()
            if site.kind == "entry":
                return self.tags.roots.get(frame.func.ir_name)
            if site.kind in ("instr", "term"):
                loc = self.tags.statements.get(site.instr.uid)
                if loc is not None:
                    return loc
            if frame.last_dbg_ref is not None:
                return self.builder.build_location(self.module,
                                                   frame.last_dbg_ref)
            return self.tags.roots.get(frame.func.ir_name)
        callee = frames[frame_index + 1]
        call = callee.call_instr
        if call is not None and call.dbg_ref is not None:
            return self.builder.build_location(self.module, call.dbg_ref)
        if frame.last_dbg_ref is not None:
            return self.builder.build_location(self.module, frame.last_dbg_ref)
        return None

    def build_stack(self):
        views = []
        frames = self.state.frames
        for i in range(len(frames) - 1, -1, -1):
            frame = frames[i]
            name = frame.func.ir_name.lstrip("@")
            if frame.func.subprogram_ref is not None:
                scope = self.builder.build_scope(self.module,
                                                 frame.func.subprogram_ref)
                if scope.source_name:
                    name = scope.source_name
            views.append(StackFrameView(
                frame_id=frame.frame_id,
                function_source_name=name,
                location=self.current_location(i)))
        return views

    def _suspend(self, reason, description, breakpoint_id=None):
        self.suspended = SuspendedState(
            reason=reason, description=description,
            frames=self.build_stack(), breakpoint_id=breakpoint_id)
        return self.suspended

    def _exit(self, code):
        self.exit_code = code
        self.suspended = None
        return EngineExit(code)

    def _find_frame(self, frame_id):
        for i, frame in enumerate(self.state.frames):
            if frame.frame_id == frame_id:
                return i, frame
        raise InvalidFrame(f"no live frame {frame_id}")

    # -- scopes

    def collect_scopes(self, frame_id):
        index, frame = self._find_frame(frame_id)
        loc = self.current_location(index)
        local_vars = []
        named = []
        static_vars = []
        seen_scopes = set()
        chain = list(loc.scope.chain()) if loc is not None and loc.scope else []
        for scope in chain:
            if id(scope) in seen_scopes:
                continue
            seen_scopes.add(id(scope))
            if scope.kind in ("block", "function"):
                for sym in scope.members:
                    entry = self._symbol_entry(frame, sym, loc)
                    if entry is not None:
                        local_vars.append(entry)
            elif scope.kind in ("named", "type"):
                members = []
                for sym in scope.members:
                    entry = self._symbol_entry(frame, sym, loc)
                    if entry is not None:
                        members.append(entry)
                named.append(DebugScope(name=scope.source_name,
                                        variables=members))
            elif scope.kind == "compilation_unit":
                for sym in scope.members:
                    entry = self._symbol_entry(frame, sym, loc)
                    if entry is not None:
                        static_vars.append(entry)
        scopes = [DebugScope(name="Local", variables=local_vars)]
        scopes.extend(named)
        scopes.append(DebugScope(name="<static>", variables=static_vars))
        return scopes

    def _symbol_entry(self, frame, symbol, loc):
        """The scope filter: dynamic symbols appear only when their
        declaration lexically precedes the suspension point and they
        resolve to a value; static symbols always appear."""
        if not symbol.is_static:
            if loc is None:
                return None
            decl = symbol.declared_at
            if (decl.line, decl.column) > (loc.line, loc.column):
                return None
        value = resolve_symbol(self.state, frame, symbol,
                               self.tracker.global_bindings)
        if value is None:
            if symbol.is_static:
                from .value_inspection import DisplayNode, NOT_AVAILABLE
                return (symbol.name, DisplayNode(NOT_AVAILABLE,
                                                 symbol.type.name))
            return None
        return (symbol.name, render(value, self.state.memory))

    # -- frame restart

    def restart_frame(self, frame_id):
        _, frame = self._find_frame(frame_id)
        self.state.pop_frames_above(frame)
        self.state.reset_frame(frame)
        self.state.outcome = None
        return self._suspend("step", "frame restarted")
