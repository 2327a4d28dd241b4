"""Block-dispatch execution of an IrModule over simulated memory.

The machine is pull-driven so a debugger can own the loop: next_site()
reports what is about to execute (a fresh frame entry, an instruction, or
a terminator) and advance() executes exactly that.  call_function() wraps
the loop for plain runs.

Guest calls push frames onto an explicit stack; Python-level recursion is
never used for guest recursion, which keeps frame restart and deep call
chains cheap.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from . import layout
from .ir_model import (
    FunctionRef, GlobalRef, IntConst, IntType, IrError, MetaValueOperand,
    MetadataRef, NullConst, PtrType, Register, StructType, Undef,
    AggregateInit, ArrayType, BytesInit, ZeroInit,
)
from .ir_parser import parse_intrinsic_call


class GuestTrap(IrError):
    """Raised while executing guest code; converted to a trapped outcome."""

    def __init__(self, message):
        super().__init__(message)
        self.message = message


class InterpreterBug(IrError):
    """Internal invariant violation (malformed input slipped past parsing)."""


# ---------------------------------------------------------------------------
# Runtime values


@dataclass(frozen=True)
class IntValue:
    bits: int
    value: int  # reduced modulo 2**bits (raw, unsigned representation)

    def signed(self):
        return to_signed(self.value, self.bits)


@dataclass(frozen=True)
class PtrValue:
    address: int


@dataclass(frozen=True)
class FnValue:
    name: str  # '@'-prefixed guest function name


@dataclass(frozen=True)
class ForeignValue:
    """Opaque value received from the host; payload may be callable."""

    payload: object
    label: str = "foreign"


@dataclass(frozen=True)
class UndefValue:
    pass


UNDEF = UndefValue()


def to_signed(raw, bits):
    if raw >= 1 << (bits - 1):
        return raw - (1 << bits)
    return raw


def make_int(bits, value):
    return IntValue(bits, value & ((1 << bits) - 1))


# ---------------------------------------------------------------------------
# Memory

_REGION_BASES = {"globals": 0x10000, "heap": 0x50000000,
                 "stack": 0x7F0000000000}
_HANDLE_BASE = 0xF000000000000000


class Allocation:
    __slots__ = ("base", "data", "live", "region")

    def __init__(self, base, size, region):
        self.base = base
        self.data = bytearray(size)
        self.live = True
        self.region = region


class Memory:
    """Flat byte-addressable space split into globals, stack and heap regions.

    Address 0 is the null pointer and is never allocated.  Non-byte values
    (guest function handles, foreign values) stored to memory are written as
    tokens from a reserved address range and tracked in a side table.
    """

    def __init__(self):
        self._allocs = {}
        self._bases = []
        self._next = dict(_REGION_BASES)
        self._handles = {}
        self._next_handle = _HANDLE_BASE + 16

    def allocate(self, size, region):
        size = max(1, size)
        base = self._next[region]
        self._next[region] = (base + size + 15) // 16 * 16 + 16
        alloc = Allocation(base, size, region)
        self._allocs[base] = alloc
        bisect.insort(self._bases, base)
        return base

    def release(self, addr):
        alloc = self._allocs.get(addr)
        if alloc is None:
            raise InterpreterBug(f"release of unknown allocation {addr:#x}")
        alloc.live = False

    def free(self, addr):
        if addr == 0:
            return
        alloc = self._allocs.get(addr)
        if alloc is None or alloc.region != "heap":
            raise GuestTrap(f"free of invalid pointer {addr:#x}")
        if not alloc.live:
            raise GuestTrap(f"double free of {addr:#x}")
        alloc.live = False

    def _find(self, addr, count):
        if addr == 0:
            raise GuestTrap("null pointer access")
        i = bisect.bisect_right(self._bases, addr) - 1
        if i >= 0:
            alloc = self._allocs[self._bases[i]]
            offset = addr - alloc.base
            if offset + count <= len(alloc.data):
                if not alloc.live:
                    raise GuestTrap(f"access to dead allocation {addr:#x}")
                return alloc, offset
        raise GuestTrap(f"out-of-bounds access at {addr:#x}")

    def read(self, addr, count):
        alloc, offset = self._find(addr, count)
        return bytes(alloc.data[offset:offset + count])

    def write(self, addr, data):
        alloc, offset = self._find(addr, len(data))
        alloc.data[offset:offset + len(data)] = data

    def peek(self, addr, count):
        """Bounds-checked read that reports failure instead of trapping."""
        try:
            return self.read(addr, count)
        except GuestTrap:
            return None

    def is_live(self, addr, count=1):
        try:
            self._find(addr, count)
            return True
        except GuestTrap:
            return False

    def intern_handle(self, value):
        for token, existing in self._handles.items():
            if existing is value or existing == value:
                return token
        token = self._next_handle
        self._next_handle += 16
        self._handles[token] = value
        return token

    def handle_at(self, token):
        return self._handles.get(token)


def read_memory(memory: Memory, address: int, byte_count: int) -> bytes:
    return memory.read(address, byte_count)


def write_memory(memory: Memory, address: int, data: bytes) -> None:
    memory.write(address, data)


# ---------------------------------------------------------------------------
# Frames and outcomes


@dataclass
class Frame:
    func: object
    args: tuple  # original argument values, never mutated (frame restart)
    regs: dict = field(default_factory=dict)
    allocs: list = field(default_factory=list)
    block: object = None
    ip: int = 0
    at_entry: bool = True
    bindings: dict = field(default_factory=dict)  # symbol -> Binding
    snapshots: set = field(default_factory=set)  # effectively-final symbols done
    last_dbg_ref: int | None = None
    call_instr: object = None  # caller's call instruction, None for the root
    frame_id: int = 0

    def bind_args(self):
        self.regs.clear()
        if len(self.args) != len(self.func.params):
            raise GuestTrap(
                f"{self.func.ir_name} called with {len(self.args)} arguments, "
                f"expected {len(self.func.params)}")
        for (name, _ty), value in zip(self.func.params, self.args):
            self.regs[name] = value


@dataclass
class ExecutionOutcome:
    kind: str  # "returned" | "trapped"
    value: object = None
    message: str = ""
    stack: list = field(default_factory=list)  # LocationDescriptors, callee first


@dataclass
class Site:
    """What the machine will execute next."""

    kind: str  # "entry" | "instr" | "term" | "done"
    frame: Frame | None = None
    instr: object = None
    depth: int = 0


class ExecutionState:
    """One program execution: module, memory, frame stack, outcome.

    Owned by exactly one controller at a time; not thread-safe by itself.
    """

    def __init__(self, module, host=None, output=None, locator=None,
                 binding_recorder=None):
        self.module = module
        self.memory = Memory()
        self.host = host or {}
        self.output = output or (lambda text: None)
        self.locator = locator  # dbg_ref -> LocationDescriptor
        self.binding_recorder = binding_recorder
        self.frames = []
        self.outcome = None
        self._next_frame_id = 1
        self.global_addrs = {}
        self._init_globals()

    # -- program state setup

    def _init_globals(self):
        for g in self.module.globals:
            size = layout.size_of(g.type)
            self.global_addrs[g.name] = self.memory.allocate(size, "globals")
        for g in self.module.globals:
            addr = self.global_addrs[g.name]
            self.memory.write(addr, self._init_bytes(g.type, g.initializer))

    def _init_bytes(self, ty, init):
        size = layout.size_of(ty)
        if init is None or isinstance(init, (ZeroInit, Undef)):
            return bytes(size)
        if isinstance(init, BytesInit):
            return init.data.ljust(size, b"\0")[:size]
        if isinstance(init, IntConst):
            return (init.value & ((1 << (size * 8)) - 1)).to_bytes(size, "little")
        if isinstance(init, NullConst):
            return bytes(size)
        if isinstance(init, (GlobalRef, FunctionRef)):
            target = self.global_addrs.get(init.name)
            if target is None:
                fn = self.module.function(init.name)
                if fn is None:
                    raise GuestTrap(f"initializer references unknown {init.name}")
                target = self.memory.intern_handle(FnValue(init.name))
            return target.to_bytes(8, "little")
        if isinstance(init, AggregateInit):
            out = bytearray(size)
            if isinstance(ty, ArrayType):
                stride = layout.size_of(ty.element)
                for i, el in enumerate(init.elements):
                    out[i * stride:(i + 1) * stride] = self._init_bytes(ty.element, el)
            elif isinstance(ty, StructType):
                for i, el in enumerate(init.elements):
                    off = layout.field_offset(ty, i)
                    fty = ty.fields[i]
                    out[off:off + layout.size_of(fty)] = self._init_bytes(fty, el)
            else:
                raise GuestTrap(f"aggregate initializer for {ty}")
            return bytes(out)
        raise GuestTrap(f"unsupported initializer {init!r}")

    # -- frame management

    def push_frame(self, func, args, call_instr=None):
        if not func.is_defined or not func.blocks:
            raise GuestTrap(f"call to undefined function {func.ir_name}")
        frame = Frame(func=func, args=tuple(args), call_instr=call_instr,
                      frame_id=self._next_frame_id)
        self._next_frame_id += 1
        frame.block = func.blocks[0]
        frame.bind_args()
        self.frames.append(frame)
        return frame

    def reset_frame(self, frame):
        """Drop a frame's registers, bindings and allocations and point it
        back at its entry; the retained original arguments are rebound."""
        for addr in frame.allocs:
            self.memory.release(addr)
        frame.allocs.clear()
        frame.bindings.clear()
        frame.snapshots.clear()
        frame.bind_args()
        frame.block = frame.func.blocks[0]
        frame.ip = 0
        frame.at_entry = True
        frame.last_dbg_ref = None

    def pop_frames_above(self, frame):
        while self.frames and self.frames[-1] is not frame:
            dead = self.frames.pop()
            for addr in dead.allocs:
                self.memory.release(addr)

    # -- the dispatch loop

    def next_site(self):
        if self.outcome is not None or not self.frames:
            return Site("done")
        frame = self.frames[-1]
        if frame.at_entry:
            return Site("entry", frame, depth=len(self.frames))
        if frame.ip < len(frame.block.body):
            return Site("instr", frame, frame.block.body[frame.ip],
                        depth=len(self.frames))
        return Site("term", frame, frame.block.terminator,
                    depth=len(self.frames))

    def advance(self):
        site = self.next_site()
        if site.kind == "done":
            return
        try:
            self._advance(site)
        except GuestTrap as trap:
            self.outcome = ExecutionOutcome(
                kind="trapped", message=trap.message, stack=self.trap_stack())

    def _advance(self, site):
        frame = site.frame
        if site.kind == "entry":
            frame.at_entry = False
            return
        ins = site.instr
        if ins.dbg_ref is not None:
            frame.last_dbg_ref = ins.dbg_ref
        if site.kind == "term":
            self._execute_terminator(frame, ins)
        else:
            self._execute(frame, ins)

    def run(self):
        while self.outcome is None:
            self.advance()
        return self.outcome

    def trap_stack(self):
        stack = []
        for frame in reversed(self.frames):
            loc = None
            if self.locator is not None and frame.last_dbg_ref is not None:
                loc = self.locator(frame.last_dbg_ref)
            stack.append((frame, loc))
        return stack

    # -- evaluation

    def eval(self, frame, ref):
        if isinstance(ref, IntConst):
            return make_int(ref.bits, ref.value)
        if isinstance(ref, NullConst):
            return PtrValue(0)
        if isinstance(ref, Register):
            try:
                return frame.regs[ref.name]
            except KeyError:
                raise InterpreterBug(
                    f"read of unwritten register {ref.name} in "
                    f"{frame.func.ir_name}") from None
        if isinstance(ref, (GlobalRef, FunctionRef)):
            addr = self.global_addrs.get(ref.name)
            if addr is not None:
                return PtrValue(addr)
            if self.module.function(ref.name) is not None:
                return FnValue(ref.name)
            if ref.name in self.host:
                return FnValue(ref.name)
            raise GuestTrap(f"reference to undefined symbol {ref.name}")
        if isinstance(ref, Undef):
            return UNDEF
        raise InterpreterBug(f"cannot evaluate operand {ref!r}")

    def _as_int(self, value, bits):
        if isinstance(value, IntValue):
            return value.value & ((1 << bits) - 1)
        if isinstance(value, UndefValue):
            return 0
        if isinstance(value, PtrValue):
            return value.address & ((1 << bits) - 1)
        raise GuestTrap(f"expected an integer value, got {value!r}")

    def _as_addr(self, value):
        if isinstance(value, PtrValue):
            return value.address
        if isinstance(value, IntValue):
            return value.value
        if isinstance(value, UndefValue):
            return 0
        if isinstance(value, (FnValue, ForeignValue)):
            return self.memory.intern_handle(value)
        raise GuestTrap(f"expected a pointer value, got {value!r}")

    # -- instruction execution

    def _execute(self, frame, ins):
        kind = ins.kind
        if kind == "call":
            self._execute_call(frame, ins)
            return
        handler = _HANDLERS[kind]
        result = handler(self, frame, ins)
        if ins.result is not None:
            frame.regs[ins.result] = result
        frame.ip += 1

    def _execute_terminator(self, frame, term):
        if term.kind == "ret":
            value = self.eval(frame, term.operands[0]) if term.operands else None
            self._return_from(frame, value)
            return
        if term.kind == "br":
            block_transfer(self, frame, frame.block.label, term.labels[0])
            return
        if term.kind == "condbr":
            cond = self._as_int(self.eval(frame, term.operands[0]), 1)
            target = term.labels[0] if cond else term.labels[1]
            block_transfer(self, frame, frame.block.label, target)
            return
        if term.kind == "unreachable":
            raise GuestTrap("unreachable executed")
        raise InterpreterBug(f"unknown terminator {term.kind}")

    def _return_from(self, frame, value):
        self.frames.pop()
        for addr in frame.allocs:
            self.memory.release(addr)
        if not self.frames:
            self.outcome = ExecutionOutcome(kind="returned", value=value)
            return
        caller = self.frames[-1]
        call = caller.block.body[caller.ip]
        if call.result is not None:
            caller.regs[call.result] = value if value is not None else UNDEF
        caller.ip += 1

    def _execute_call(self, frame, ins):
        intrinsic = parse_intrinsic_call(ins)
        if intrinsic is not None:
            if self.binding_recorder is not None:
                self.binding_recorder(self, frame, ins, intrinsic)
            frame.ip += 1
            return
        callee = ins.operands[0]
        args = [self.eval(frame, a) for a in ins.operands[1:]
                if not isinstance(a, (MetadataRef, MetaValueOperand))]
        target = None
        if isinstance(callee, FunctionRef):
            fn = self.module.function(callee.name)
            if fn is not None and fn.is_defined:
                self.push_frame(fn, args, call_instr=ins)
                return
            host_fn = self.host.get(callee.name)
            if host_fn is not None:
                result = host_fn(self, args)
                if ins.result is not None:
                    frame.regs[ins.result] = result if result is not None else UNDEF
                frame.ip += 1
                return
            raise GuestTrap(f"call to undefined function {callee.name}")
        # indirect call through a register value
        target = self.eval(frame, callee)
        if isinstance(target, PtrValue):
            handle = self.memory.handle_at(target.address)
            if handle is not None:
                target = handle
        if isinstance(target, FnValue):
            fn = self.module.function(target.name)
            if fn is not None and fn.is_defined:
                self.push_frame(fn, args, call_instr=ins)
                return
            host_fn = self.host.get(target.name)
            if host_fn is not None:
                result = host_fn(self, args)
                if ins.result is not None:
                    frame.regs[ins.result] = result if result is not None else UNDEF
                frame.ip += 1
                return
            raise GuestTrap(f"call through dangling function handle {target.name}")
        if isinstance(target, ForeignValue) and callable(target.payload):
            result = target.payload(self, args)
            if ins.result is not None:
                frame.regs[ins.result] = result if result is not None else UNDEF
            frame.ip += 1
            return
        raise GuestTrap("indirect call target is not callable")


# -- instruction handlers


def _exec_alloca(state, frame, ins):
    size = layout.size_of(ins.type)
    addr = state.memory.allocate(size, "stack")
    frame.allocs.append(addr)
    return PtrValue(addr)


def _decode_loaded(state, ty, data):
    raw = int.from_bytes(data, "little")
    if isinstance(ty, IntType):
        return make_int(ty.bits, raw)
    if isinstance(ty, PtrType):
        handle = state.memory.handle_at(raw)
        if handle is not None:
            return handle
        return PtrValue(raw)
    raise GuestTrap(f"cannot load a value of type {ty}")


def _exec_load(state, frame, ins):
    addr = state._as_addr(state.eval(frame, ins.operands[0]))
    size = layout.size_of(ins.type)
    return _decode_loaded(state, ins.type, state.memory.read(addr, size))


def _encode_stored(state, ty, value):
    size = layout.size_of(ty)
    if isinstance(value, IntValue):
        return (value.value & ((1 << (size * 8)) - 1)).to_bytes(size, "little")
    if isinstance(value, PtrValue):
        return value.address.to_bytes(size, "little")
    if isinstance(value, (FnValue, ForeignValue)):
        token = state.memory.intern_handle(value)
        return token.to_bytes(size, "little")
    if isinstance(value, UndefValue):
        return bytes(size)
    raise GuestTrap(f"cannot store value {value!r}")


def _exec_store(state, frame, ins):
    value = state.eval(frame, ins.operands[0])
    addr = state._as_addr(state.eval(frame, ins.operands[1]))
    state.memory.write(addr, _encode_stored(state, ins.type, value))
    return None


def _exec_binop(state, frame, ins):
    bits = ins.type.bits
    a = state._as_int(state.eval(frame, ins.operands[0]), bits)
    b = state._as_int(state.eval(frame, ins.operands[1]), bits)
    op = ins.op
    if op == "add":
        r = a + b
    elif op == "sub":
        r = a - b
    elif op == "mul":
        r = a * b
    elif op == "sdiv":
        r = _sdiv(a, b, bits)
    elif op == "srem":
        r = _srem(a, b, bits)
    elif op == "and":
        r = a & b
    elif op == "or":
        r = a | b
    elif op == "xor":
        r = a ^ b
    elif op == "shl":
        r = 0 if b >= bits else a << b
    elif op == "lshr":
        r = 0 if b >= bits else a >> b
    elif op == "ashr":
        sa = to_signed(a, bits)
        r = (sa >> min(b, bits - 1))
    else:
        raise InterpreterBug(f"unknown binary op {op}")
    return make_int(bits, r)


def _sdiv(a, b, bits):
    sa, sb = to_signed(a, bits), to_signed(b, bits)
    if sb == 0:
        raise GuestTrap("division by zero")
    if sa == -(1 << (bits - 1)) and sb == -1:
        raise GuestTrap("signed division overflow")
    q = abs(sa) // abs(sb)
    return q if (sa < 0) == (sb < 0) else -q


def _srem(a, b, bits):
    sa, sb = to_signed(a, bits), to_signed(b, bits)
    if sb == 0:
        raise GuestTrap("remainder by zero")
    if sa == -(1 << (bits - 1)) and sb == -1:
        raise GuestTrap("signed remainder overflow")
    return sa - _sdiv(a, b, bits) * sb


def _exec_icmp(state, frame, ins):
    ty = ins.aux_type
    bits = ty.bits if isinstance(ty, IntType) else 64
    av = state.eval(frame, ins.operands[0])
    bv = state.eval(frame, ins.operands[1])
    a = state._as_addr(av) if isinstance(av, (PtrValue, FnValue, ForeignValue)) \
        else state._as_int(av, bits)
    b = state._as_addr(bv) if isinstance(bv, (PtrValue, FnValue, ForeignValue)) \
        else state._as_int(bv, bits)
    pred = ins.op
    if pred in ("slt", "sle", "sgt", "sge"):
        a, b = to_signed(a, bits), to_signed(b, bits)
    result = {
        "eq": a == b, "ne": a != b,
        "slt": a < b, "sle": a <= b, "sgt": a > b, "sge": a >= b,
        "ult": a < b, "ule": a <= b, "ugt": a > b, "uge": a >= b,
    }[pred]
    return make_int(1, int(result))


def _exec_cast(state, frame, ins):
    v = state.eval(frame, ins.operands[0])
    op = ins.op
    if op == "bitcast":
        return v
    if op == "ptrtoint":
        return make_int(ins.type.bits, state._as_addr(v))
    if op == "inttoptr":
        return PtrValue(state._as_int(v, 64))
    src_bits = ins.aux_type.bits if isinstance(ins.aux_type, IntType) else 64
    raw = state._as_int(v, src_bits)
    if op == "zext":
        return make_int(ins.type.bits, raw)
    if op == "sext":
        return make_int(ins.type.bits, to_signed(raw, src_bits))
    if op == "trunc":
        return make_int(ins.type.bits, raw)
    raise InterpreterBug(f"unknown cast {op}")


def _exec_select(state, frame, ins):
    cond = state._as_int(state.eval(frame, ins.operands[0]), 1)
    return state.eval(frame, ins.operands[1 if cond else 2])


def _exec_gep(state, frame, ins):
    base = state._as_addr(state.eval(frame, ins.operands[0]))
    ty = ins.aux_type
    indices = ins.operands[1:]
    if not indices:
        return PtrValue(base)
    first = state._as_int(state.eval(frame, indices[0]), 64)
    offset = to_signed(first, 64) * layout.size_of(ty)
    for idx in indices[1:]:
        if isinstance(ty, StructType):
            if not isinstance(idx, IntConst):
                raise GuestTrap("struct getelementptr index must be constant")
            step, ty = layout.element_offset(ty, idx.value)
        elif isinstance(ty, ArrayType):
            i = to_signed(state._as_int(state.eval(frame, idx), 64), 64)
            ty = ty.element
            step = i * layout.size_of(ty)
        else:
            raise GuestTrap(f"cannot index into {ty}")
        offset += step
    return PtrValue(base + offset)


_HANDLERS = {
    "alloca": _exec_alloca,
    "load": _exec_load,
    "store": _exec_store,
    "binop": _exec_binop,
    "icmp": _exec_icmp,
    "cast": _exec_cast,
    "select": _exec_select,
    "getelementptr": _exec_gep,
}


# ---------------------------------------------------------------------------
# Phi resolution


def block_transfer(state, frame, from_label, to_label):
    """Transfer control between blocks, evaluating all phis of the target
    simultaneously against the pre-transfer register file."""
    target = frame.func.block(to_label)
    staged = []
    for phi in target.phis:
        try:
            ref = phi.incoming[from_label]
        except KeyError:
            raise InterpreterBug(
                f"phi {phi.result} has no incoming value for %{from_label}")
        staged.append((phi.result, state.eval(frame, ref)))
    for name, value in staged:
        frame.regs[name] = value
    frame.block = target
    frame.ip = 0


# ---------------------------------------------------------------------------
# Whole-call convenience


def call_function(state: ExecutionState, function_name: str, args) -> ExecutionOutcome:
    """Execute one function to completion and return its outcome."""
    fn = state.module.function(function_name)
    if fn is None or not fn.is_defined:
        host_fn = state.host.get(
            function_name if function_name.startswith("@") else "@" + function_name)
        if host_fn is not None:
            return ExecutionOutcome(kind="returned", value=host_fn(state, list(args)))
        return ExecutionOutcome(kind="trapped",
                                message=f"call to undefined function {function_name}",
                                stack=[])
    state.outcome = None
    state.push_frame(fn, list(args))
    return state.run()
