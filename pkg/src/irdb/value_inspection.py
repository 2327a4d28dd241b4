"""Source-level value reconstruction.

Bindings record where a source variable currently lives (a stack address,
an SSA register, or a constant).  An AbstractValue exposes whatever backs
the binding as a sequence of bits; a SourceValue interprets those bits
through a type descriptor, producing the display tree handed to debugger
front-ends.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .debug_meta import (ArrayTypeDesc, EnumTypeDesc, ForeignType,
                         MalformedMetadata, PointerType, PrimitiveType,
                         QualifiedType, StructTypeDesc, SubroutineType,
                         BOOL, CHAR, FLOAT, UNSIGNED_INT)
from .interpreter import (FnValue, ForeignValue, IntValue, PtrValue,
                          UndefValue)
from .ir_parser import parse_intrinsic_call

NOT_AVAILABLE = "<not available>"
INTEROP = "<interop value>"


# ---------------------------------------------------------------------------
# Bindings


@dataclass(eq=False)
class Binding:
    kind: str  # "constant" | "register" | "memory" | "undefined"
    value: object = None  # RuntimeValue | register name | address

    @classmethod
    def undefined(cls):
        return cls(kind="undefined")


class BindingTracker:
    """Owns binding maps: per-frame dynamic bindings plus the module-level
    static map for globals, which never needs run-time tracking."""

    def __init__(self, module, builder):
        self.module = module
        self.builder = builder
        self.global_bindings = {}
        self._finality = {}

    def register_globals(self, global_addrs):
        for g in self.module.globals:
            if g.dbg_ref is None:
                continue
            try:
                symbol = self.builder.build_symbol(self.module, g.dbg_ref)
            except MalformedMetadata:
                continue
            addr = global_addrs.get(g.name)
            if addr is not None:
                self.global_bindings[symbol] = Binding("memory", addr)

    def record(self, state, frame, instr, intrinsic):
        """Interpreter hook for dbg.declare / dbg.value calls."""
        try:
            symbol = self.builder.build_symbol(self.module,
                                               intrinsic.variable_ref)
        except MalformedMetadata:
            return
        if symbol in frame.snapshots:
            return
        if self._expression_ops(intrinsic):
            frame.bindings[symbol] = Binding.undefined()
            return
        operand = intrinsic.value_operand
        if intrinsic.intrinsic_kind == "declare":
            try:
                addr = state._as_addr(state.eval(frame, operand))
            except Exception:
                frame.bindings[symbol] = Binding.undefined()
                return
            binding = Binding("memory", addr)
        else:
            from .ir_model import Register
            if isinstance(operand, Register):
                binding = Binding("register", operand.name)
            else:
                try:
                    binding = Binding("constant", state.eval(frame, operand))
                except Exception:
                    binding = Binding.undefined()
        frame.bindings[symbol] = binding
        if intrinsic.variable_ref in self._final_refs(frame.func):
            frame.snapshots.add(symbol)

    def _expression_ops(self, intrinsic):
        if intrinsic.expression_ref is None:
            return False
        node = self.module.metadata.get(intrinsic.expression_ref)
        if node is None:
            return False
        return bool(node.attrs.get("elements"))

    def _final_refs(self, func):
        """Variables targeted by exactly one dbg intrinsic that sits in the
        entry block: their binding is established once per activation."""
        cached = self._finality.get(func.ir_name)
        if cached is not None:
            return cached
        counts = {}
        entry = set()
        for bi, block in enumerate(func.blocks):
            for ins in block.body:
                if ins.kind != "call":
                    continue
                intr = parse_intrinsic_call(ins)
                if intr is None:
                    continue
                counts[intr.variable_ref] = counts.get(intr.variable_ref, 0) + 1
                if bi == 0:
                    entry.add(intr.variable_ref)
        final = frozenset(ref for ref, c in counts.items()
                          if c == 1 and ref in entry)
        self._finality[func.ir_name] = final
        return final


# ---------------------------------------------------------------------------
# Abstract values


@dataclass(eq=False)
class AbstractValue:
    """Bit-addressable read view over a runtime value or a memory window."""

    backing: str  # "memory" | "value" | "foreign"
    memory: object = None
    address: int = 0
    byte_size: int = 0
    value: object = None

    def read_bits(self, bit_offset, bit_count):
        """The requested bits as an int, or None when unavailable."""
        if self.backing == "foreign":
            return None
        if self.backing == "value":
            v = self.value
            if isinstance(v, IntValue):
                raw, width = v.value, v.bits
            elif isinstance(v, PtrValue):
                raw, width = v.address, 64
            elif isinstance(v, UndefValue):
                raw, width = 0, 64
            else:
                return None
            if bit_offset + bit_count > width:
                return None
            return (raw >> bit_offset) & ((1 << bit_count) - 1)
        first = bit_offset // 8
        last = (bit_offset + bit_count + 7) // 8
        if last > self.byte_size:
            return None
        data = self.memory.peek(self.address + first, last - first)
        if data is None:
            return None
        raw = int.from_bytes(data, "little")
        return (raw >> (bit_offset - first * 8)) & ((1 << bit_count) - 1)

    def window(self, bit_offset, bit_size):
        """A nested view for a member at the given bit offset."""
        if self.backing == "memory" and bit_offset % 8 == 0:
            return AbstractValue(
                backing="memory", memory=self.memory,
                address=self.address + bit_offset // 8,
                byte_size=(bit_size + 7) // 8)
        return _SlicedValue(self, bit_offset, bit_size)

    @property
    def is_foreign(self):
        return self.backing == "foreign" or isinstance(self.value, ForeignValue)


class _SlicedValue(AbstractValue):
    """Member view over a register-backed aggregate."""

    def __init__(self, base, bit_offset, bit_size):
        super().__init__(backing=base.backing, memory=base.memory,
                         address=base.address, byte_size=base.byte_size,
                         value=base.value)
        self._base = base
        self._shift = bit_offset
        self._size = bit_size

    def read_bits(self, bit_offset, bit_count):
        if bit_offset + bit_count > self._size:
            return None
        return self._base.read_bits(self._shift + bit_offset, bit_count)


@dataclass(eq=False)
class SourceValue:
    """An abstract value interpreted through a type descriptor."""

    type: object  # TypeDescriptor
    storage: AbstractValue


@dataclass(eq=False)
class DisplayNode:
    display: str
    type_name: str
    children: list = field(default_factory=list)  # (name, SourceValue)


# ---------------------------------------------------------------------------
# Resolution and rendering


def resolve_symbol(state, frame, symbol, global_bindings=None):
    """Construct the SourceValue for a symbol in a frame, or None when the
    symbol has no defined value there."""
    binding = frame.bindings.get(symbol)
    if binding is None and global_bindings is not None:
        binding = global_bindings.get(symbol)
    if binding is None or binding.kind == "undefined":
        return None
    ty = symbol.type
    if binding.kind == "memory":
        storage = AbstractValue(backing="memory", memory=state.memory,
                                address=binding.value,
                                byte_size=max(1, (ty.bit_size + 7) // 8))
    elif binding.kind == "register":
        value = frame.regs.get(binding.value)
        if value is None:
            return None
        storage = _value_storage(state, value)
    else:
        storage = _value_storage(state, binding.value)
    return SourceValue(type=ty, storage=storage)


def _value_storage(state, value):
    if isinstance(value, (FnValue, ForeignValue)):
        if isinstance(value, ForeignValue):
            return AbstractValue(backing="foreign", value=value)
        token = state.memory.intern_handle(value)
        return AbstractValue(backing="value", memory=state.memory,
                             value=PtrValue(token))
    return AbstractValue(backing="value", memory=state.memory, value=value)


def render(source_value: SourceValue, memory) -> DisplayNode:
    """Pure rendering of a source value: display text, type name, children."""
    ty = source_value.type
    storage = source_value.storage
    if storage.is_foreign:
        return DisplayNode(INTEROP, ty.name)
    if isinstance(ty, QualifiedType):
        inner = render(SourceValue(ty.base, storage), memory)
        return DisplayNode(inner.display, ty.name, inner.children)
    if isinstance(ty, PrimitiveType):
        return DisplayNode(_render_primitive(ty, storage), ty.name)
    if isinstance(ty, EnumTypeDesc):
        bits = storage.read_bits(0, ty.bit_size)
        if bits is None:
            return DisplayNode(NOT_AVAILABLE, ty.name)
        signed = _to_signed(bits, ty.bit_size)
        label = ty.labels.get(signed, ty.labels.get(bits))
        return DisplayNode(label if label is not None else str(signed), ty.name)
    if isinstance(ty, PointerType):
        return _render_pointer(ty, storage, memory)
    if isinstance(ty, StructTypeDesc):
        children = [(name, SourceValue(mty, storage.window(off, mty.bit_size)))
                    for name, mty, off in ty.members]
        if storage.backing == "memory":
            display = hex(storage.address)
        else:
            display = ty.name
        return DisplayNode(display, ty.name, children)
    if isinstance(ty, ArrayTypeDesc):
        elem = ty.element
        stride = elem.bit_size
        children = [(f"[{i}]", SourceValue(elem, storage.window(i * stride,
                                                                stride)))
                    for i in range(ty.length)]
        return DisplayNode(ty.name, ty.name, children)
    if isinstance(ty, SubroutineType):
        return DisplayNode(_render_fn(storage, memory), ty.name)
    if isinstance(ty, ForeignType):
        return DisplayNode(INTEROP, ty.name)
    return DisplayNode(NOT_AVAILABLE, ty.name)


def _render_primitive(ty, storage):
    bits = storage.read_bits(0, ty.bit_size)
    if bits is None:
        return NOT_AVAILABLE
    enc = ty.encoding
    if enc == BOOL:
        return "true" if bits else "false"
    if enc == CHAR:
        code = bits & 0xFF
        return f"'{chr(code)}'" if 32 <= code < 127 else str(code)
    if enc == FLOAT:
        if ty.bit_size == 32:
            return repr(struct.unpack("<f", bits.to_bytes(4, "little"))[0])
        if ty.bit_size == 64:
            return repr(struct.unpack("<d", bits.to_bytes(8, "little"))[0])
        return NOT_AVAILABLE
    if enc == UNSIGNED_INT:
        return str(bits)
    return str(_to_signed(bits, ty.bit_size))


def _render_fn(storage, memory):
    bits = storage.read_bits(0, 64)
    if bits is None:
        return NOT_AVAILABLE
    handle = memory.handle_at(bits) if memory is not None else None
    if isinstance(handle, ForeignValue):
        return INTEROP
    if isinstance(handle, FnValue):
        return f"<function {handle.name.lstrip('@')}>"
    return hex(bits)


def _render_pointer(ty, storage, memory):
    bits = storage.read_bits(0, max(ty.bit_size, 64))
    if bits is None:
        bits = storage.read_bits(0, ty.bit_size)
    if bits is None:
        return DisplayNode(NOT_AVAILABLE, ty.name)
    handle = memory.handle_at(bits) if memory is not None else None
    if isinstance(handle, ForeignValue):
        return DisplayNode(INTEROP, ty.name)
    if isinstance(handle, FnValue):
        return DisplayNode(f"<function {handle.name.lstrip('@')}>", ty.name)
    pointee = ty.pointee
    if ty.reference:
        # references read through to the referenced storage transparently
        if bits and memory is not None and pointee is not None:
            target = AbstractValue(backing="memory", memory=memory,
                                   address=bits,
                                   byte_size=max(1, (pointee.bit_size + 7) // 8))
            inner = render(SourceValue(pointee, target), memory)
            return DisplayNode(inner.display, ty.name, inner.children)
        return DisplayNode(NOT_AVAILABLE, ty.name)
    children = []
    if bits and memory is not None and pointee is not None \
            and pointee.bit_size > 0 \
            and memory.is_live(bits, max(1, (pointee.bit_size + 7) // 8)):
        target = AbstractValue(backing="memory", memory=memory, address=bits,
                               byte_size=max(1, (pointee.bit_size + 7) // 8))
        children.append(("*", SourceValue(pointee, target)))
    return DisplayNode(hex(bits), ty.name, children)


def _to_signed(raw, bits):
    if bits <= 0:
        return raw
    if raw >= 1 << (bits - 1):
        return raw - (1 << bits)
    return raw
