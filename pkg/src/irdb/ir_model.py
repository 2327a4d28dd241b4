"""In-memory representation of a parsed LLVM-IR module.

The model is deliberately small: integer/pointer/aggregate types, SSA
instructions grouped into basic blocks, and a numbered metadata table that
carries debug information verbatim.  Everything here is immutable after
parsing and safe to share between concurrent readers.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class IrError(Exception):
    """Base class for errors raised by this package."""


class UnknownMetadataId(IrError):
    def __init__(self, ident):
        super().__init__(f"unknown metadata id !{ident}")
        self.ident = ident


# ---------------------------------------------------------------------------
# Types


class IrType:
    """Base class for IR-level types."""

    __slots__ = ()


@dataclass(frozen=True)
class IntType(IrType):
    bits: int

    def __str__(self):
        return f"i{self.bits}"


@dataclass(frozen=True)
class PtrType(IrType):
    # pointee is None for opaque `ptr`
    pointee: IrType | None = None

    def __str__(self):
        return "ptr" if self.pointee is None else f"{self.pointee}*"


@dataclass(frozen=True)
class ArrayType(IrType):
    count: int
    element: IrType

    def __str__(self):
        return f"[{self.count} x {self.element}]"


@dataclass(frozen=True)
class StructType(IrType):
    fields: tuple[IrType, ...]
    packed: bool = False
    name: str | None = None

    def __str__(self):
        if self.name is not None:
            return self.name
        inner = ", ".join(str(f) for f in self.fields)
        return f"<{{{inner}}}>" if self.packed else f"{{{inner}}}"


@dataclass(frozen=True)
class VoidType(IrType):
    def __str__(self):
        return "void"


@dataclass(frozen=True)
class FuncType(IrType):
    ret: IrType
    params: tuple[IrType, ...]
    varargs: bool = False

    def __str__(self):
        parts = [str(p) for p in self.params]
        if self.varargs:
            parts.append("...")
        return f"{self.ret} ({', '.join(parts)})"


@dataclass(frozen=True)
class MetadataType(IrType):
    def __str__(self):
        return "metadata"


VOID = VoidType()
I1 = IntType(1)
I8 = IntType(8)
I32 = IntType(32)
I64 = IntType(64)
PTR = PtrType()
METADATA = MetadataType()


# ---------------------------------------------------------------------------
# Value references (instruction operands)


class ValueRef:
    __slots__ = ()


@dataclass(frozen=True)
class IntConst(ValueRef):
    value: int
    bits: int

    def __post_init__(self):
        lo = -(1 << (self.bits - 1)) if self.bits > 1 else -1
        if not lo <= self.value < (1 << self.bits):
            raise IrError(f"constant {self.value} does not fit in i{self.bits}")


@dataclass(frozen=True)
class NullConst(ValueRef):
    pass


@dataclass(frozen=True)
class Register(ValueRef):
    name: str  # includes the leading '%'


@dataclass(frozen=True)
class GlobalRef(ValueRef):
    name: str  # includes the leading '@'


@dataclass(frozen=True)
class FunctionRef(ValueRef):
    name: str  # includes the leading '@'


@dataclass(frozen=True)
class MetadataRef(ValueRef):
    ident: int


@dataclass(frozen=True)
class Undef(ValueRef):
    pass


@dataclass(frozen=True)
class MetaValueOperand(ValueRef):
    """A regular value passed in a metadata position of a dbg intrinsic."""

    inner_type: IrType
    inner: ValueRef


# Global initializers beyond plain constants.


@dataclass(frozen=True)
class ZeroInit:
    pass


@dataclass(frozen=True)
class BytesInit:
    data: bytes


@dataclass(frozen=True)
class AggregateInit:
    elements: tuple


# ---------------------------------------------------------------------------
# Metadata


@dataclass(frozen=True)
class MetaWords:
    """Bareword metadata attribute value, e.g. DW_ATE_signed or flag unions.

    The raw spelling is preserved; consumers match on substrings.
    """

    text: str


@dataclass
class MetadataNode:
    """One numbered metadata node.

    kind and attribute names are kept verbatim from the source text;
    tolerant accessors live in debug_meta.  Plain tuple nodes use kind
    "tuple" with a single "elements" attribute.
    """

    kind: str
    attrs: dict
    distinct: bool = False

    def get(self, name, default=None):
        return self.attrs.get(name, default)


# ---------------------------------------------------------------------------
# Instructions

BINARY_OPS = ("add", "sub", "mul", "sdiv", "srem", "and", "or", "xor",
              "shl", "ashr", "lshr")
ICMP_PREDICATES = ("eq", "ne", "slt", "sle", "sgt", "sge",
                   "ult", "ule", "ugt", "uge")
CAST_OPS = ("zext", "sext", "trunc", "bitcast", "ptrtoint", "inttoptr")


@dataclass
class Instruction:
    """A non-phi, non-terminator instruction.

    kind: alloca | load | store | binop | icmp | call | getelementptr |
          cast | select
    op:   sub-operation for binop/icmp/cast, else None
    type: result type (loaded type for load, stored value type for store,
          allocated type for alloca)
    aux_type: gep source element type / cast source type, else None
    """

    kind: str
    operands: list
    type: IrType
    op: str | None = None
    result: str | None = None
    aux_type: IrType | None = None
    # call: [arg types]; getelementptr: [index types]; parallel to the
    # operand list minus the callee/base
    operand_types: list | None = None
    dbg_ref: int | None = None
    uid: int = field(default=-1, compare=False)


@dataclass
class PhiInstruction:
    result: str
    type: IrType
    incoming: dict  # predecessor label -> ValueRef
    uid: int = field(default=-1, compare=False)


@dataclass
class Terminator:
    kind: str  # br | condbr | ret | unreachable
    operands: list  # condbr: [cond]; ret: [value] or []
    labels: list  # br: [dest]; condbr: [then, else]
    dbg_ref: int | None = None
    uid: int = field(default=-1, compare=False)

    @property
    def successors(self):
        return list(self.labels)


@dataclass
class BasicBlock:
    label: str
    phis: list
    body: list
    terminator: Terminator


@dataclass
class IrFunction:
    ir_name: str  # includes '@'; linker-level, possibly mangled
    ret_type: IrType
    params: list  # (register name, IrType)
    blocks: list
    subprogram_ref: int | None = None
    varargs: bool = False
    is_defined: bool = True

    def block(self, label):
        for b in self.blocks:
            if b.label == label:
                return b
        raise IrError(f"no block {label} in {self.ir_name}")

    def instructions(self):
        """All non-phi instructions in stream order, terminators included."""
        for b in self.blocks:
            yield from b.body
            yield b.terminator


@dataclass
class GlobalVariable:
    name: str  # includes '@'
    type: IrType
    initializer: object
    is_const: bool = False
    dbg_ref: int | None = None


@dataclass
class IrModule:
    source_filename: str
    globals: list
    functions: list
    metadata: dict  # int -> MetadataNode
    named_metadata: dict = field(default_factory=dict)  # name -> [int]
    named_types: dict = field(default_factory=dict)  # %name -> StructType

    def function(self, name):
        if not name.startswith("@"):
            name = "@" + name
        for f in self.functions:
            if f.ir_name == name:
                return f
        return None

    def global_var(self, name):
        if not name.startswith("@"):
            name = "@" + name
        for g in self.globals:
            if g.name == name:
                return g
        return None


def lookup_metadata(module: IrModule, ident: int) -> MetadataNode:
    """Pure metadata-table lookup; raises UnknownMetadataId when absent."""
    try:
        return module.metadata[ident]
    except KeyError:
        raise UnknownMetadataId(ident) from None


# ---------------------------------------------------------------------------
# Canonical printing (round-trips through the parser)


def _format_value(v) -> str:
    if isinstance(v, IntConst):
        return str(v.value)
    if isinstance(v, NullConst):
        return "null"
    if isinstance(v, (Register, GlobalRef, FunctionRef)):
        return v.name
    if isinstance(v, MetadataRef):
        return f"!{v.ident}"
    if isinstance(v, Undef):
        return "undef"
    if isinstance(v, ZeroInit):
        return "zeroinitializer"
    if isinstance(v, BytesInit):
        enc = "".join(
            chr(b) if 32 <= b < 127 and chr(b) not in '"\\' else f"\\{b:02X}"
            for b in v.data)
        return f'c"{enc}"'
    raise IrError(f"cannot format {v!r}")


def _format_typed(type_, v) -> str:
    if isinstance(type_, MetadataType):
        if isinstance(v, MetadataRef):
            return f"metadata !{v.ident}"
        if isinstance(v, MetaValueOperand):
            return f"metadata {v.inner_type} {_format_value(v.inner)}"
    return f"{type_} {_format_value(v)}"


def _format_meta_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if v is None:
        return "null"
    if isinstance(v, str):
        return '"%s"' % v.replace("\\", "\\\\").replace('"', '\\"')
    if isinstance(v, MetadataRef):
        return f"!{v.ident}"
    if isinstance(v, MetaWords):
        return v.text
    if isinstance(v, (list, tuple)):
        return "!{%s}" % ", ".join(_format_meta_value(e) for e in v)
    raise IrError(f"cannot format metadata value {v!r}")


def _format_instruction(ins: Instruction) -> str:
    dbg = f", !dbg !{ins.dbg_ref}" if ins.dbg_ref is not None else ""
    res = f"{ins.result} = " if ins.result else ""
    k = ins.kind
    if k == "alloca":
        return f"{res}alloca {ins.type}{dbg}"
    if k == "load":
        p = _format_typed(PTR, ins.operands[0])
        return f"{res}load {ins.type}, {p}{dbg}"
    if k == "store":
        val = _format_typed(ins.type, ins.operands[0])
        p = _format_typed(PTR, ins.operands[1])
        return f"store {val}, {p}{dbg}"
    if k == "binop":
        a = _format_value(ins.operands[0])
        b = _format_value(ins.operands[1])
        return f"{res}{ins.op} {ins.type} {a}, {b}{dbg}"
    if k == "icmp":
        a = _format_value(ins.operands[0])
        b = _format_value(ins.operands[1])
        ty = ins.aux_type if ins.aux_type is not None else I32
        return f"{res}icmp {ins.op} {ty} {a}, {b}{dbg}"
    if k == "cast":
        src = ins.aux_type if ins.aux_type is not None else ins.type
        return f"{res}{ins.op} {src} {_format_value(ins.operands[0])} to {ins.type}{dbg}"
    if k == "select":
        c, a, b = ins.operands
        return (f"{res}select i1 {_format_value(c)}, "
                f"{ins.type} {_format_value(a)}, {ins.type} {_format_value(b)}{dbg}")
    if k == "getelementptr":
        base = _format_typed(PTR, ins.operands[0])
        idx = ", ".join(_format_typed(t, v) for t, v in
                        zip(ins.operand_types or [], ins.operands[1:]))
        return f"{res}getelementptr {ins.aux_type}, {base}, {idx}{dbg}"
    if k == "call":
        callee = ins.operands[0]
        args = ", ".join(_format_typed(t, v) for t, v in
                         zip(ins.operand_types or [], ins.operands[1:]))
        return f"{res}call {ins.type} {_format_value(callee)}({args}){dbg}"
    raise IrError(f"cannot format instruction kind {k}")


def format_module(module: IrModule) -> str:
    """Render a module in the canonical subset syntax accepted by the parser."""
    out = []
    if module.source_filename:
        out.append(f'source_filename = "{module.source_filename}"')
        out.append("")
    for name, ty in module.named_types.items():
        inner = ", ".join(str(f) for f in ty.fields)
        body = f"<{{ {inner} }}>" if ty.packed else f"{{ {inner} }}"
        out.append(f"{name} = type {body}")
    if module.named_types:
        out.append("")
    for g in module.globals:
        kind = "constant" if g.is_const else "global"
        init = _format_value(g.initializer)
        dbg = f", !dbg !{g.dbg_ref}" if g.dbg_ref is not None else ""
        out.append(f"{g.name} = {kind} {g.type} {init}{dbg}")
    if module.globals:
        out.append("")
    for fn in module.functions:
        params = ", ".join(f"{t} {n}" for n, t in fn.params)
        if fn.varargs:
            params = f"{params}, ..." if params else "..."
        if not fn.is_defined:
            out.append(f"declare {fn.ret_type} {fn.ir_name}({params})")
            out.append("")
            continue
        dbg = f" !dbg !{fn.subprogram_ref}" if fn.subprogram_ref is not None else ""
        out.append(f"define {fn.ret_type} {fn.ir_name}({params}){dbg} {{")
        for i, block in enumerate(fn.blocks):
            if i > 0:
                out.append("")
            out.append(f"{block.label}:")
            for phi in block.phis:
                inc = ", ".join(f"[ {_format_value(v)}, %{lbl} ]"
                                for lbl, v in phi.incoming.items())
                out.append(f"  {phi.result} = phi {phi.type} {inc}")
            for ins in block.body:
                out.append(f"  {_format_instruction(ins)}")
            term = block.terminator
            dbg = f", !dbg !{term.dbg_ref}" if term.dbg_ref is not None else ""
            if term.kind == "br":
                out.append(f"  br label %{term.labels[0]}{dbg}")
            elif term.kind == "condbr":
                c = _format_value(term.operands[0])
                out.append(f"  br i1 {c}, label %{term.labels[0]}, "
                           f"label %{term.labels[1]}{dbg}")
            elif term.kind == "ret":
                if term.operands:
                    out.append(f"  ret {fn.ret_type} "
                               f"{_format_value(term.operands[0])}{dbg}")
                else:
                    out.append(f"  ret void{dbg}")
            elif term.kind == "unreachable":
                out.append(f"  unreachable{dbg}")
        out.append("}")
        out.append("")
    for name, ids in module.named_metadata.items():
        refs = ", ".join(f"!{i}" for i in ids)
        out.append(f"!{name} = !{{{refs}}}")
    for ident in sorted(module.metadata):
        node = module.metadata[ident]
        distinct = "distinct " if node.distinct else ""
        if node.kind == "tuple":
            body = ", ".join(_format_meta_value(e)
                             for e in node.attrs.get("elements", []))
            out.append(f"!{ident} = {distinct}!{{{body}}}")
        elif node.kind.replace("DI", "", 1) == "Expression":
            body = ", ".join(_format_meta_value(e)
                             for e in node.attrs.get("elements", []))
            out.append(f"!{ident} = {distinct}!{node.kind}({body})")
        else:
            body = ", ".join(f"{k}: {_format_meta_value(v)}"
                             for k, v in node.attrs.items())
            out.append(f"!{ident} = {distinct}!{node.kind}({body})")
    return "\n".join(out) + "\n"
