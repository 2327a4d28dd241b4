"""Parser for the textual LLVM-IR subset, including debug metadata.

The accepted grammar is documented in docs/ir-subset.md.  Both real LLVM
metadata spellings (!DILocation(line: 5, column: 3, ...)) and the
abbreviated ones found in hand-transcribed files (Location(line: 5,
col: 3, ...)) are accepted; node kinds and attribute names are stored
verbatim and normalized only by the consumers in debug_meta.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ir_model import (
    AggregateInit, ArrayType, BasicBlock, BytesInit, FuncType, FunctionRef,
    GlobalRef, GlobalVariable, Instruction, IntConst, IntType, IrError,
    IrFunction, IrModule, IrType, MetaValueOperand, MetaWords, MetadataNode,
    MetadataRef, NullConst, PhiInstruction, PtrType, Register, StructType,
    Terminator, Undef, VoidType, ZeroInit, BINARY_OPS, CAST_OPS,
    ICMP_PREDICATES, I1, I8, I32, I64, METADATA, PTR, VOID,
)


class ParseError(IrError):
    def __init__(self, line, column, message, snippet=""):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message
        self.snippet = snippet


class MalformedIntrinsic(IrError):
    pass


@dataclass
class DbgIntrinsic:
    """A classified llvm.dbg.declare / llvm.dbg.value call."""

    intrinsic_kind: str  # "declare" | "value"
    value_operand: object  # ValueRef
    variable_ref: int
    expression_ref: int | None


# ---------------------------------------------------------------------------
# Tokenizer

_WORD_START = re.compile(r"[A-Za-z_$]")
_WORD_CHARS = re.compile(r"[A-Za-z0-9_$.\-]")
_ID_CHARS = re.compile(r"[A-Za-z0-9_$.\-]")

# words that may legally appear before/after types in defines, globals and
# call sites; they carry no meaning for this subset and are skipped
_NOISE_WORDS = frozenset("""
    dso_local dso_preemptable private internal external linkonce weak common
    appending extern_weak linkonce_odr weak_odr hidden protected default
    unnamed_addr local_unnamed_addr noundef zeroext signext inreg align
    nonnull dereferenceable nocapture readonly writeonly nsw nuw exact
    inbounds tail notail musttail nounwind willreturn memory norecurse
    uwtable optnone noinline mustprogress nofree
    """.split())


@dataclass
class Token:
    kind: str  # word int string cstring local global meta attrref punct eof
    text: str
    line: int
    col: int
    value: object = None


class Lexer:
    def __init__(self, source: str):
        self.source = source
        self.lines = source.splitlines()
        self.tokens = []
        self._scan()

    def line_text(self, line):
        if 1 <= line <= len(self.lines):
            return self.lines[line - 1]
        return ""

    def _error(self, line, col, msg):
        raise ParseError(line, col, msg, self.line_text(line))

    def _scan(self):
        src = self.source
        i, n = 0, len(src)
        line, col = 1, 1

        def advance(k=1):
            nonlocal i, line, col
            for _ in range(k):
                if i < n and src[i] == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
                i += 1

        while i < n:
            c = src[i]
            if c in " \t\r\n":
                advance()
                continue
            if c == ";":
                while i < n and src[i] != "\n":
                    advance()
                continue
            tline, tcol = line, col
            if c == '"':
                text, k = self._scan_string(i, tline, tcol)
                self.tokens.append(Token("string", text, tline, tcol, text))
                advance(k)
                continue
            if c == "c" and i + 1 < n and src[i + 1] == '"':
                advance()
                text, k = self._scan_string(i, tline, tcol)
                data = self._decode_bytes(text, tline, tcol)
                self.tokens.append(Token("cstring", text, tline, tcol, data))
                advance(k)
                continue
            if c in "%@!#":
                j = i + 1
                if j < n and src[j] == '"':
                    advance()
                    text, k = self._scan_string(i, tline, tcol)
                    kindmap = {"%": "local", "@": "global", "!": "meta", "#": "attrref"}
                    self.tokens.append(Token(kindmap[c], c + text, tline, tcol, text))
                    advance(k)
                    continue
                while j < n and _ID_CHARS.match(src[j]):
                    j += 1
                text = src[i + 1:j]
                kindmap = {"%": "local", "@": "global", "!": "meta", "#": "attrref"}
                self.tokens.append(Token(kindmap[c], c + text, tline, tcol, text))
                advance(j - i)
                continue
            if c.isdigit() or (c == "-" and i + 1 < n and src[i + 1].isdigit()):
                j = i + 1
                while j < n and (src[j].isdigit()):
                    j += 1
                text = src[i:j]
                self.tokens.append(Token("int", text, tline, tcol, int(text)))
                advance(j - i)
                continue
            if src.startswith("...", i):
                self.tokens.append(Token("punct", "...", tline, tcol))
                advance(3)
                continue
            if _WORD_START.match(c):
                j = i + 1
                while j < n and _WORD_CHARS.match(src[j]):
                    j += 1
                text = src[i:j]
                self.tokens.append(Token("word", text, tline, tcol))
                advance(j - i)
                continue
            if c in "()[]{}<>,=:*|":
                self.tokens.append(Token("punct", c, tline, tcol))
                advance()
                continue
            self._error(tline, tcol, f"unexpected character {c!r}")
        self.tokens.append(Token("eof", "", line, col))

    def _scan_string(self, start, line, col):
        # start points at the opening quote; returns (content, chars consumed)
        src = self.source
        j = start + 1
        out = []
        while j < len(src):
            c = src[j]
            if c == '"':
                return "".join(out), j - start + 1
            if c == "\\":
                out.append(src[j:j + 2])
                j += 2
                continue
            if c == "\n":
                break
            out.append(c)
            j += 1
        self._error(line, col, "unterminated string literal")

    def _decode_bytes(self, text, line, col):
        out = bytearray()
        i = 0
        while i < len(text):
            c = text[i]
            if c == "\\":
                esc = text[i + 1:i + 3]
                if esc == "\\\\":
                    out.append(ord("\\"))
                    i += 2
                    continue
                try:
                    out.append(int(esc, 16))
                except ValueError:
                    self._error(line, col, f"bad byte escape \\{esc}")
                i += 3
            else:
                out.append(ord(c))
                i += 1
        return bytes(out)


# ---------------------------------------------------------------------------
# Parser

_TYPE_WORDS = frozenset(["void", "ptr", "metadata"])
_INT_TYPE = re.compile(r"^i([0-9]+)$")


class _Parser:
    def __init__(self, source: str, origin: str):
        self.origin = origin
        self.lexer = Lexer(source)
        self.toks = self.lexer.tokens
        self.pos = 0
        self.struct_types = {}
        self.metadata = {}
        self.named_metadata = {}
        self.globals = []
        self.functions = []
        self.source_filename = origin
        self.next_uid = 0
        self._intern_cache = {}
        # ids for interned inline metadata start past any explicit id
        explicit = [int(m) for m in
                    re.findall(r"^\s*!(\d+)\s*=", source, re.MULTILINE)]
        self.next_meta_id = max(explicit, default=0) + 1

    # -- token helpers

    def peek(self, ahead=0):
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(tok.line, tok.col, msg, self.lexer.line_text(tok.line))

    def expect(self, kind, text=None):
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            self.error(f"expected {want!r}, found {t.text!r}")
        return self.next()

    def accept(self, kind, text=None):
        t = self.peek()
        if t.kind == kind and (text is None or t.text == text):
            return self.next()
        return None

    def fresh_uid(self):
        self.next_uid += 1
        return self.next_uid

    def intern_node(self, node):
        key = (node.kind, str(node.attrs))
        cached = self._intern_cache.get(key)
        if cached is not None:
            return cached
        ident = self.next_meta_id
        self.next_meta_id += 1
        self.metadata[ident] = node
        self._intern_cache[key] = ident
        return ident

    # -- types

    def at_type(self):
        t = self.peek()
        if t.kind == "word":
            return t.text in _TYPE_WORDS or bool(_INT_TYPE.match(t.text))
        if t.kind == "punct" and t.text in ("[", "{", "<"):
            return True
        if t.kind == "local" and t.text in self.struct_types:
            return True
        return False

    def parse_type(self):
        t = self.peek()
        base = None
        if t.kind == "word":
            m = _INT_TYPE.match(t.text)
            if m:
                self.next()
                bits = int(m.group(1))
                if bits not in (1, 8, 16, 32, 64):
                    self.error(f"unsupported integer width i{bits}", t)
                base = IntType(bits)
            elif t.text == "void":
                self.next()
                base = VOID
            elif t.text == "ptr":
                self.next()
                base = PTR
            elif t.text == "metadata":
                self.next()
                base = METADATA
            else:
                self.error(f"unsupported type {t.text!r}", t)
        elif t.kind == "punct" and t.text == "[":
            self.next()
            count = self.expect("int").value
            self.expect("word", "x")
            elem = self.parse_type()
            self.expect("punct", "]")
            base = ArrayType(count, elem)
        elif t.kind == "punct" and t.text == "{":
            base = self._parse_struct_body(packed=False)
        elif t.kind == "punct" and t.text == "<":
            self.next()
            base = self._parse_struct_body(packed=True)
            self.expect("punct", ">")
        elif t.kind == "local":
            if t.text not in self.struct_types:
                self.error(f"unknown named type {t.text!r}", t)
            self.next()
            base = self.struct_types[t.text]
        else:
            self.error(f"expected a type, found {t.text!r}", t)
        # pointer suffixes and function types
        while True:
            if self.accept("punct", "*"):
                base = PtrType(base)
                continue
            break
        return base

    def _parse_struct_body(self, packed):
        self.expect("punct", "{")
        fields = []
        if not self.accept("punct", "}"):
            while True:
                fields.append(self.parse_type())
                if self.accept("punct", "}"):
                    break
                self.expect("punct", ",")
        return StructType(tuple(fields), packed=packed)

    # -- top level

    def parse_module(self):
        while True:
            t = self.peek()
            if t.kind == "eof":
                break
            if t.kind == "word" and t.text == "source_filename":
                self.next()
                self.expect("punct", "=")
                self.source_filename = self.expect("string").value
            elif t.kind == "word" and t.text == "target":
                self.next()
                self.expect("word")
                self.expect("punct", "=")
                self.expect("string")
            elif t.kind == "word" and t.text == "attributes":
                self.next()
                self.expect("attrref")
                self.expect("punct", "=")
                self._skip_balanced("{", "}")
            elif t.kind == "word" and t.text in ("define", "declare"):
                self.parse_function(t.text == "define")
            elif t.kind == "local":
                self.parse_named_type()
            elif t.kind == "global":
                self.parse_global()
            elif t.kind == "meta":
                self.parse_metadata_def()
            else:
                self.error(f"unexpected {t.text!r} at top level")
        module = IrModule(
            source_filename=self.source_filename,
            globals=self.globals,
            functions=self.functions,
            metadata=self.metadata,
            named_metadata=self.named_metadata,
            named_types=self.struct_types,
        )
        _validate(module, self.lexer)
        return module

    def _skip_balanced(self, open_, close):
        self.expect("punct", open_)
        depth = 1
        while depth:
            t = self.next()
            if t.kind == "eof":
                self.error("unbalanced braces")
            if t.kind == "punct" and t.text == open_:
                depth += 1
            elif t.kind == "punct" and t.text == close:
                depth -= 1

    def parse_named_type(self):
        name = self.expect("local").text
        self.expect("punct", "=")
        self.expect("word", "type")
        if self.peek().text == "<":
            self.next()
            body = self._parse_struct_body(packed=True)
            self.expect("punct", ">")
        else:
            body = self._parse_struct_body(packed=False)
        self.struct_types[name] = StructType(body.fields, body.packed, name)

    def parse_global(self):
        name_tok = self.expect("global")
        self.expect("punct", "=")
        is_const = False
        while True:
            t = self.peek()
            if t.kind == "word" and t.text in ("global", "constant"):
                is_const = t.text == "constant"
                self.next()
                break
            if t.kind == "word" and (t.text in _NOISE_WORDS):
                self.next()
                continue
            self.error(f"expected 'global' or 'constant', found {t.text!r}")
        ty = self.parse_type()
        init = self.parse_initializer(ty)
        dbg_ref = self._parse_trailing()
        self.globals.append(GlobalVariable(
            name=name_tok.text, type=ty, initializer=init,
            is_const=is_const, dbg_ref=dbg_ref))

    def parse_initializer(self, ty):
        t = self.peek()
        if t.kind == "cstring":
            self.next()
            return BytesInit(t.value)
        if t.kind == "word" and t.text == "zeroinitializer":
            self.next()
            return ZeroInit()
        if t.kind == "punct" and t.text in ("[", "{"):
            close = "]" if t.text == "[" else "}"
            self.next()
            elems = []
            if not self.accept("punct", close):
                while True:
                    ety = self.parse_type()
                    elems.append(self.parse_value(ety))
                    if self.accept("punct", close):
                        break
                    self.expect("punct", ",")
            return AggregateInit(tuple(elems))
        return self.parse_value(ty)

    # -- values

    def parse_value(self, ty):
        t = self.peek()
        if t.kind == "int":
            self.next()
            bits = ty.bits if isinstance(ty, IntType) else 64
            try:
                return IntConst(t.value, bits)
            except IrError as e:
                self.error(str(e), t)
        if t.kind == "word" and t.text in ("true", "false"):
            self.next()
            return IntConst(1 if t.text == "true" else 0, 1)
        if t.kind == "word" and t.text == "null":
            self.next()
            return NullConst()
        if t.kind == "word" and t.text == "undef":
            self.next()
            return Undef()
        if t.kind == "local":
            self.next()
            return Register(t.text)
        if t.kind == "global":
            self.next()
            return GlobalRef(t.text)
        self.error(f"expected a value, found {t.text!r}")

    # -- functions

    def parse_function(self, defined):
        self.next()  # define/declare
        while self.peek().kind == "word" and self.peek().text in _NOISE_WORDS:
            self.next()
        ret_type = self.parse_type()
        name = self.expect("global").text
        params, varargs = self.parse_params(defined)
        subprogram_ref = None
        while True:
            t = self.peek()
            if t.kind == "word" and t.text in _NOISE_WORDS:
                self.next()
                if t.text == "align" and self.peek().kind == "int":
                    self.next()
                continue
            if t.kind == "attrref":
                self.next()
                continue
            if t.kind == "meta" and t.text == "!dbg":
                self.next()
                ref = self.expect("meta")
                subprogram_ref = self._meta_id(ref)
                continue
            break
        blocks = []
        if defined:
            self.expect("punct", "{")
            blocks = self.parse_blocks()
        fn = IrFunction(ir_name=name, ret_type=ret_type, params=params,
                        blocks=blocks, subprogram_ref=subprogram_ref,
                        varargs=varargs, is_defined=defined)
        self.functions.append(fn)

    def parse_params(self, defined):
        self.expect("punct", "(")
        params = []
        varargs = False
        auto = 0
        if not self.accept("punct", ")"):
            while True:
                if self.accept("punct", "..."):
                    varargs = True
                    self.expect("punct", ")")
                    break
                ty = self.parse_type()
                while self.peek().kind == "word" and self.peek().text in _NOISE_WORDS:
                    t = self.next()
                    if t.text in ("align", "dereferenceable") and self.peek().kind == "int":
                        self.next()
                reg = self.accept("local")
                if reg is not None:
                    params.append((reg.text, ty))
                else:
                    params.append((f"%{auto}", ty))
                auto += 1
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        return params, varargs

    def parse_blocks(self):
        blocks = []
        label = None
        phis, body = [], []
        assigned = set()

        def finish(term):
            nonlocal label, phis, body
            blocks.append(BasicBlock(label if label is not None else
                                     f"bb{len(blocks)}", phis, body, term))
            label, phis, body = None, [], []

        while True:
            t = self.peek()
            if t.kind == "punct" and t.text == "}":
                self.next()
                break
            if (t.kind == "word" and self.peek(1).kind == "punct"
                    and self.peek(1).text == ":"):
                self.next()
                self.next()
                label = t.text
                continue
            if t.kind == "int" and self.peek(1).text == ":":
                self.next()
                self.next()
                label = t.text
                continue
            if label is None and not blocks and not phis and not body:
                label = "entry"
            item = self.parse_instruction(assigned)
            if isinstance(item, Terminator):
                finish(item)
            elif isinstance(item, PhiInstruction):
                if body:
                    self.error("phi instruction after non-phi instruction", t)
                phis.append(item)
            else:
                body.append(item)
        if label is not None or phis or body:
            self.error("block missing terminator")
        return blocks

    # -- instructions

    def parse_instruction(self, assigned):
        t = self.peek()
        result = None
        if t.kind == "local":
            result = self.next().text
            self.expect("punct", "=")
        op_tok = self.expect("word")
        op = op_tok.text
        if result is not None:
            if result in assigned:
                self.error(f"register {result} assigned more than once (SSA)",
                           op_tok)
            assigned.add(result)

        if op == "ret":
            if self.accept("word", "void"):
                term = Terminator("ret", [], [], uid=self.fresh_uid())
            else:
                ty = self.parse_type()
                v = self.parse_value(ty)
                term = Terminator("ret", [v], [], uid=self.fresh_uid())
            term.dbg_ref = self._parse_trailing()
            return term
        if op == "br":
            if self.accept("word", "label"):
                dest = self.expect("local").text.lstrip("%")
                term = Terminator("br", [], [dest], uid=self.fresh_uid())
            else:
                ty = self.parse_type()
                cond = self.parse_value(ty)
                self.expect("punct", ",")
                self.expect("word", "label")
                a = self.expect("local").text.lstrip("%")
                self.expect("punct", ",")
                self.expect("word", "label")
                b = self.expect("local").text.lstrip("%")
                term = Terminator("condbr", [cond], [a, b], uid=self.fresh_uid())
            term.dbg_ref = self._parse_trailing()
            return term
        if op == "unreachable":
            term = Terminator("unreachable", [], [], uid=self.fresh_uid())
            term.dbg_ref = self._parse_trailing()
            return term
        if op == "phi":
            ty = self.parse_type()
            incoming = {}
            while True:
                self.expect("punct", "[")
                v = self.parse_value(ty)
                self.expect("punct", ",")
                lbl = self.expect("local").text.lstrip("%")
                self.expect("punct", "]")
                incoming[lbl] = v
                if not self.accept("punct", ","):
                    break
                if self.peek().text != "[":
                    self.pos -= 1  # rewind to the comma for trailing parse
                    break
            phi = PhiInstruction(result=result, type=ty, incoming=incoming,
                                 uid=self.fresh_uid())
            self._parse_trailing()
            return phi

        ins = self._parse_body_instruction(op, op_tok, result)
        ins.dbg_ref = self._parse_trailing()
        return ins

    def _parse_body_instruction(self, op, op_tok, result):
        uid = self.fresh_uid()
        if op == "alloca":
            ty = self.parse_type()
            return Instruction("alloca", [], ty, result=result, uid=uid)
        if op == "load":
            self.accept("word", "volatile")
            ty = self.parse_type()
            self.expect("punct", ",")
            self.parse_type()
            ptr = self.parse_value(PTR)
            return Instruction("load", [ptr], ty, result=result, uid=uid)
        if op == "store":
            self.accept("word", "volatile")
            ty = self.parse_type()
            val = self.parse_value(ty)
            self.expect("punct", ",")
            self.parse_type()
            ptr = self.parse_value(PTR)
            return Instruction("store", [val, ptr], ty, uid=uid)
        if op in BINARY_OPS:
            while self.peek().kind == "word" and self.peek().text in ("nsw", "nuw", "exact"):
                self.next()
            ty = self.parse_type()
            a = self.parse_value(ty)
            self.expect("punct", ",")
            b = self.parse_value(ty)
            return Instruction("binop", [a, b], ty, op=op, result=result, uid=uid)
        if op == "icmp":
            pred = self.expect("word").text
            if pred not in ICMP_PREDICATES:
                self.error(f"unsupported icmp predicate {pred!r}")
            ty = self.parse_type()
            a = self.parse_value(ty)
            self.expect("punct", ",")
            b = self.parse_value(ty)
            return Instruction("icmp", [a, b], I1, op=pred, result=result,
                               aux_type=ty, uid=uid)
        if op in CAST_OPS:
            src_ty = self.parse_type()
            v = self.parse_value(src_ty)
            self.expect("word", "to")
            dst_ty = self.parse_type()
            return Instruction("cast", [v], dst_ty, op=op, result=result,
                               aux_type=src_ty, uid=uid)
        if op == "select":
            self.parse_type()
            cond = self.parse_value(I1)
            self.expect("punct", ",")
            ty = self.parse_type()
            a = self.parse_value(ty)
            self.expect("punct", ",")
            self.parse_type()
            b = self.parse_value(ty)
            return Instruction("select", [cond, a, b], ty, result=result, uid=uid)
        if op == "getelementptr":
            while self.peek().kind == "word" and self.peek().text == "inbounds":
                self.next()
            src_ty = self.parse_type()
            self.expect("punct", ",")
            self.parse_type()
            base = self.parse_value(PTR)
            operands = [base]
            idx_types = []
            while self.accept("punct", ","):
                if self.peek().kind == "meta":
                    self.pos -= 1
                    break
                ity = self.parse_type()
                idx_types.append(ity)
                operands.append(self.parse_value(ity))
            return Instruction("getelementptr", operands, PTR, result=result,
                               aux_type=src_ty, operand_types=idx_types, uid=uid)
        if op in ("tail", "musttail", "notail"):
            op_tok = self.expect("word")
            op = op_tok.text
        if op == "call":
            ret_ty = self.parse_type()
            if self.peek().text == "(" and self.peek().kind == "punct":
                # full function type at the call site (varargs callees)
                self.next()
                while not self.accept("punct", ")"):
                    if self.accept("punct", "..."):
                        continue
                    self.parse_type()
                    self.accept("punct", ",")
            callee_tok = self.peek()
            if callee_tok.kind == "global":
                self.next()
                callee = FunctionRef(callee_tok.text)
            elif callee_tok.kind == "local":
                self.next()
                callee = Register(callee_tok.text)
            else:
                self.error(f"expected callee, found {callee_tok.text!r}")
            args, arg_types = self.parse_call_args()
            return Instruction("call", [callee] + args, ret_ty, result=result,
                               operand_types=arg_types, uid=uid)
        self.error(f"unsupported instruction {op!r}", op_tok)

    def parse_call_args(self):
        self.expect("punct", "(")
        args, types = [], []
        if not self.accept("punct", ")"):
            while True:
                ty = self.parse_type()
                while self.peek().kind == "word" and self.peek().text in _NOISE_WORDS:
                    t = self.next()
                    if t.text in ("align", "dereferenceable") and self.peek().kind == "int":
                        self.next()
                if isinstance(ty, type(METADATA)):
                    args.append(self.parse_metadata_operand())
                else:
                    args.append(self.parse_value(ty))
                types.append(ty)
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        return args, types

    def parse_metadata_operand(self):
        t = self.peek()
        if t.kind == "meta":
            if t.value is not None and str(t.value).isdigit():
                self.next()
                return MetadataRef(int(t.value))
            # inline node such as !DIExpression(...)
            return MetadataRef(self._parse_inline_node())
        if self.at_type():
            ty = self.parse_type()
            inner = self.parse_value(ty)
            return MetaValueOperand(ty, inner)
        self.error(f"expected metadata operand, found {t.text!r}")

    def _parse_trailing(self):
        """Consume trailing ', align N' / ', !dbg !N' style suffixes."""
        dbg_ref = None
        while self.accept("punct", ","):
            t = self.peek()
            if t.kind == "word" and t.text == "align":
                self.next()
                self.expect("int")
                continue
            if t.kind == "meta":
                name = self.next().text
                ref = self.expect("meta")
                if name == "!dbg":
                    dbg_ref = self._meta_id(ref)
                continue
            self.error(f"unexpected instruction suffix {t.text!r}")
        return dbg_ref

    def _meta_id(self, tok):
        if not str(tok.value).isdigit():
            self.error(f"expected numeric metadata id, found {tok.text!r}", tok)
        return int(tok.value)

    # -- metadata definitions

    def parse_metadata_def(self):
        name_tok = self.expect("meta")
        self.expect("punct", "=")
        if not str(name_tok.value).isdigit():
            # named metadata: !llvm.dbg.cu = !{!0, !1}
            self.expect("meta", "!")
            self.expect("punct", "{")
            ids = []
            if not self.accept("punct", "}"):
                while True:
                    ref = self.expect("meta")
                    ids.append(self._meta_id(ref))
                    if self.accept("punct", "}"):
                        break
                    self.expect("punct", ",")
            self.named_metadata[name_tok.value] = ids
            return
        ident = int(name_tok.value)
        distinct = bool(self.accept("word", "distinct"))
        node = self._parse_node_body()
        node.distinct = distinct
        if ident in self.metadata:
            self.error(f"metadata !{ident} defined twice", name_tok)
        self.metadata[ident] = node

    def _parse_node_body(self):
        t = self.peek()
        if t.kind == "meta" and t.value == "":
            self.next()
            return MetadataNode("tuple", {"elements": self._parse_tuple_elems()})
        if t.kind in ("meta", "word"):
            self.next()
            kind = t.value if t.kind == "meta" else t.text
            # DIExpression bodies are bare operation lists, not key: value
            if kind.replace("DI", "", 1) == "Expression":
                return MetadataNode(kind, {"elements": self._parse_expr_elems()})
            return MetadataNode(kind, self._parse_attr_list())
        self.error(f"expected metadata node, found {t.text!r}")

    def _parse_expr_elems(self):
        self.expect("punct", "(")
        elems = []
        if not self.accept("punct", ")"):
            while True:
                t = self.next()
                if t.kind == "int":
                    elems.append(t.value)
                elif t.kind == "word":
                    elems.append(MetaWords(t.text))
                else:
                    self.error(f"bad expression element {t.text!r}", t)
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        return elems

    def _parse_inline_node(self):
        node = self._parse_node_body()
        return self.intern_node(node)

    def _parse_tuple_elems(self):
        self.expect("punct", "{")
        elems = []
        if not self.accept("punct", "}"):
            while True:
                elems.append(self.parse_meta_value())
                if self.accept("punct", "}"):
                    break
                self.expect("punct", ",")
        return elems

    def _parse_attr_list(self):
        self.expect("punct", "(")
        attrs = {}
        if not self.accept("punct", ")"):
            while True:
                key = self.expect("word").text
                self.expect("punct", ":")
                attrs[key] = self.parse_meta_value()
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        return attrs

    def parse_meta_value(self):
        t = self.peek()
        if t.kind == "int":
            self.next()
            return t.value
        if t.kind == "string":
            self.next()
            return t.text
        if t.kind == "word" and t.text in ("true", "false"):
            self.next()
            return t.text == "true"
        if t.kind == "word" and t.text == "null":
            self.next()
            return None
        if t.kind == "meta":
            if t.value == "":
                self.next()
                node = MetadataNode("tuple", {"elements": self._parse_tuple_elems()})
                return MetadataRef(self.intern_node(node))
            nxt = self.peek(1)
            if nxt.kind == "punct" and nxt.text == "(":
                return MetadataRef(self._parse_inline_node())
            if str(t.value).isdigit():
                self.next()
                return MetadataRef(int(t.value))
            self.next()
            return t.value  # !"string" form
        if t.kind == "word":
            nxt = self.peek(1)
            if nxt.kind == "punct" and nxt.text == "(":
                return MetadataRef(self._parse_inline_node())
            # bareword enum / flag union, e.g. DW_ATE_signed or A | B
            words = [self.next().text]
            while True:
                if self.accept("punct", "|"):
                    words.append("|")
                    words.append(self.expect("word").text)
                    continue
                break
            # typed int element such as `i32 7` inside tuples
            if len(words) == 1 and _INT_TYPE.match(words[0]) and self.peek().kind == "int":
                return self.next().value
            return MetaWords(" ".join(words))
        self.error(f"expected a metadata value, found {t.text!r}")


# ---------------------------------------------------------------------------
# Module validation


def _collect_meta_refs(value, out):
    if isinstance(value, MetadataRef):
        out.append(value.ident)
    elif isinstance(value, MetaValueOperand):
        _collect_meta_refs(value.inner, out)
    elif isinstance(value, (list, tuple)):
        for v in value:
            _collect_meta_refs(v, out)
    elif isinstance(value, MetadataNode):
        for v in value.attrs.values():
            _collect_meta_refs(v, out)


def _validate(module, lexer):
    seen = set()
    for fn in module.functions:
        if fn.ir_name in seen:
            raise ParseError(1, 1, f"function {fn.ir_name} defined twice")
        seen.add(fn.ir_name)

    refs = []
    for fn in module.functions:
        if fn.subprogram_ref is not None:
            refs.append(fn.subprogram_ref)
        for block in fn.blocks:
            for ins in block.body:
                if ins.dbg_ref is not None:
                    refs.append(ins.dbg_ref)
                _collect_meta_refs(ins.operands, refs)
            if block.terminator.dbg_ref is not None:
                refs.append(block.terminator.dbg_ref)
    for g in module.globals:
        if g.dbg_ref is not None:
            refs.append(g.dbg_ref)
    for node in list(module.metadata.values()):
        _collect_meta_refs(node, refs)
    for ids in module.named_metadata.values():
        refs.extend(ids)
    for r in refs:
        if r not in module.metadata:
            raise ParseError(1, 1, f"undefined metadata id !{r}")

    for fn in module.functions:
        if fn.is_defined and not fn.blocks:
            raise ParseError(1, 1, f"defined function {fn.ir_name} has no blocks")
        # phi incoming edges must cover all predecessors
        preds = {}
        for block in fn.blocks:
            for succ in block.terminator.successors:
                preds.setdefault(succ, set()).add(block.label)
        labels = {b.label for b in fn.blocks}
        for block in fn.blocks:
            for succ in block.terminator.successors:
                if succ not in labels:
                    raise ParseError(
                        1, 1, f"branch to unknown block %{succ} in {fn.ir_name}")
            for phi in block.phis:
                missing = preds.get(block.label, set()) - set(phi.incoming)
                if missing:
                    raise ParseError(
                        1, 1,
                        f"phi {phi.result} in {fn.ir_name} lacks incoming "
                        f"edges for {sorted(missing)}")


# ---------------------------------------------------------------------------
# Public entry points


def parse_module(source: str, origin_name: str = "<string>") -> IrModule:
    """Parse textual IR into an IrModule; raises ParseError on the first
    violation."""
    return _Parser(source, origin_name).parse_module()


_DBG_INTRINSICS = {
    "@llvm.dbg.declare": "declare",
    "@llvm.dbg.value": "value",
}


def parse_intrinsic_call(instr) -> DbgIntrinsic | None:
    """Classify a call instruction as a debug intrinsic, if it is one."""
    if instr.kind != "call":
        return None
    callee = instr.operands[0]
    if not isinstance(callee, FunctionRef):
        return None
    kind = _DBG_INTRINSICS.get(callee.name)
    if kind is None:
        return None
    args = instr.operands[1:]
    if len(args) < 2:
        raise MalformedIntrinsic(
            f"{callee.name} expects value and variable operands")
    value_op = args[0]
    if isinstance(value_op, MetaValueOperand):
        value = value_op.inner
    else:
        raise MalformedIntrinsic(
            f"{callee.name} first operand must be a metadata-wrapped value")
    if not isinstance(args[1], MetadataRef):
        raise MalformedIntrinsic(
            f"{callee.name} variable operand must be a metadata reference")
    expr_ref = None
    if len(args) > 2 and isinstance(args[2], MetadataRef):
        expr_ref = args[2].ident
    return DbgIntrinsic(
        intrinsic_kind=kind,
        value_operand=value,
        variable_ref=args[1].ident,
        expression_ref=expr_ref,
    )
