"""Descriptors built from debug metadata: locations, symbols, types, scopes.

Metadata nodes are matched tolerantly: an optional DI prefix on node kinds
is ignored ("Location" and "DILocation" are the same kind) and common
attribute-name synonyms (col/column, name/filename, path/directory) are
accepted.  Descriptors are memoized per builder, so identical metadata ids
yield identical descriptor objects within one session.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .ir_model import IrError, MetaWords, MetadataRef, lookup_metadata


class MalformedMetadata(IrError):
    pass


def _kind(node) -> str:
    k = node.kind
    return k[2:] if k.startswith("DI") else k


def _attr(node, *names, default=None):
    for n in names:
        if n in node.attrs:
            return node.attrs[n]
    return default


def _words(value) -> str:
    if isinstance(value, MetaWords):
        return value.text
    if isinstance(value, str):
        return value
    return ""


# ---------------------------------------------------------------------------
# Source files


@dataclass
class SourceSection:
    """A resolved character position inside an accessible source file."""

    path: str
    text: str
    offset: int  # character offset of (line, column)
    line: int
    column: int


class SourceRegistry:
    """Resolves and caches original source files.

    Lookup order: the absolute directory/filename recorded in the metadata
    first, then each search root joined with the file's base name.  The
    outcome of a lookup (including failure) is cached for the session.
    """

    def __init__(self, search_roots=()):
        self.search_roots = list(search_roots)
        self._cache = {}

    def resolve(self, directory: str, filename: str):
        """Return (path, text) or None if the file is inaccessible."""
        key = (directory, filename, tuple(self.search_roots))
        if key in self._cache:
            return self._cache[key]
        candidates = []
        if filename:
            if os.path.isabs(filename):
                candidates.append(filename)
            elif directory:
                candidates.append(os.path.join(directory, filename))
            base = os.path.basename(filename)
            for root in self.search_roots:
                candidates.append(os.path.join(root, base))
        result = None
        for path in candidates:
            text = self._read(path)
            if text is not None:
                result = (path, text)
                break
        self._cache[key] = result
        return result

    def _read(self, path):
        if path in self._cache:
            return self._cache[path]
        try:
            with open(path, "r", encoding="utf-8", errors="replace") as fh:
                text = fh.read()
        except OSError:
            text = None
        self._cache[path] = text
        return text


# ---------------------------------------------------------------------------
# Descriptors


@dataclass(eq=False)
class LocationDescriptor:
    scope: "ScopeDescriptor | None"
    line: int
    column: int
    resolved: SourceSection | None = None

    @property
    def file_name(self) -> str:
        s = self.scope
        while s is not None:
            if s.display_file:
                return s.display_file
            s = s.parent
        return ""

    def same_position(self, other) -> bool:
        return (other is not None and self.line == other.line
                and self.column == other.column
                and self.file_name == other.file_name)

    def __str__(self):
        return f"{self.file_name}:{self.line}:{self.column}"


@dataclass(eq=False)
class SymbolDescriptor:
    name: str
    type: "TypeDescriptor"
    declared_at: LocationDescriptor
    is_static: bool
    enclosing_scope: "ScopeDescriptor"


# -- types

SIGNED_INT = "signed-int"
UNSIGNED_INT = "unsigned-int"
FLOAT = "float"
BOOL = "bool"
CHAR = "char"


@dataclass(eq=False)
class TypeDescriptor:
    name: str
    bit_size: int


@dataclass(eq=False)
class PrimitiveType(TypeDescriptor):
    encoding: str = SIGNED_INT


@dataclass(eq=False)
class PointerType(TypeDescriptor):
    pointee: TypeDescriptor | None = None
    reference: bool = False


@dataclass(eq=False)
class ArrayTypeDesc(TypeDescriptor):
    element: TypeDescriptor | None = None
    length: int = 0


@dataclass(eq=False)
class StructTypeDesc(TypeDescriptor):
    # (member name, member type, bit offset); inherited members included
    members: list = field(default_factory=list)


@dataclass(eq=False)
class EnumTypeDesc(TypeDescriptor):
    labels: dict = field(default_factory=dict)  # value -> label


@dataclass(eq=False)
class QualifiedType(TypeDescriptor):
    qualifier: str = "const"
    base: TypeDescriptor | None = None


@dataclass(eq=False)
class SubroutineType(TypeDescriptor):
    pass


@dataclass(eq=False)
class ForeignType(TypeDescriptor):
    pass


FOREIGN = ForeignType(name="<foreign>", bit_size=0)


# -- scopes

_NO_MEMBER_KINDS = ("expression", "symbol")


@dataclass(eq=False)
class ScopeDescriptor:
    kind: str  # expression symbol block function type named compilation_unit
    parent: "ScopeDescriptor | None" = None
    members: list = field(default_factory=list)
    entry: tuple | None = None  # (line, column) for block/function/expr/symbol
    source_name: str = ""      # functions: unmangled name; named scopes: name
    compilation_unit: "ScopeDescriptor | None" = None
    type: TypeDescriptor | None = None
    display_file: str = ""     # compilation units: file name for display
    source_path: str | None = None  # resolved path when accessible
    source_text: str | None = None

    def append_member(self, symbol):
        if self.kind in _NO_MEMBER_KINDS:
            raise MalformedMetadata(
                f"{self.kind} scopes describe a declaration site and "
                "cannot contain members")
        if symbol not in self.members:
            self.members.append(symbol)

    def chain(self):
        s = self
        seen = set()
        while s is not None:
            if id(s) in seen:
                raise MalformedMetadata("cycle in scope chain")
            seen.add(id(s))
            yield s
            s = s.parent


def expression_scope(at: tuple, parent) -> ScopeDescriptor:
    return ScopeDescriptor(kind="expression", parent=parent, entry=at)


def symbol_scope(at: tuple, parent) -> ScopeDescriptor:
    return ScopeDescriptor(kind="symbol", parent=parent, entry=at)


# ---------------------------------------------------------------------------
# Builder


class DescriptorBuilder:
    """Builds and memoizes descriptors for one debug session.

    Scope and type descriptors are cached by (module, metadata id); named
    scopes (namespaces) are cached globally by name so that occurrences in
    different modules share one descriptor.
    """

    def __init__(self, registry: SourceRegistry | None = None):
        self.registry = registry or SourceRegistry()
        self._scopes = {}
        self._types = {}
        self._symbols = {}
        self._named = {}

    # -- locations

    def build_location(self, module, loc_ref: int) -> LocationDescriptor:
        node = lookup_metadata(module, loc_ref)
        if _kind(node) != "Location":
            raise MalformedMetadata(f"!{loc_ref} is not a location node")
        line = _attr(node, "line")
        column = _attr(node, "column", "col")
        if not isinstance(line, int) or not isinstance(column, int):
            raise MalformedMetadata(
                f"location !{loc_ref} lacks line/column attributes")
        scope_ref = _attr(node, "scope")
        scope = None
        if isinstance(scope_ref, MetadataRef):
            scope = self.build_scope(module, scope_ref.ident)
        return self.make_location(scope, line, column)

    def make_location(self, scope, line: int, column: int) -> LocationDescriptor:
        line = max(1, line)
        column = max(1, column)
        resolved = None
        s = scope
        while s is not None and s.source_text is None:
            s = s.parent
        if s is not None and s.source_text is not None:
            resolved = _section(s.source_path, s.source_text, line, column)
        return LocationDescriptor(scope=scope, line=line, column=column,
                                  resolved=resolved)

    # -- scopes

    def build_scope(self, module, scope_ref: int) -> ScopeDescriptor:
        key = (id(module), scope_ref)
        if key in self._scopes:
            return self._scopes[key]
        node = lookup_metadata(module, scope_ref)
        kind = _kind(node)

        if kind == "CompileUnit":
            file_ref = _attr(node, "file")
            if isinstance(file_ref, MetadataRef):
                scope = self.build_scope(module, file_ref.ident)
            else:
                scope = self._file_scope("", "")
            self._scopes[key] = scope
            return scope

        if kind == "File":
            filename = _attr(node, "filename", "name", default="")
            directory = _attr(node, "directory", "path", default="")
            scope = self._file_scope(directory, filename)
            self._scopes[key] = scope
            return scope

        if kind == "Namespace":
            name = _attr(node, "name", default="<anonymous namespace>")
            shared = self._named.get(name)
            if shared is None:
                parent = self._parent_scope(module, node)
                shared = ScopeDescriptor(kind="named", parent=parent,
                                         source_name=name)
                self._named[name] = shared
            self._scopes[key] = shared
            return shared

        if kind == "Subprogram":
            name = _attr(node, "name")
            if not name:
                name = _attr(node, "linkageName", default="")
            line = _attr(node, "line", default=1)
            parent = self._parent_scope(module, node)
            cu = None
            for s in parent.chain() if parent else ():
                if s.kind == "compilation_unit":
                    cu = s
                    break
            scope = ScopeDescriptor(kind="function", parent=parent,
                                    entry=(line, 1), source_name=name or "",
                                    compilation_unit=cu)
            scope.source_path = parent.source_path if parent else None
            scope.source_text = parent.source_text if parent else None
            self._scopes[key] = scope
            return scope

        if kind in ("LexicalBlock", "LexicalBlockFile"):
            parent = self._parent_scope(module, node)
            line = _attr(node, "line", default=1)
            column = _attr(node, "column", "col", default=1)
            scope = ScopeDescriptor(kind="block", parent=parent,
                                    entry=(line, column))
            self._scopes[key] = scope
            return scope

        if kind == "CompositeType":
            ty = self.build_type(module, scope_ref)
            parent = self._parent_scope(module, node)
            scope = ScopeDescriptor(kind="type", parent=parent, type=ty,
                                    source_name=ty.name)
            self._scopes[key] = scope
            return scope

        raise MalformedMetadata(f"!{scope_ref} ({node.kind}) is not a scope")

    def _parent_scope(self, module, node):
        ref = _attr(node, "scope")
        if not isinstance(ref, MetadataRef):
            ref = _attr(node, "file")
        if isinstance(ref, MetadataRef):
            return self.build_scope(module, ref.ident)
        return None

    def _file_scope(self, directory, filename):
        name = os.path.basename(filename) if filename else "<unknown>"
        key = ("file", directory, filename)
        if key in self._named:
            return self._named[key]
        scope = ScopeDescriptor(kind="compilation_unit", display_file=name)
        found = self.registry.resolve(directory, filename)
        if found is not None:
            scope.source_path, scope.source_text = found
        self._named[key] = scope
        return scope

    # -- symbols

    def build_symbol(self, module, var_ref: int) -> SymbolDescriptor:
        key = (id(module), var_ref)
        if key in self._symbols:
            return self._symbols[key]
        node = lookup_metadata(module, var_ref)
        kind = _kind(node)
        is_static = False
        if kind == "GlobalVariableExpression":
            var = _attr(node, "var")
            if not isinstance(var, MetadataRef):
                raise MalformedMetadata(f"!{var_ref} lacks a var: attribute")
            inner = lookup_metadata(module, var.ident)
            node, kind = inner, _kind(inner)
        if kind == "GlobalVariable":
            is_static = True
        elif kind != "LocalVariable":
            raise MalformedMetadata(f"!{var_ref} ({node.kind}) is not a variable")

        name = _attr(node, "name")
        type_ref = _attr(node, "type")
        if not name or not isinstance(type_ref, MetadataRef):
            raise MalformedMetadata(
                f"variable !{var_ref} lacks a name or type attribute")
        enclosing = self._parent_scope(module, node)
        if enclosing is None:
            raise MalformedMetadata(f"variable !{var_ref} has no scope")
        line = _attr(node, "line", default=1)
        column = _attr(node, "column", "col", default=1)
        decl_scope = symbol_scope((line, column), enclosing)
        declared_at = self.make_location(decl_scope, line, column)
        symbol = SymbolDescriptor(
            name=name,
            type=self.build_type(module, type_ref.ident),
            declared_at=declared_at,
            is_static=is_static,
            enclosing_scope=enclosing,
        )
        self._symbols[key] = symbol
        enclosing.append_member(symbol)
        return symbol

    # -- types

    def build_type(self, module, type_ref: int | None) -> TypeDescriptor:
        if type_ref is None:
            return FOREIGN
        key = (id(module), type_ref)
        if key in self._types:
            return self._types[key]
        node = lookup_metadata(module, type_ref)
        kind = _kind(node)
        if kind == "BasicType":
            desc = self._basic_type(node, type_ref)
            self._types[key] = desc
            return desc
        if kind == "DerivedType":
            return self._derived_type(module, node, key, type_ref)
        if kind == "CompositeType":
            return self._composite_type(module, node, key, type_ref)
        if kind == "SubroutineType":
            desc = SubroutineType(name=self._subroutine_name(module, node),
                                  bit_size=0)
            self._types[key] = desc
            return desc
        raise MalformedMetadata(f"!{type_ref} ({node.kind}) is not a type")

    def _basic_type(self, node, ref):
        name = _attr(node, "name", default="")
        size = _attr(node, "size", default=None)
        if size is None:
            raise MalformedMetadata(f"basic type !{ref} lacks a size")
        enc = _words(_attr(node, "encoding", default=""))
        if "char" in enc:
            encoding = CHAR
        elif "bool" in enc:
            encoding = BOOL
        elif "float" in enc:
            encoding = FLOAT
        elif "unsigned" in enc:
            encoding = UNSIGNED_INT
        else:
            encoding = SIGNED_INT
        return PrimitiveType(name=name or "<basic>", bit_size=size,
                             encoding=encoding)

    def _derived_type(self, module, node, key, ref):
        tag = _words(_attr(node, "tag", default=""))
        base_ref = _attr(node, "baseType")
        base_id = base_ref.ident if isinstance(base_ref, MetadataRef) else None

        if "pointer_type" in tag or "reference_type" in tag:
            is_ref = "reference_type" in tag
            size = _attr(node, "size", default=64)
            desc = PointerType(name="", bit_size=size, reference=is_ref)
            self._types[key] = desc  # register before recursing (cycles)
            pointee = self.build_type(module, base_id)
            desc.pointee = pointee
            suffix = "&" if is_ref else "*"
            desc.name = f"{pointee.name} {suffix}" if pointee.name else suffix
            return desc
        if "const_type" in tag or "volatile_type" in tag:
            qual = "const" if "const_type" in tag else "volatile"
            base = self.build_type(module, base_id)
            desc = QualifiedType(name=f"{qual} {base.name}",
                                 bit_size=base.bit_size, qualifier=qual,
                                 base=base)
            self._types[key] = desc
            return desc
        if "typedef" in tag or "member" in tag or "inheritance" in tag:
            desc = self.build_type(module, base_id)
            self._types[key] = desc
            return desc
        raise MalformedMetadata(f"unsupported derived type tag {tag!r} in !{ref}")

    def _composite_type(self, module, node, key, ref):
        tag = _words(_attr(node, "tag", default=""))
        name = _attr(node, "name", default="")
        size = _attr(node, "size", default=None)
        elements = self._element_nodes(module, node)

        if "array_type" in tag:
            base_ref = _attr(node, "baseType")
            length = 0
            for el in elements:
                if _kind(el) == "Subrange":
                    length = _attr(el, "count", default=0)
            desc = ArrayTypeDesc(name="", bit_size=size or 0, length=length)
            self._types[key] = desc
            elem = self.build_type(
                module, base_ref.ident if isinstance(base_ref, MetadataRef) else None)
            desc.element = elem
            desc.name = f"{elem.name}[{length}]"
            if not desc.bit_size:
                desc.bit_size = elem.bit_size * length
            return desc

        if "enumeration_type" in tag:
            if size is None:
                raise MalformedMetadata(f"enum !{ref} lacks a size")
            labels = {}
            for el in elements:
                if _kind(el) == "Enumerator":
                    labels[_attr(el, "value", default=0)] = _attr(
                        el, "name", default="")
            return self._remember(key, EnumTypeDesc(
                name=name or "<anonymous enum>", bit_size=size, labels=labels))

        if "structure_type" in tag or "class_type" in tag or "union_type" in tag:
            if size is None:
                raise MalformedMetadata(f"struct !{ref} lacks a size")
            desc = StructTypeDesc(name=name or "<anonymous struct>",
                                  bit_size=size, members=[])
            self._types[key] = desc
            for el in elements:
                el_tag = _words(_attr(el, "tag", default=""))
                base_ref = _attr(el, "baseType")
                base_id = (base_ref.ident
                           if isinstance(base_ref, MetadataRef) else None)
                offset = _attr(el, "offset", default=0)
                if "inheritance" in el_tag:
                    parent = self.build_type(module, base_id)
                    if isinstance(parent, StructTypeDesc):
                        for mname, mtype, moff in parent.members:
                            desc.members.append((mname, mtype, moff + offset))
                    continue
                if "member" in el_tag:
                    mtype = self.build_type(module, base_id)
                    desc.members.append(
                        (_attr(el, "name", default=""), mtype, offset))
            return desc

        raise MalformedMetadata(f"unsupported composite tag {tag!r} in !{ref}")

    def _element_nodes(self, module, node):
        ref = _attr(node, "elements")
        if not isinstance(ref, MetadataRef):
            return []
        holder = lookup_metadata(module, ref.ident)
        out = []
        for el in holder.attrs.get("elements", []):
            if isinstance(el, MetadataRef):
                out.append(lookup_metadata(module, el.ident))
        return out

    def _subroutine_name(self, module, node):
        ref = _attr(node, "types")
        names = []
        if isinstance(ref, MetadataRef):
            holder = lookup_metadata(module, ref.ident)
            for el in holder.attrs.get("elements", []):
                if el is None:
                    names.append("void")
                elif isinstance(el, MetadataRef):
                    names.append(self.build_type(module, el.ident).name)
        if not names:
            return "void ()"
        return f"{names[0]} ({', '.join(names[1:])})"

    def _remember(self, key, desc):
        self._types[key] = desc
        return desc


def _section(path, text, line, column):
    lines = text.splitlines()
    if not 1 <= line <= len(lines):
        return None
    if column > len(lines[line - 1]) + 1:
        return None
    offset = sum(len(l) + 1 for l in lines[:line - 1]) + column - 1
    return SourceSection(path=path, text=text, offset=offset,
                         line=line, column=column)
