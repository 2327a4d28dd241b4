import pytest

from irdb.debug_meta import (DescriptorBuilder, EnumTypeDesc,
                             MalformedMetadata, PointerType, PrimitiveType,
                             QualifiedType, SourceRegistry, StructTypeDesc,
                             SIGNED_INT)
from irdb.ir_parser import parse_module

from conftest import FIXTURES, load_text, make_builder, parse_fixture


# -- locations


def test_location_23_line_column_scope():
    module = parse_fixture("fact.ll")
    builder = make_builder()
    loc = builder.build_location(module, 23)
    assert (loc.line, loc.column) == (5, 3)
    assert loc.scope.kind == "function"
    assert loc.scope.source_name == "fact"
    assert loc.resolved is not None
    assert loc.resolved.path.endswith("fact.c")


def test_location_without_accessible_source():
    module = parse_fixture("fact.ll")
    builder = make_builder(with_sources=False)
    loc = builder.build_location(module, 23)
    assert (loc.line, loc.column) == (5, 3)
    assert loc.resolved is None


def test_location_beyond_file_extent_is_unresolved():
    module = parse_fixture("stale.ll")
    builder = make_builder()
    loc = builder.build_location(module, 7)
    assert loc.line == 5000
    assert loc.resolved is None
    # a sane location in the same file still resolves
    ok = builder.build_location(module, 8)
    assert ok.resolved is not None


def test_location_missing_line_is_malformed():
    module = parse_module("!1 = Location(scope: !2)\n"
                          '!2 = File(name: "a.c", path: "")\n', "t.ll")
    with pytest.raises(MalformedMetadata):
        make_builder().build_location(module, 1)


# -- scopes


def test_function_scope_chain_ends_at_compilation_unit():
    module = parse_fixture("fact.ll")
    builder = make_builder()
    scope = builder.build_scope(module, 7)
    assert scope.kind == "function"
    assert scope.entry == (1, 1)
    chain = list(scope.chain())
    assert chain[-1].kind == "compilation_unit"
    assert chain[-1].display_file == "fact.c"
    assert chain[-1].members == []  # fact.c has no globals


def test_scope_memoization_identity():
    module = parse_fixture("fact.ll")
    builder = make_builder()
    assert builder.build_scope(module, 7) is builder.build_scope(module, 7)


def test_file_scope_has_no_parent():
    module = parse_fixture("fact.ll")
    builder = make_builder()
    cu = builder.build_scope(module, 1)
    assert cu.kind == "compilation_unit"
    assert cu.parent is None


def test_namespace_descriptor_shared_across_modules():
    text = load_text("namespace.ll")
    m1 = parse_module(text, "one.ll")
    m2 = parse_module(text, "two.ll")
    builder = make_builder()
    s1 = builder.build_scope(m1, 4)
    s2 = builder.build_scope(m2, 4)
    assert s1 is s2
    assert s1.kind == "named"
    assert s1.source_name == "calc"
    # symbols from both modules land in the shared descriptor
    builder.build_symbol(m1, 5)
    builder.build_symbol(m2, 5)
    names = [s.name for s in s1.members]
    assert names.count("total") == 2


def test_scope_chain_termination_all_fixture_scopes():
    for name in ("fact.ll", "loop.ll", "calc.ll", "namespace.ll", "list.ll"):
        module = parse_fixture(name)
        builder = make_builder()
        for ident, node in module.metadata.items():
            kind = node.kind.replace("DI", "", 1)
            if kind in ("Subprogram", "LexicalBlock", "Namespace", "File"):
                scope = builder.build_scope(module, ident)
                assert list(scope.chain())  # raises on a cycle


def test_unknown_scope_kind_is_malformed():
    module = parse_module('!1 = Widget(name: "x")\n', "t.ll")
    with pytest.raises(MalformedMetadata):
        make_builder().build_scope(module, 1)


# -- symbols


def test_symbol_n_from_listing():
    module = parse_fixture("fact.ll")
    builder = make_builder()
    sym = builder.build_symbol(module, 11)
    assert sym.name == "n"
    assert sym.type.name == "int"
    assert sym.type.bit_size == 32
    assert sym.declared_at.line == 1
    assert sym.declared_at.column == 1  # column defaults to 1 when omitted
    assert not sym.is_static


def test_symbol_result_from_listing():
    module = parse_fixture("fact.ll")
    builder = make_builder()
    sym = builder.build_symbol(module, 14)
    assert sym.name == "result"
    assert sym.declared_at.line == 2
    assert not sym.is_static


def test_symbol_registered_in_scope_once():
    module = parse_fixture("fact.ll")
    builder = make_builder()
    builder.build_symbol(module, 11)
    builder.build_symbol(module, 11)
    scope = builder.build_scope(module, 7)
    assert [s.name for s in scope.members].count("n") == 1


def test_global_symbol_is_static_member_of_compilation_unit():
    module = parse_fixture("global.ll")
    builder = make_builder()
    sym = builder.build_symbol(module, 5)
    assert sym.name == "counter"
    assert sym.is_static
    assert sym.enclosing_scope.kind == "compilation_unit"
    assert sym in sym.enclosing_scope.members


def test_symbol_without_type_is_malformed():
    module = parse_module('!1 = LocalVariable(name: "x", scope: !2)\n'
                          '!2 = File(name: "a.c", path: "")\n', "t.ll")
    with pytest.raises(MalformedMetadata):
        make_builder().build_symbol(module, 1)


# -- types


def test_basic_type_int():
    module = parse_fixture("fact.ll")
    builder = make_builder()
    ty = builder.build_type(module, 10)
    assert isinstance(ty, PrimitiveType)
    assert ty.name == "int"
    assert ty.bit_size == 32
    assert ty.encoding == SIGNED_INT


def test_const_qualified_type_name():
    module = parse_fixture("calc.ll")
    builder = make_builder()
    ty = builder.build_type(module, 21)
    assert isinstance(ty, QualifiedType)
    assert ty.qualifier == "const"
    assert ty.name == "const int"
    assert ty.base.name == "int"


def test_enum_type_labels():
    module = parse_fixture("calc.ll")
    builder = make_builder()
    ty = builder.build_type(module, 3)
    assert isinstance(ty, EnumTypeDesc)
    assert ty.labels == {0: "ADD", 1: "SUB", 2: "MUL", 3: "DIV"}
    assert ty.name == "Op"


def test_reference_type_name():
    module = parse_fixture("calc.ll")
    builder = make_builder()
    ty = builder.build_type(module, 17)
    assert isinstance(ty, PointerType)
    assert ty.reference
    assert ty.name == "Op &"


def test_pointer_cycle_resolved_lazily():
    module = parse_fixture("list.ll")
    builder = make_builder()
    node = builder.build_type(module, 3)
    assert isinstance(node, StructTypeDesc)
    names = [m[0] for m in node.members]
    assert names == ["value", "next"]
    next_ty = node.members[1][1]
    assert isinstance(next_ty, PointerType)
    assert next_ty.pointee is node  # the cycle closes on the same descriptor


def test_type_memoization_identity():
    module = parse_fixture("list.ll")
    builder = make_builder()
    assert builder.build_type(module, 3) is builder.build_type(module, 3)


INHERITANCE = """
!1 = !DIFile(filename: "shapes.cpp", directory: "/build/src")
!2 = !DIBasicType(name: "int", size: 32, encoding: DW_ATE_signed)
!3 = distinct !DICompositeType(tag: DW_TAG_class_type, name: "Base", file: !1, line: 1, size: 64, elements: !4)
!4 = !{!5, !6}
!5 = !DIDerivedType(tag: DW_TAG_member, name: "x", scope: !3, baseType: !2, size: 32, offset: 0)
!6 = !DIDerivedType(tag: DW_TAG_member, name: "pad", scope: !3, baseType: !2, size: 32, offset: 32)
!7 = distinct !DICompositeType(tag: DW_TAG_class_type, name: "Derived", file: !1, line: 5, size: 128, elements: !8)
!8 = !{!9, !10}
!9 = !DIDerivedType(tag: DW_TAG_inheritance, scope: !7, baseType: !3, offset: 0)
!10 = !DIDerivedType(tag: DW_TAG_member, name: "y", scope: !7, baseType: !2, size: 32, offset: 64)
"""


def test_inheritance_flattens_parent_members():
    module = parse_module(INHERITANCE, "shapes.ll")
    builder = make_builder()
    derived = builder.build_type(module, 7)
    members = [(n, off) for n, _, off in derived.members]
    assert members == [("x", 0), ("pad", 32), ("y", 64)]
    offsets = [off for _, off in members]
    assert offsets == sorted(offsets)


def test_missing_size_is_malformed():
    module = parse_module('!1 = BasicType(name: "int", encoding: signed)\n',
                          "t.ll")
    with pytest.raises(MalformedMetadata):
        make_builder().build_type(module, 1)


def test_absent_type_ref_is_foreign():
    builder = make_builder()
    module = parse_fixture("fact.ll")
    ty = builder.build_type(module, None)
    assert ty.name == "<foreign>"


def test_subroutine_pointer_type_name():
    module = parse_fixture("foreign.ll")
    builder = make_builder()
    ty = builder.build_type(module, 6)
    assert isinstance(ty, PointerType)
    assert ty.name == "void (int) *"


# -- source registry


def test_registry_caches_lookup_outcome(tmp_path):
    registry = SourceRegistry([str(tmp_path)])
    missing = registry.resolve("/nowhere", "ghost.c")
    assert missing is None
    # creating the file afterwards does not change the session's outcome
    (tmp_path / "ghost.c").write_text("int main() {}\n")
    assert registry.resolve("/nowhere", "ghost.c") is None


def test_registry_search_root_fallback():
    registry = SourceRegistry([FIXTURES])
    found = registry.resolve("/build/src", "fact.c")
    assert found is not None
    path, text = found
    assert "int fact(int n)" in text


def test_expression_and_symbol_scopes_refuse_members():
    from irdb.debug_meta import expression_scope, symbol_scope
    module = parse_fixture("fact.ll")
    builder = make_builder()
    fn_scope = builder.build_scope(module, 7)
    expr = expression_scope((5, 3), fn_scope)
    sym = builder.build_symbol(module, 11)
    with pytest.raises(MalformedMetadata):
        expr.append_member(sym)
    decl = symbol_scope((1, 1), fn_scope)
    with pytest.raises(MalformedMetadata):
        decl.append_member(sym)
