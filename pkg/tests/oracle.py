"""Independent byte-level decoding used to check rendered values.

Reads raw bytes straight from simulated memory and decodes them by the
documented layout rules (little-endian, two's complement, metadata bit
offsets).  Deliberately shares nothing with the AbstractValue/SourceValue
rendering path it verifies.
"""

import struct

from irdb.debug_meta import (ArrayTypeDesc, EnumTypeDesc, PointerType,
                             PrimitiveType, QualifiedType, StructTypeDesc,
                             BOOL, CHAR, FLOAT, UNSIGNED_INT)


def decode(memory, addr, ty):
    """Decode the value of type `ty` stored at `addr` into a Python value."""
    if isinstance(ty, QualifiedType):
        return decode(memory, addr, ty.base)
    if isinstance(ty, PrimitiveType):
        size = max(1, ty.bit_size // 8)
        raw = int.from_bytes(memory.read(addr, size), "little")
        raw &= (1 << ty.bit_size) - 1
        if ty.encoding == BOOL:
            return bool(raw)
        if ty.encoding == CHAR:
            return raw & 0xFF
        if ty.encoding == FLOAT:
            fmt = "<f" if ty.bit_size == 32 else "<d"
            return struct.unpack(fmt, raw.to_bytes(size, "little"))[0]
        if ty.encoding == UNSIGNED_INT:
            return raw
        if raw >= 1 << (ty.bit_size - 1):
            raw -= 1 << ty.bit_size
        return raw
    if isinstance(ty, EnumTypeDesc):
        raw = int.from_bytes(memory.read(addr, ty.bit_size // 8), "little")
        if raw >= 1 << (ty.bit_size - 1):
            raw -= 1 << ty.bit_size
        return ty.labels.get(raw, raw)
    if isinstance(ty, PointerType):
        return int.from_bytes(memory.read(addr, 8), "little")
    if isinstance(ty, StructTypeDesc):
        out = {}
        for name, mty, bit_off in ty.members:
            assert bit_off % 8 == 0
            out[name] = decode(memory, addr + bit_off // 8, mty)
        return out
    if isinstance(ty, ArrayTypeDesc):
        stride = ty.element.bit_size // 8
        return [decode(memory, addr + i * stride, ty.element)
                for i in range(ty.length)]
    raise AssertionError(f"oracle cannot decode {ty!r}")


def assert_render_matches(node, memory, addr, ty, path=""):
    """Compare a rendered DisplayNode tree against the oracle decoding."""
    if isinstance(ty, QualifiedType):
        assert_render_matches(node, memory, addr, ty.base, path)
        return
    expected = decode(memory, addr, ty)
    where = path or "value"
    if isinstance(ty, PrimitiveType):
        if ty.encoding == BOOL:
            assert node.display == ("true" if expected else "false"), where
        elif ty.encoding == CHAR:
            want = f"'{chr(expected)}'" if 32 <= expected < 127 else str(expected)
            assert node.display == want, where
        elif ty.encoding == FLOAT:
            assert node.display == repr(expected), where
        else:
            assert node.display == str(expected), where
        return
    if isinstance(ty, EnumTypeDesc):
        assert node.display == str(expected) if not isinstance(expected, str) \
            else node.display == expected, where
        return
    if isinstance(ty, PointerType) and not ty.reference:
        assert node.display == hex(expected), where
        return
    if isinstance(ty, StructTypeDesc):
        assert node.display == hex(addr), where
        from irdb.value_inspection import render
        got = dict()
        for child_name, child_sv in node.children:
            got[child_name] = render(child_sv, memory)
        for name, mty, bit_off in ty.members:
            assert name in got, f"{where}.{name} missing"
            assert_render_matches(got[name], memory, addr + bit_off // 8,
                                  mty, f"{where}.{name}")
        return
    # other shapes are not memory-resident in the corpus
