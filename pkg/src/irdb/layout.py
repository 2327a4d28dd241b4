"""Data layout for IR types: x86-64-like C ABI.

Little-endian throughout.  Integers are aligned to their own size,
pointers are 8 bytes, struct fields are padded to member alignment and
the struct itself to its largest member alignment.  Packed structs have
no padding.  Arrays are contiguous with stride == element size.
"""

from __future__ import annotations

from .ir_model import (ArrayType, IntType, IrError, PtrType, StructType)

POINTER_SIZE = 8


def size_of(ty) -> int:
    if isinstance(ty, IntType):
        return max(1, ty.bits // 8)
    if isinstance(ty, PtrType):
        return POINTER_SIZE
    if isinstance(ty, ArrayType):
        return ty.count * size_of(ty.element)
    if isinstance(ty, StructType):
        if ty.packed:
            return sum(size_of(f) for f in ty.fields)
        size = 0
        for f in ty.fields:
            a = align_of(f)
            size = _round_up(size, a) + size_of(f)
        return _round_up(size, align_of(ty))
    raise IrError(f"type {ty} has no size")


def align_of(ty) -> int:
    if isinstance(ty, IntType):
        return max(1, ty.bits // 8)
    if isinstance(ty, PtrType):
        return POINTER_SIZE
    if isinstance(ty, ArrayType):
        return align_of(ty.element)
    if isinstance(ty, StructType):
        if ty.packed:
            return 1
        return max((align_of(f) for f in ty.fields), default=1)
    raise IrError(f"type {ty} has no alignment")


def field_offset(struct: StructType, index: int) -> int:
    if not 0 <= index < len(struct.fields):
        raise IrError(f"struct field index {index} out of range")
    offset = 0
    for i, f in enumerate(struct.fields):
        if not struct.packed:
            offset = _round_up(offset, align_of(f))
        if i == index:
            return offset
        offset += size_of(f)
    raise AssertionError


def element_offset(ty, index: int) -> tuple[int, object]:
    """Offset and element type for one getelementptr index step."""
    if isinstance(ty, StructType):
        return field_offset(ty, index), ty.fields[index]
    if isinstance(ty, ArrayType):
        return index * size_of(ty.element), ty.element
    raise IrError(f"cannot index into {ty}")


def _round_up(n, a):
    return (n + a - 1) // a * a
