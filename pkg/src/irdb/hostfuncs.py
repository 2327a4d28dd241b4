"""Host functions callable from guest programs by name.

A small registry stands in for the C runtime: a printf subset writing to
the session output sink, malloc/free over the simulated heap, plus
test-only producers of foreign (host-owned, opaque) values.
"""

from __future__ import annotations

from .interpreter import (ForeignValue, GuestTrap, IntValue, PtrValue,
                          make_int, to_signed)


def _read_cstring(state, addr, limit=1 << 16):
    out = bytearray()
    for i in range(limit):
        b = state.memory.read(addr + i, 1)
        if b == b"\0":
            return out.decode("utf-8", errors="replace")
        out += b
    raise GuestTrap("unterminated string")


def host_printf(state, args):
    if not args:
        raise GuestTrap("printf requires a format string")
    fmt = _read_cstring(state, state._as_addr(args[0]))
    rest = list(args[1:])
    out = []
    i = 0
    while i < len(fmt):
        c = fmt[i]
        if c != "%":
            out.append(c)
            i += 1
            continue
        j = i + 1
        while j < len(fmt) and fmt[j] in "l0123456789z":
            j += 1
        if j >= len(fmt):
            out.append("%")
            break
        conv = fmt[j]
        if conv == "%":
            out.append("%")
            i = j + 1
            continue
        if not rest:
            raise GuestTrap(f"printf: missing argument for %{conv}")
        arg = rest.pop(0)
        if conv in "di":
            out.append(str(arg.signed() if isinstance(arg, IntValue)
                           else state._as_addr(arg)))
        elif conv == "u":
            out.append(str(arg.value if isinstance(arg, IntValue)
                           else state._as_addr(arg)))
        elif conv == "x":
            out.append(format(arg.value if isinstance(arg, IntValue)
                              else state._as_addr(arg), "x"))
        elif conv == "c":
            out.append(chr(arg.value & 0xFF))
        elif conv == "s":
            out.append(_read_cstring(state, state._as_addr(arg)))
        elif conv == "p":
            out.append(hex(state._as_addr(arg)))
        else:
            raise GuestTrap(f"printf: unsupported conversion %{conv}")
        i = j + 1
    text = "".join(out)
    state.output(text)
    return make_int(32, len(text))


def host_putchar(state, args):
    code = args[0].value & 0xFF if isinstance(args[0], IntValue) else 0
    state.output(chr(code))
    return make_int(32, code)


def host_malloc(state, args):
    size = args[0].value if isinstance(args[0], IntValue) else 0
    return PtrValue(state.memory.allocate(size, "heap"))


def host_free(state, args):
    state.memory.free(state._as_addr(args[0]))
    return None


def host_abs(state, args):
    v = to_signed(args[0].value, args[0].bits)
    return make_int(args[0].bits, abs(v))


# -- test-only foreign value producers


def _identity_callable(state, args):
    return args[0] if args else None


def host_make_foreign(state, args):
    """Produce an opaque host value that is callable from guest code."""
    return ForeignValue(payload=_identity_callable, label="host function")


def host_make_foreign_data(state, args):
    """Produce an opaque, non-callable host value."""
    return ForeignValue(payload={"kind": "host object"}, label="host object")


DEFAULT_HOST = {
    "@printf": host_printf,
    "@putchar": host_putchar,
    "@malloc": host_malloc,
    "@free": host_free,
    "@abs": host_abs,
    "@host_make_foreign": host_make_foreign,
    "@host_make_foreign_data": host_make_foreign_data,
}
