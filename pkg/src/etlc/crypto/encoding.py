"""Canonical length-prefixed byte encoding.

Every field is written as a 4-byte big-endian length followed by the raw
bytes.  Integers are written big-endian at a caller-chosen fixed width so
that encodings are unique.
"""

from __future__ import annotations

import struct
from typing import List, Sequence


class DecodeError(ValueError):
    """Raised on truncated, oversized or otherwise non-canonical input."""


_LEN = struct.Struct(">I")


def pack(*fields: bytes) -> bytes:
    out = bytearray()
    for f in fields:
        out += _LEN.pack(len(f))
        out += f
    return bytes(out)


def unpack(data: bytes, count: int | None = None) -> List[bytes]:
    """Split ``data`` back into fields.

    When ``count`` is given, exactly that many fields must be present.
    """
    fields = []
    pos = 0
    n = len(data)
    while pos < n:
        if pos + 4 > n:
            raise DecodeError("truncated length prefix")
        (length,) = _LEN.unpack_from(data, pos)
        pos += 4
        if pos + length > n:
            raise DecodeError("field runs past end of input")
        fields.append(bytes(data[pos:pos + length]))
        pos += length
    if count is not None and len(fields) != count:
        raise DecodeError(f"expected {count} fields, found {len(fields)}")
    return fields


def int_to_bytes(value: int, width: int) -> bytes:
    if value < 0:
        raise ValueError("negative integers are not encodable")
    try:
        return value.to_bytes(width, "big")
    except OverflowError:
        raise ValueError(f"{value} does not fit in {width} bytes") from None


def bytes_to_int(data: bytes, width: int | None = None) -> int:
    if width is not None and len(data) != width:
        raise DecodeError(f"expected {width}-byte integer, got {len(data)}")
    return int.from_bytes(data, "big")


def pack_list(items: Sequence[bytes]) -> bytes:
    return pack(int_to_bytes(len(items), 4), *items)


def unpack_list(data: bytes) -> List[bytes]:
    fields = unpack(data)
    if not fields:
        raise DecodeError("empty list encoding")
    count = bytes_to_int(fields[0], 4)
    if count != len(fields) - 1:
        raise DecodeError("list count mismatch")
    return fields[1:]
