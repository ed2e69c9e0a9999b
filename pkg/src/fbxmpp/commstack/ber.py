"""BER value codec for the ``fbdk`` layer.

Each value is one application-class primitive with a single-octet tag.
Booleans carry their value in the tag; integers are fixed-width big-endian
two's complement; strings have a two-octet big-endian length:

====== ============ ===========================
tag    kind         contents
====== ============ ===========================
0x40   BOOL false   (none)
0x41   BOOL true    (none)
0x42   SINT         1 octet
0x43   INT          2 octets
0x44   DINT         4 octets
0x50   STRING       length (2 octets) + UTF-8
====== ============ ===========================
"""

from __future__ import annotations

from ..fbcore.values import MAX_STRING_BYTES, Kind, Value

TAG_FALSE = 0x40
TAG_TRUE = 0x41
TAG_SINT = 0x42
TAG_INT = 0x43
TAG_DINT = 0x44
TAG_STRING = 0x50

_INT_TAGS = {Kind.SINT: (TAG_SINT, 1), Kind.INT: (TAG_INT, 2), Kind.DINT: (TAG_DINT, 4)}
_TAG_INTS = {tag: (kind, width) for kind, (tag, width) in _INT_TAGS.items()}


class BerError(ValueError):
    pass


def ber_encode(values) -> bytes:
    out = bytearray()
    for value in values:
        kind = value.kind
        if kind is Kind.BOOL:
            out.append(TAG_TRUE if value.payload else TAG_FALSE)
        elif kind is Kind.STRING:
            raw = value.payload.encode("utf-8")
            if len(raw) > MAX_STRING_BYTES:
                raise BerError("STRING longer than 65535 bytes")
            out.append(TAG_STRING)
            out += len(raw).to_bytes(2, "big")
            out += raw
        else:
            tag, width = _INT_TAGS[kind]
            out.append(tag)
            out += value.payload.to_bytes(width, "big", signed=True)
    return bytes(out)


def ber_decode(frame: bytes) -> list[Value]:
    values = []
    pos, end = 0, len(frame)

    def take(n):
        nonlocal pos
        if pos + n > end:
            raise BerError(f"truncated value at offset {pos}: need {n} octets, have {end - pos}")
        chunk = frame[pos:pos + n]
        pos += n
        return chunk

    while pos < end:
        tag = frame[pos]
        pos += 1
        if tag == TAG_FALSE:
            values.append(Value(Kind.BOOL, False))
        elif tag == TAG_TRUE:
            values.append(Value(Kind.BOOL, True))
        elif tag in _TAG_INTS:
            kind, width = _TAG_INTS[tag]
            values.append(Value(kind, int.from_bytes(take(width), "big", signed=True)))
        elif tag == TAG_STRING:
            length = int.from_bytes(take(2), "big")
            try:
                text = take(length).decode("utf-8")
            except UnicodeDecodeError as exc:
                raise BerError(f"STRING is not UTF-8: {exc}") from None
            values.append(Value(Kind.STRING, text))
        else:
            raise BerError(f"unknown tag 0x{tag:02x} at offset {pos - 1}")
    return values
