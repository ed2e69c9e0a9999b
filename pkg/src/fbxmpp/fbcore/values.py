"""Typed elementary data values carried on data pins and over the wire."""

from __future__ import annotations

import enum
from dataclasses import dataclass

MAX_STRING_BYTES = 0xFFFF


class Kind(enum.Enum):
    BOOL = "BOOL"
    SINT = "SINT"
    INT = "INT"
    DINT = "DINT"
    STRING = "STRING"


# (min, max) for the signed integer kinds
INT_RANGES = {
    Kind.SINT: (-(1 << 7), (1 << 7) - 1),
    Kind.INT: (-(1 << 15), (1 << 15) - 1),
    Kind.DINT: (-(1 << 31), (1 << 31) - 1),
}


class KindError(ValueError):
    """Raised when a payload does not fit its declared kind."""


@dataclass(frozen=True)
class Value:
    kind: Kind
    payload: bool | int | str

    def __post_init__(self):
        kind, payload = self.kind, self.payload
        if not isinstance(kind, Kind):
            raise KindError(f"not a value kind: {kind!r}")
        if kind is Kind.BOOL:
            if not isinstance(payload, bool):
                raise KindError(f"BOOL payload must be bool, got {payload!r}")
        elif kind is Kind.STRING:
            if not isinstance(payload, str):
                raise KindError(f"STRING payload must be str, got {payload!r}")
            if len(payload.encode("utf-8")) > MAX_STRING_BYTES:
                raise KindError("STRING payload exceeds 65535 UTF-8 bytes")
        else:
            if isinstance(payload, bool) or not isinstance(payload, int):
                raise KindError(f"{kind.value} payload must be int, got {payload!r}")
            lo, hi = INT_RANGES[kind]
            if not lo <= payload <= hi:
                raise KindError(f"{payload} out of range for {kind.value}")

    def __str__(self):
        if self.kind is Kind.BOOL:
            return "1" if self.payload else "0"
        return str(self.payload)


def zero(kind: Kind) -> Value:
    """The initial value of a pin of the given kind."""
    if kind is Kind.BOOL:
        return Value(kind, False)
    if kind is Kind.STRING:
        return Value(kind, "")
    return Value(kind, 0)


def parse_literal(kind: Kind, text: str) -> Value:
    """Parse a configuration literal (as written in a network definition)."""
    if kind is Kind.BOOL:
        low = text.strip().lower()
        if low in ("1", "true"):
            return Value(kind, True)
        if low in ("0", "false"):
            return Value(kind, False)
        raise KindError(f"bad BOOL literal {text!r}")
    if kind is Kind.STRING:
        return Value(kind, text)
    try:
        number = int(text.strip(), 0)
    except ValueError:
        raise KindError(f"bad {kind.value} literal {text!r}") from None
    return Value(kind, number)


def BOOL(b: bool) -> Value:
    return Value(Kind.BOOL, bool(b))


def SINT(i: int) -> Value:
    return Value(Kind.SINT, i)


def INT(i: int) -> Value:
    return Value(Kind.INT, i)


def DINT(i: int) -> Value:
    return Value(Kind.DINT, i)


def STRING(s: str) -> Value:
    return Value(Kind.STRING, s)
