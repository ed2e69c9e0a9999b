import pytest

from fbxmpp.fbcore.values import (BOOL, DINT, INT, SINT, STRING, Kind, KindError, Value,
                                  parse_literal, zero)


def test_zero_values():
    assert zero(Kind.BOOL) == BOOL(False)
    assert zero(Kind.DINT) == DINT(0)
    assert zero(Kind.STRING) == STRING("")


@pytest.mark.parametrize("kind,lo,hi", [(Kind.SINT, -128, 127), (Kind.INT, -32768, 32767),
                                        (Kind.DINT, -2**31, 2**31 - 1)])
def test_integer_ranges(kind, lo, hi):
    Value(kind, lo)
    Value(kind, hi)
    with pytest.raises(KindError):
        Value(kind, lo - 1)
    with pytest.raises(KindError):
        Value(kind, hi + 1)


def test_payload_type_checked():
    with pytest.raises(KindError):
        Value(Kind.BOOL, 1)
    with pytest.raises(KindError):
        Value(Kind.INT, True)
    with pytest.raises(KindError):
        Value(Kind.STRING, b"bytes")
    with pytest.raises(KindError):
        Value("BOOL", True)


def test_string_byte_limit_counts_utf8():
    STRING("x" * 65535)
    with pytest.raises(KindError):
        STRING("é" * 40000)  # 80000 bytes


def test_literals():
    assert parse_literal(Kind.BOOL, "1") == BOOL(True)
    assert parse_literal(Kind.BOOL, "FALSE") == BOOL(False)
    assert parse_literal(Kind.DINT, "500") == DINT(500)
    assert parse_literal(Kind.INT, "-0x10") == INT(-16)
    assert parse_literal(Kind.STRING, " a b ") == STRING(" a b ")
    with pytest.raises(KindError):
        parse_literal(Kind.BOOL, "yes")
    with pytest.raises(KindError):
        parse_literal(Kind.SINT, "300")
    with pytest.raises(KindError):
        parse_literal(Kind.DINT, "5.0")


def test_str_of_bool_is_digit():
    assert str(BOOL(True)) == "1" and str(BOOL(False)) == "0"
    assert str(SINT(-3)) == "-3"
