import binascii

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbxmpp.commstack.textbridge import Base64Error, b64_decode, b64_encode

RFC4648_VECTORS = [
    (b"", ""),
    (b"f", "Zg=="),
    (b"fo", "Zm8="),
    (b"foo", "Zm9v"),
    (b"foob", "Zm9vYg=="),
    (b"fooba", "Zm9vYmE="),
    (b"foobar", "Zm9vYmFy"),
]


@pytest.mark.parametrize("raw,text", RFC4648_VECTORS)
def test_rfc4648_vectors(raw, text):
    assert b64_encode(raw) == text
    assert b64_decode(text) == raw


@settings(max_examples=300)
@given(st.binary(max_size=300))
def test_roundtrip_and_oracle(frame):
    text = b64_encode(frame)
    assert text == binascii.b2a_base64(frame, newline=False).decode("ascii")
    assert b64_decode(text) == frame


@pytest.mark.parametrize("text", [
    "Zg=",        # length not a multiple of 4
    "Zg",
    "Zm9v\n",
    "Zm 9",
    "Zh==",       # non-zero padding bits
    "Zm8=Zm8=",   # padding in the middle
    "Zm9-",       # URL-safe alphabet
    "Zm9é",
])
def test_strict_rejections(text):
    with pytest.raises(Base64Error):
        b64_decode(text)
