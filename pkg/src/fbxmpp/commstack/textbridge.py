"""Base64 bridge between binary frames and XML character data."""

import base64
import binascii


class Base64Error(ValueError):
    pass


def b64_encode(frame: bytes) -> str:
    return base64.b64encode(frame).decode("ascii")


def b64_decode(text: str) -> bytes:
    """Strict decoding: alphabet characters only, correct padding, and the
    unused trailing bits must be zero."""
    if len(text) % 4:
        raise Base64Error(f"length {len(text)} is not a multiple of 4")
    try:
        frame = base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise Base64Error(str(exc)) from None
    if b64_encode(frame) != text:
        raise Base64Error("non-canonical encoding")
    return frame
