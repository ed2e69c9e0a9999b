"""Layered communication: ID grammar, value codec, text bridge, endpoints."""

from .ber import BerError, ber_decode, ber_encode
from .idgrammar import CommID, CommIDError, LayerSpec, parse_comm_id
from .stack import (
    PATTERNS,
    CommEndpoint,
    ConnectFailedError,
    DecodeError,
    InvalidIdError,
    StackError,
    TlsUnsupportedError,
    build_stack,
)
from .textbridge import Base64Error, b64_decode, b64_encode

WireFrame = bytes
