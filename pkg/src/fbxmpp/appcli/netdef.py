"""Line-oriented network definition files.

::

    # comment
    [devices]
    netop = 127.0.0.1 role=publisher
    cem   = 127.0.0.1

    [fbs]
    CYCLE = E_CYCLE @netop DT=500
    PUB   = PUBLISH_3 @netop QI=1 ID="fbdk[].ip[127.0.0.1:61499]"

    [events]
    CYCLE.EO = I_OV.REQ, I_NV.REQ

    [data]
    I_OV.OUT = RS_OV.SET

An FB line is ``NAME = TYPE @DEVICE`` followed by ``PIN=literal`` words
(shell-style quoting).  A connection line fans one source out to a comma
separated list of sinks.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field

from ..commstack.idgrammar import CommIDError, parse_comm_id
from ..fbcore.runtime import Connection, Device, FBNetwork, FBSpec, NetworkError
from ..sifb import sifb_type

SECTIONS = ("devices", "fbs", "events", "data")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_REF = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\.[A-Za-z_][A-Za-z0-9_]*\Z")


class NetDefError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None,
                 path: str | None = None):
        where = ""
        if line is not None:
            where = f"{path or '<netdef>'}:{line}:{col or 1}: "
        super().__init__(where + message)
        self.line = line
        self.col = col


@dataclass
class NetDefDocument(FBNetwork):
    path: str | None = None
    lines: dict[str, int] = field(default_factory=dict)

    def slice_for_device(self, device: str) -> FBNetwork:
        return slice_for_device(self, device)


def _split_entry(text, lineno, indent, path):
    key, sep, value = text.partition("=")
    if not sep:
        raise NetDefError("expected 'key = value'", lineno, indent + 1, path)
    key, value = key.strip(), value.strip()
    col = indent + text.index("=") + 2
    if not key:
        raise NetDefError("missing key", lineno, indent + 1, path)
    if not value:
        raise NetDefError(f"missing value for {key!r}", lineno, col, path)
    return key, value, col


def _device(key, value, lineno, col, path):
    if not _NAME.match(key):
        raise NetDefError(f"bad device name {key!r}", lineno, 1, path)
    words = value.split()
    host, role = words[0], ""
    for word in words[1:]:
        name, sep, val = word.partition("=")
        if name != "role" or not sep:
            raise NetDefError(f"unknown device attribute {word!r}", lineno, col, path)
        role = val
    return Device(key, host, role)


def _fb(key, value, lineno, col, path):
    if not _NAME.match(key):
        raise NetDefError(f"bad FB name {key!r}", lineno, 1, path)
    try:
        words = shlex.split(value, comments=False)
    except ValueError as exc:
        raise NetDefError(str(exc), lineno, col, path) from None
    if len(words) < 2 or not words[1].startswith("@") or len(words[1]) < 2:
        raise NetDefError(f"FB {key}: expected 'TYPE @DEVICE [PIN=value ...]'", lineno, col, path)
    params = {}
    for word in words[2:]:
        pin, sep, literal = word.partition("=")
        if not sep or not _NAME.match(pin):
            raise NetDefError(f"FB {key}: bad parameter {word!r}", lineno, col, path)
        if pin in params:
            raise NetDefError(f"FB {key}: parameter {pin} given twice", lineno, col, path)
        params[pin] = literal
    return FBSpec(key, words[0], words[1][1:], params)


def _connections(key, value, lineno, col, path):
    sinks = [s.strip() for s in value.split(",")]
    for ref in [key, *sinks]:
        if not _REF.match(ref):
            raise NetDefError(f"bad pin reference {ref!r}, expected FB.PIN", lineno, col, path)
    return [Connection(key, sink) for sink in sinks]


def parse_netdef(text: str, path: str | None = None) -> NetDefDocument:
    """Parse and validate a network definition."""
    doc = NetDefDocument(path=path)
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        line = line.strip()
        if line.startswith("["):
            if not line.endswith("]"):
                raise NetDefError("unterminated section header", lineno, indent + 1, path)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise NetDefError(f"unknown section [{section}]", lineno, indent + 1, path)
            continue
        if section is None:
            raise NetDefError("entry outside of a section", lineno, indent + 1, path)
        key, value, col = _split_entry(line, lineno, indent, path)
        if section == "devices":
            doc.devices.append(_device(key, value, lineno, col, path))
        elif section == "fbs":
            doc.fbs.append(_fb(key, value, lineno, col, path))
            doc.lines[key] = lineno
        elif section == "events":
            doc.event_connections += _connections(key, value, lineno, col, path)
        else:
            doc.data_connections += _connections(key, value, lineno, col, path)
    _check(doc)
    return doc


def _strip_comment(raw: str) -> str:
    quote = None
    for i, ch in enumerate(raw):
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch == "#":
            return raw[:i].rstrip()
    return raw.rstrip()


def _check(doc: NetDefDocument) -> None:
    try:
        doc.validate()
    except NetworkError as exc:
        raise NetDefError(f"{doc.path or '<netdef>'}: {exc}") from None
    for spec in doc.fbs:
        if sifb_type(spec.type) is None:
            continue
        ident = spec.params.get("ID")
        line = doc.lines.get(spec.name)
        if ident is None:
            raise NetDefError(f"FB {spec.name}: communication block without an ID", line, 1, doc.path)
        try:
            parse_comm_id(str(ident))
        except CommIDError as exc:
            raise NetDefError(f"FB {spec.name}: bad ID: {exc}", line, 1, doc.path) from None


def load_netdef(path) -> NetDefDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_netdef(fh.read(), str(path))


def slice_for_device(doc: FBNetwork, device: str) -> FBNetwork:
    try:
        return doc.slice(device)
    except NetworkError as exc:
        raise NetDefError(str(exc)) from None
