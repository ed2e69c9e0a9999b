"""Parser for communication ID strings such as ``fbdk[].ip[192.168.20.1:61499]``.

An ID is a ``.``-separated chain of ``name[p1:p2:...]`` layers, payload
layers first and exactly one transport layer last.  Splitting on ``.`` and
``:`` only happens at bracket depth zero, so parameters may themselves
contain dots (IP addresses, JID domains).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

PAYLOAD_LAYERS = frozenset({"fbdk"})
TRANSPORT_LAYERS = frozenset({"ip", "xmpp"})

_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class CommIDError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    name: str
    params: tuple[str, ...] = ()

    def __str__(self):
        return f"{self.name}[{':'.join(self.params)}]"


@dataclass(frozen=True)
class CommID:
    layers: tuple[LayerSpec, ...]

    @property
    def transport(self) -> LayerSpec:
        return self.layers[-1]

    @property
    def payload_layers(self) -> tuple[LayerSpec, ...]:
        return self.layers[:-1]

    def __str__(self):
        return ".".join(str(layer) for layer in self.layers)


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise CommIDError(f"unbalanced ']' at position {i}")
        elif ch == sep and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    if depth != 0:
        raise CommIDError("unbalanced '['")
    parts.append(text[start:])
    return parts


def _parse_layer(segment: str) -> LayerSpec:
    if not segment:
        raise CommIDError("empty layer segment")
    open_at = segment.find("[")
    if open_at < 0 or not segment.endswith("]"):
        raise CommIDError(f"layer {segment!r} lacks [parameters]")
    name, inner = segment[:open_at], segment[open_at + 1:-1]
    if not _NAME.match(name):
        raise CommIDError(f"bad layer name {name!r}")
    # the brackets must enclose everything after the name
    depth = 0
    for ch in inner:
        depth += ch == "["
        depth -= ch == "]"
        if depth < 0:
            raise CommIDError(f"layer {segment!r}: text after closing bracket")
    params = tuple(_split_top(inner, ":")) if inner else ()
    return LayerSpec(name, params)


def parse_comm_id(text: str) -> CommID:
    layers = tuple(_parse_layer(seg) for seg in _split_top(text, "."))
    for i, layer in enumerate(layers):
        last = i == len(layers) - 1
        if layer.name in TRANSPORT_LAYERS:
            if not last:
                raise CommIDError(f"transport layer {layer.name!r} must be last")
        elif layer.name in PAYLOAD_LAYERS:
            if last:
                raise CommIDError("missing transport layer (ip or xmpp)")
        else:
            raise CommIDError(f"unknown layer {layer.name!r}")
    return CommID(layers)
