"""Presence / iq / message stanzas and the ``forte`` payload element."""

from __future__ import annotations

from dataclasses import dataclass, field

from .jid import Jid, jid_parse
from .xml import XmlNode, xml_serialize

FORTE_NS = "forte"
AUTH_NS = "forte-auth"

IQ_TYPES = ("get", "set", "result", "error")
PRESENCE_TYPES = (None, "subscribe", "subscribed", "unsubscribed")
KINDS = ("presence", "iq", "message")


class StanzaError(ValueError):
    pass


@dataclass
class Stanza:
    kind: str
    frm: Jid | None = None
    to: Jid | None = None
    id: str | None = None
    type: str | None = None
    payload: list[XmlNode] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise StanzaError(f"unknown stanza kind {self.kind!r}")
        if self.kind == "iq":
            if self.type not in IQ_TYPES:
                raise StanzaError(f"bad iq type {self.type!r}")
            if not self.id:
                raise StanzaError("iq without id")
        elif self.kind == "presence" and self.type not in PRESENCE_TYPES:
            raise StanzaError(f"bad presence type {self.type!r}")

    def to_node(self) -> XmlNode:
        attrs = {}
        if self.type is not None:
            attrs["type"] = self.type
        if self.id is not None:
            attrs["id"] = self.id
        if self.frm is not None:
            attrs["from"] = str(self.frm)
        if self.to is not None:
            attrs["to"] = str(self.to)
        return XmlNode(self.kind, attrs, list(self.payload))

    def serialize(self) -> str:
        return xml_serialize(self.to_node())

    @classmethod
    def from_node(cls, node: XmlNode) -> "Stanza":
        try:
            frm = jid_parse(node.attrs["from"]) if "from" in node.attrs else None
            to = jid_parse(node.attrs["to"]) if "to" in node.attrs else None
        except ValueError as exc:
            raise StanzaError(str(exc)) from None
        return cls(node.name, frm, to, node.attrs.get("id"), node.attrs.get("type"),
                   node.elements())

    def reply(self, type: str, payload=None) -> "Stanza":
        return Stanza(self.kind, self.to, self.frm, self.id, type, list(payload or []))

    @property
    def value_text(self) -> str | None:
        """Text of the ``<Value xmlns='forte'>`` child, or None if absent."""
        for child in self.payload:
            if child.name == "Value" and child.attrs.get("xmlns") == FORTE_NS:
                return child.text
        return None


def value_element(b64: str | None) -> XmlNode:
    return XmlNode("Value", {"xmlns": FORTE_NS}, [b64] if b64 else [])


def error_element(condition: str, type: str = "cancel") -> XmlNode:
    return XmlNode("error", {"type": type}, [XmlNode(condition)])


def error_condition(stanza: Stanza) -> str | None:
    for child in stanza.payload:
        if child.name == "error":
            inner = child.elements()
            return inner[0].name if inner else "undefined-condition"
    return None
