from __future__ import annotations

from dataclasses import dataclass


class JidError(ValueError):
    pass


@dataclass(frozen=True)
class Jid:
    """``node@domain[/resource]``; an empty resource makes a bare JID."""

    node: str
    domain: str
    resource: str = ""

    def __post_init__(self):
        if not self.node:
            raise JidError("empty node")
        if not self.domain:
            raise JidError("empty domain")
        if "@" in self.node:
            raise JidError(f"node {self.node!r} contains '@'")
        if "@" in self.domain or "/" in self.domain:
            raise JidError(f"domain {self.domain!r} contains '@' or '/'")

    @property
    def bare(self) -> "Jid":
        return Jid(self.node, self.domain) if self.resource else self

    @property
    def is_bare(self) -> bool:
        return not self.resource

    def __str__(self):
        base = f"{self.node}@{self.domain}"
        return f"{base}/{self.resource}" if self.resource else base


def jid_parse(text: str) -> Jid:
    node, at, rest = text.partition("@")
    if not at:
        raise JidError(f"{text!r} has no '@'")
    domain, _, resource = rest.partition("/")
    return Jid(node, domain, resource)
