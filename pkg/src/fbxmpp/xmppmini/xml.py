"""A small XML subset: elements, attributes, character data and the five
predefined entities.  Comments, CDATA sections, processing instructions and
DOCTYPE declarations are rejected.

:class:`Tokenizer` is an incremental pull tokenizer.  :func:`xml_parse`
builds a tree from one complete element; :class:`StreamReader` turns the
bytes of an XMPP stream (an unclosed ``<stream>`` root whose children are
stanzas) into stream-open, stanza and stream-close events.
"""

from __future__ import annotations

import codecs
import re
from dataclasses import dataclass, field

ENTITIES = {"amp": "&", "lt": "<", "gt": ">", "quot": '"', "apos": "'"}

_NAME = r"[A-Za-z_][A-Za-z0-9._:\-]*"
_ATTR = re.compile(rf"\s+({_NAME})\s*=\s*(?:'([^']*)'|\"([^\"]*)\")")
_START = re.compile(rf"<({_NAME})((?:\s+{_NAME}\s*=\s*(?:'[^']*'|\"[^\"]*\"))*)\s*(/?)>\Z")
_END = re.compile(rf"</({_NAME})\s*>\Z")
_VALID_NAME = re.compile(rf"{_NAME}\Z")


class XmlError(ValueError):
    pass


@dataclass
class XmlNode:
    name: str
    attrs: dict[str, str] = field(default_factory=dict)
    children: list["XmlNode | str"] = field(default_factory=list)

    @property
    def text(self) -> str:
        return "".join(c for c in self.children if isinstance(c, str))

    def elements(self) -> list["XmlNode"]:
        return [c for c in self.children if isinstance(c, XmlNode)]

    def find(self, name: str, xmlns: str | None = None) -> "XmlNode | None":
        for child in self.elements():
            if child.name == name and (xmlns is None or child.attrs.get("xmlns") == xmlns):
                return child
        return None

    def get(self, attr: str, default: str | None = None) -> str | None:
        return self.attrs.get(attr, default)


def unescape(text: str) -> str:
    if "&" not in text:
        return text
    out, i = [], 0
    while True:
        j = text.find("&", i)
        if j < 0:
            out.append(text[i:])
            return "".join(out)
        k = text.find(";", j)
        ref = text[j + 1:k] if k >= 0 else ""
        out.append(text[i:j])
        if ref in ENTITIES:
            out.append(ENTITIES[ref])
        else:
            out.append(_char_ref(ref, text[j:j + 10]))
        i = k + 1


def _char_ref(ref: str, context: str) -> str:
    try:
        if ref.startswith("#x"):
            return chr(int(ref[2:], 16))
        if ref.startswith("#") and ref[1:].isdigit():
            return chr(int(ref[1:]))
    except (ValueError, OverflowError):
        pass
    raise XmlError(f"bad entity reference near {context!r}")


def escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;").replace("'", "&apos;"))


class Tokenizer:
    """Yields ``("start", name, attrs, empty)``, ``("end", name)`` and
    ``("text", data)`` tokens as soon as they are complete."""

    def __init__(self):
        self.buf = ""

    def feed(self, text: str) -> None:
        self.buf += text

    def tokens(self, final: bool = False):
        buf, pos = self.buf, 0
        try:
            while pos < len(buf):
                if buf[pos] != "<":
                    nxt = buf.find("<", pos)
                    if nxt < 0:
                        if not final:
                            return
                        nxt = len(buf)
                    yield ("text", unescape(buf[pos:nxt]))
                    pos = nxt
                    continue
                if len(buf) - pos < 2:
                    if final:
                        raise XmlError("unterminated tag")
                    return
                if buf[pos + 1] in "!?":
                    raise XmlError(f"unsupported construct {buf[pos:pos + 9]!r}")
                end = _tag_end(buf, pos)
                if end < 0:
                    if final:
                        raise XmlError("unterminated tag")
                    return
                tag = buf[pos:end + 1]
                pos = end + 1
                if tag.startswith("</"):
                    m = _END.match(tag)
                    if not m:
                        raise XmlError(f"malformed end tag {tag!r}")
                    yield ("end", m.group(1))
                    continue
                m = _START.match(tag)
                if not m:
                    raise XmlError(f"malformed tag {tag!r}")
                attrs = {}
                for am in _ATTR.finditer(m.group(2)):
                    name = am.group(1)
                    raw = am.group(2) if am.group(2) is not None else am.group(3)
                    if name in attrs:
                        raise XmlError(f"duplicate attribute {name!r}")
                    if "<" in raw:
                        raise XmlError(f"'<' in value of attribute {name!r}")
                    attrs[name] = unescape(raw)
                yield ("start", m.group(1), attrs, m.group(3) == "/")
        finally:
            self.buf = buf[pos:]


def _tag_end(buf: str, pos: int) -> int:
    quote = None
    for i in range(pos + 1, len(buf)):
        ch = buf[i]
        if quote:
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == ">":
            return i
        elif ch == "<":
            raise XmlError("'<' inside tag")
    return -1


class _TreeBuilder:
    def __init__(self):
        self.stack: list[XmlNode] = []

    def start(self, name, attrs, empty) -> XmlNode | None:
        node = XmlNode(name, attrs)
        if self.stack:
            self.stack[-1].children.append(node)
        if empty:
            return node if not self.stack else None
        self.stack.append(node)
        return None

    def end(self, name) -> XmlNode | None:
        if not self.stack:
            raise XmlError(f"unexpected end tag </{name}>")
        node = self.stack.pop()
        if node.name != name:
            raise XmlError(f"tag mismatch: <{node.name}> closed by </{name}>")
        return node if not self.stack else None

    def text(self, data):
        children = self.stack[-1].children
        if children and isinstance(children[-1], str):
            children[-1] += data
        else:
            children.append(data)


def xml_parse(text: str) -> XmlNode:
    tok = Tokenizer()
    tok.feed(text)
    builder = _TreeBuilder()
    root = None
    for token in tok.tokens(final=True):
        kind = token[0]
        if root is not None:
            if kind == "text" and not token[1].strip():
                continue
            raise XmlError("content after the root element")
        if kind == "text":
            if builder.stack:
                if token[1]:
                    builder.text(token[1])
            elif token[1].strip():
                raise XmlError("text outside the root element")
        elif kind == "start":
            root = builder.start(*token[1:])
        else:
            root = builder.end(token[1])
    if root is None:
        raise XmlError("incomplete document" if builder.stack else "no element")
    return root


def xml_serialize(node: XmlNode) -> str:
    parts: list[str] = []
    _write(node, parts)
    return "".join(parts)


def _write(node: XmlNode, parts: list[str]) -> None:
    if not _VALID_NAME.match(node.name):
        raise XmlError(f"invalid element name {node.name!r}")
    attrs = "".join(f" {k}='{escape(v)}'" for k, v in node.attrs.items())
    if not node.children:
        parts.append(f"<{node.name}{attrs}/>")
        return
    parts.append(f"<{node.name}{attrs}>")
    for child in node.children:
        if isinstance(child, str):
            parts.append(escape(child))
        else:
            _write(child, parts)
    parts.append(f"</{node.name}>")


def open_tag(name: str, attrs: dict[str, str]) -> str:
    """An unclosed start tag, used for stream headers."""
    return f"<{name}" + "".join(f" {k}='{escape(v)}'" for k, v in attrs.items()) + ">"


class StreamReader:
    """Incremental reader for one direction of an XMPP stream."""

    def __init__(self, root: str = "stream"):
        self.root = root
        self.tokenizer = Tokenizer()
        self.decoder = codecs.getincrementaldecoder("utf-8")()
        self.builder = _TreeBuilder()
        self.opened = False
        self.closed = False

    def feed(self, data: bytes) -> list[tuple[str, XmlNode | None]]:
        """Returns a list of ``("open", header)``, ``("stanza", node)`` and
        ``("close", None)`` events."""
        try:
            self.tokenizer.feed(self.decoder.decode(data))
        except UnicodeDecodeError as exc:
            raise XmlError(f"stream is not UTF-8: {exc}") from None
        events = []
        for token in self.tokenizer.tokens():
            if self.closed:
                raise XmlError("data after stream close")
            kind = token[0]
            if kind == "text":
                if self.builder.stack:
                    if token[1]:
                        self.builder.text(token[1])
                elif token[1].strip():
                    raise XmlError("character data between stanzas")
                continue
            if not self.opened:
                if kind != "start" or token[1] != self.root or token[3]:
                    raise XmlError(f"expected <{self.root}> header")
                self.opened = True
                events.append(("open", XmlNode(token[1], token[2])))
                continue
            if kind == "end" and not self.builder.stack:
                if token[1] != self.root:
                    raise XmlError(f"tag mismatch: </{token[1]}> closes stream")
                self.closed = True
                events.append(("close", None))
                continue
            done = self.builder.start(*token[1:]) if kind == "start" else self.builder.end(token[1])
            if done is not None:
                events.append(("stanza", done))
        return events
