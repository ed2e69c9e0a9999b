import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbxmpp.xmppmini.jid import Jid, JidError, jid_parse
from fbxmpp.xmppmini.stanza import Stanza, StanzaError, error_condition, error_element, value_element
from fbxmpp.xmppmini.xml import (StreamReader, XmlError, XmlNode, escape, open_tag, unescape,
                                 xml_parse, xml_serialize)


def test_serialize_uses_single_quotes_and_self_closing():
    node = XmlNode("iq", {"type": "get", "id": "1"}, [XmlNode("Value", {"xmlns": "forte"})])
    assert xml_serialize(node) == "<iq type='get' id='1'><Value xmlns='forte'/></iq>"


def test_escaping_all_five():
    assert escape("<a & 'b' \"c\">") == "&lt;a &amp; &apos;b&apos; &quot;c&quot;&gt;"
    assert unescape("&lt;&gt;&amp;&apos;&quot;&#65;&#x42;") == "<>&'\"AB"
    with pytest.raises(XmlError):
        unescape("&bogus;")


def test_parse_both_quote_styles_and_text():
    node = xml_parse("<a x=\"1\" y='2'>hi <b/> there</a>")
    assert node.attrs == {"x": "1", "y": "2"}
    assert node.text == "hi  there"
    assert node.find("b") is not None


@pytest.mark.parametrize("text", [
    "<a><b></a></b>", "<a>", "<a></a><b/>", "text", "<!DOCTYPE a><a/>", "<?xml version='1.0'?><a/>",
    "<a x='1' x='2'/>", "<a x=1/>", "<1a/>", "<a>&unknown;</a>",
])
def test_parse_rejects(text):
    with pytest.raises(XmlError):
        xml_parse(text)


names = st.from_regex(r"[A-Za-z_][A-Za-z0-9_.-]{0,6}", fullmatch=True)
texts = st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=10)
nodes = st.recursive(
    st.builds(XmlNode, names, st.dictionaries(names, st.text(
        alphabet=st.characters(blacklist_categories=("Cs", "Cc")), max_size=8), max_size=3)),
    lambda children: st.builds(XmlNode, names, st.just({}), st.lists(st.one_of(children, texts), max_size=4)),
    max_leaves=10)


def normalize(node):
    children = []
    for child in node.children:
        if isinstance(child, str):
            if children and isinstance(children[-1], str):
                children[-1] += child
            else:
                children.append(child)
        else:
            children.append(normalize(child))
    return XmlNode(node.name, dict(node.attrs), children)


@given(nodes)
def test_serialize_parse_roundtrip(node):
    assert xml_parse(xml_serialize(node)) == normalize(node)


def test_stream_reader_incremental():
    data = (open_tag("stream", {"to": "localhost"}) + "<presence from='a@b/c'><Value xmlns='forte'>QQ==</Value>"
            "</presence><iq type='get' id='7'/></stream>").encode()
    reader = StreamReader()
    events = []
    for i in range(len(data)):
        events += reader.feed(data[i:i + 1])
    kinds = [k for k, _ in events]
    assert kinds == ["open", "stanza", "stanza", "close"]
    assert events[0][1].attrs == {"to": "localhost"}
    assert events[1][1].find("Value", "forte").text == "QQ=="


def test_stream_reader_split_utf8():
    reader = StreamReader()
    data = "<stream><m>é</m>".encode()
    events = reader.feed(data[:-5]) + reader.feed(data[-5:])
    assert events[-1][1].text == "é"


@pytest.mark.parametrize("data", [b"<wrong>", b"<stream>text<a/>", b"<stream></other>", b"<stream>\xff"])
def test_stream_reader_errors(data):
    with pytest.raises(XmlError):
        StreamReader().feed(data)


def test_jids():
    j = jid_parse("cemdsm@localhost/res")
    assert (j.node, j.domain, j.resource) == ("cemdsm", "localhost", "res")
    assert str(j.bare) == "cemdsm@localhost" and j.bare.is_bare and not j.is_bare
    assert str(j) == "cemdsm@localhost/res"
    assert jid_parse("a@b/c/d").resource == "c/d"
    for bad in ["nobody", "@host", "a@", "a@b@c"]:
        with pytest.raises(JidError):
            jid_parse(bad)
    assert Jid("a", "b") == jid_parse("a@b")


def test_stanza_roundtrip_and_validation():
    s = Stanza("iq", jid_parse("a@b/c"), jid_parse("d@b/e"), "3", "set", [value_element("QQ==")])
    back = Stanza.from_node(xml_parse(s.serialize()))
    assert back == s and back.value_text == "QQ=="
    reply = back.reply("error", [error_element("service-unavailable")])
    assert (reply.frm, reply.to, reply.id) == (s.to, s.frm, "3")
    assert error_condition(reply) == "service-unavailable"
    assert Stanza("presence", payload=[value_element(None)]).value_text == ""
    assert Stanza("presence").value_text is None
    for bad in [dict(kind="iq", type="get"), dict(kind="iq", id="1", type="push"),
                dict(kind="presence", type="probe"), dict(kind="chat")]:
        with pytest.raises(StanzaError):
            Stanza(**bad)
