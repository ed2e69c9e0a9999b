import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbxmpp.commstack.idgrammar import CommIDError, LayerSpec, parse_comm_id

PRINTED_IDS = [
    ("fbdk[].ip[192.168.20.1:61499]",
     [("fbdk", ()), ("ip", ("192.168.20.1", "61499"))]),
    ("fbdk[].xmpp[encryption:publisher full JID:password:XMPP server IP address]",
     [("fbdk", ()), ("xmpp", ("encryption", "publisher full JID", "password",
                              "XMPP server IP address"))]),
    ("fbdk[].xmpp[encryption:subscriber full JID:password:XMPP server IP address:publisher full JID]",
     [("fbdk", ()), ("xmpp", ("encryption", "subscriber full JID", "password",
                              "XMPP server IP address", "publisher full JID"))]),
    ("fbdk[].xmpp[1:cemdsm@localhost/res:***: 192.168.1.210:netop@localhost/res]",
     [("fbdk", ()), ("xmpp", ("1", "cemdsm@localhost/res", "***", " 192.168.1.210",
                              "netop@localhost/res"))]),
]


@pytest.mark.parametrize("text,layers", PRINTED_IDS)
def test_printed_ids_parse_and_reserialize(text, layers):
    cid = parse_comm_id(text)
    assert [(layer.name, layer.params) for layer in cid.layers] == layers
    assert cid.transport.name == layers[-1][0]
    assert str(cid) == text


def test_dots_inside_brackets_do_not_split():
    cid = parse_comm_id("fbdk[].ip[239.0.0.1:61499]")
    assert len(cid.layers) == 2
    assert cid.payload_layers == (LayerSpec("fbdk"),)


def test_transport_only_id():
    assert parse_comm_id("ip[127.0.0.1:1]").payload_layers == ()


@pytest.mark.parametrize("text", [
    "fbdk[].ip[1.2.3.4:5",      # unbalanced
    "fbdk[]].ip[x]",
    "fbdk[]..ip[x]",            # empty segment
    "fbdk.ip[x]",               # missing brackets
    "fbdk[]",                   # no transport
    "ip[x].fbdk[]",             # transport not last
    "ip[x].xmpp[y]",
    "tls[].ip[x]",              # unknown layer
    "fb-dk[].ip[x]",
    "fbdk[]x.ip[y]",
    "",
])
def test_malformed_ids(text):
    with pytest.raises(CommIDError):
        parse_comm_id(text)


param = st.text(alphabet=st.characters(blacklist_characters="[]:", blacklist_categories=("Cs",)),
                max_size=12)


@given(st.lists(param, min_size=1, max_size=6), st.sampled_from(["ip", "xmpp"]))
def test_serialize_parse_roundtrip(params, transport):
    text = str(LayerSpec("fbdk")) + "." + str(LayerSpec(transport, tuple(params)))
    cid = parse_comm_id(text)
    assert str(cid) == text
    if params != [""]:
        assert cid.transport.params == tuple(params)
