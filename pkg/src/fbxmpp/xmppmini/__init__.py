"""A minimal self-hosted XMPP subset: broker, client sessions, XML and JIDs."""

from .broker import DEFAULT_PORT, Broker, broker_start, load_accounts
from .client import (
    AuthFailure,
    ConnectError,
    IqError,
    Session,
    XmppError,
    client_connect,
    iq_request,
    iq_respond,
    presence_publish,
    presence_subscribe,
)
from .jid import Jid, JidError, jid_parse
from .stanza import FORTE_NS, Stanza, StanzaError, value_element
from .xml import StreamReader, XmlError, XmlNode, xml_parse, xml_serialize
