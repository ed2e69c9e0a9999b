"""Composition of a parsed ID into a working communication endpoint.

The payload path is ``values -> BER -> transport`` for ``ip`` and
``values -> BER -> Base64 -> <Value xmlns='forte'>`` for ``xmpp``; receive
runs the mirror image.  Receive callbacks fire on transport threads and must
only hand the decoded values on, never run FB logic.

xmpp parameters, in order (an optional broker port may follow)::

    publish:   encryption:own JID:password:server IP
    subscribe: encryption:own JID:password:server IP:publisher JID
    client:    encryption:own JID:password:server IP:server JID
    server:    encryption:own JID:password:server IP:client JID
"""

from __future__ import annotations

import os
from typing import Callable

from .. import transports
from ..fbcore.values import Value
from ..xmppmini import client as xmpp_client
from ..xmppmini.broker import DEFAULT_PORT as XMPP_DEFAULT_PORT
from ..xmppmini.jid import Jid, JidError, jid_parse
from ..xmppmini.stanza import Stanza
from .ber import BerError, ber_decode, ber_encode
from .idgrammar import CommID, CommIDError, parse_comm_id
from .textbridge import Base64Error, b64_decode, b64_encode

PATTERNS = ("publish", "subscribe", "client", "server")
XMPP_PORT_ENV = "FBX_XMPP_PORT"


class StackError(Exception):
    status = "INVALID_ID"


class InvalidIdError(StackError):
    status = "INVALID_ID"


class TlsUnsupportedError(StackError):
    status = "TLS_UNSUPPORTED"


class ConnectFailedError(StackError):
    status = "CONNECT_FAILED"


class DecodeError(StackError):
    status = "DECODE_ERROR"


def default_xmpp_port() -> int:
    return int(os.environ.get(XMPP_PORT_ENV, XMPP_DEFAULT_PORT))


def encode_values(values) -> bytes:
    return ber_encode(values)


def decode_frame(frame: bytes) -> list[Value]:
    try:
        return ber_decode(frame)
    except BerError as exc:
        raise DecodeError(str(exc)) from None


def decode_text(text: str | None) -> list[Value]:
    try:
        return decode_frame(b64_decode(text or ""))
    except Base64Error as exc:
        raise DecodeError(str(exc)) from None


class CommEndpoint:
    """Common surface of all endpoints; each pattern implements its part."""

    def __init__(self, commid: CommID, pattern: str):
        self.commid = commid
        self.pattern = pattern
        self.on_receive: Callable[[list[Value]], None] | None = None
        self.on_decode_error: Callable[[Exception], None] | None = None

    def send(self, values) -> None:
        raise StackError(f"{self.pattern} endpoints cannot send")

    def request(self, values, timeout_ms: float) -> list[Value]:
        raise StackError(f"{self.pattern} endpoints cannot make requests")

    def serve(self, handler: Callable[[list[Value]], list[Value]]) -> None:
        raise StackError(f"{self.pattern} endpoints cannot serve")

    def close(self) -> None:
        pass

    def _deliver(self, frame_or_text, decoder):
        try:
            values = decoder(frame_or_text)
        except DecodeError as exc:
            if self.on_decode_error is not None:
                self.on_decode_error(exc)
            return
        if self.on_receive is not None:
            self.on_receive(values)


# -- ip ------------------------------------------------------------------


class IpPublisher(CommEndpoint):
    def __init__(self, commid, params, observer=None):
        super().__init__(commid, "publish")
        self.pub = transports.UdpPublisher(params, observer)

    def send(self, values):
        try:
            self.pub.publish(encode_values(values))
        except (transports.TransportError, transports.OversizeError) as exc:
            raise ConnectFailedError(str(exc)) from exc

    def close(self):
        self.pub.close()


class IpSubscriber(CommEndpoint):
    def __init__(self, commid, params, observer=None):
        super().__init__(commid, "subscribe")
        try:
            self.sub = transports.udp_subscribe(
                params, lambda frame: self._deliver(frame, decode_frame), observer)
        except transports.ConnectError as exc:
            raise ConnectFailedError(str(exc)) from exc

    def close(self):
        self.sub.close()


class IpClient(CommEndpoint):
    def __init__(self, commid, params, observer=None):
        super().__init__(commid, "client")
        self.client = transports.TcpClient(params, observer)
        try:
            self.client.connect()
        except transports.ConnectError as exc:
            raise ConnectFailedError(str(exc)) from exc

    def request(self, values, timeout_ms):
        try:
            response = self.client.request(encode_values(values), timeout_ms)
        except TimeoutError:
            raise
        except transports.TransportError as exc:
            raise ConnectFailedError(str(exc)) from exc
        return decode_frame(response)

    def close(self):
        self.client.close()


class IpServer(CommEndpoint):
    def __init__(self, commid, params, observer=None):
        super().__init__(commid, "server")
        self.params = params
        self.observer = observer
        self.handler = None
        try:
            self.server = transports.tcp_serve(params, self._on_request, observer)
        except transports.ConnectError as exc:
            raise ConnectFailedError(str(exc)) from exc

    def serve(self, handler):
        self.handler = handler

    def _on_request(self, frame):
        if self.handler is None:
            return None
        try:
            values = decode_frame(frame)
        except DecodeError as exc:
            if self.on_decode_error is not None:
                self.on_decode_error(exc)
            return None
        return encode_values(self.handler(values))

    def close(self):
        self.server.close()


# -- xmpp ----------------------------------------------------------------


class _XmppEndpoint(CommEndpoint):
    def __init__(self, commid, pattern, own: Jid, password, server_ip, port, peer, observer):
        super().__init__(commid, pattern)
        self.peer = peer
        try:
            self.session = xmpp_client.client_connect(server_ip, own, password, port,
                                                      observer=observer)
        except xmpp_client.XmppError as exc:
            raise ConnectFailedError(str(exc)) from exc

    def close(self):
        self.session.close()


class XmppPublisher(_XmppEndpoint):
    def send(self, values):
        try:
            self.session.presence_publish(b64_encode(encode_values(values)))
        except xmpp_client.XmppError as exc:
            raise ConnectFailedError(str(exc)) from exc


class XmppSubscriber(_XmppEndpoint):
    def __init__(self, *args):
        super().__init__(*args)
        self.session.presence_listeners.append(self._on_presence)
        try:
            self.session.presence_subscribe(self.peer)
        except xmpp_client.XmppError as exc:
            raise ConnectFailedError(str(exc)) from exc

    def _on_presence(self, stanza: Stanza):
        if stanza.type is not None or not xmpp_client.jid_matches(self.peer, stanza.frm):
            return
        text = stanza.value_text
        if text is None:
            return
        self._deliver(text, decode_text)


class XmppClient(_XmppEndpoint):
    def request(self, values, timeout_ms):
        values = list(values)
        payload = b64_encode(encode_values(values)) if values else None
        try:
            text = self.session.iq_request(self.peer, payload, timeout_ms)
        except TimeoutError:
            raise
        except xmpp_client.XmppError as exc:
            raise ConnectFailedError(str(exc)) from exc
        return decode_text(text)


class XmppServer(_XmppEndpoint):
    def serve(self, handler):
        def answer(text):
            try:
                values = decode_text(text)
            except DecodeError as exc:
                if self.on_decode_error is not None:
                    self.on_decode_error(exc)
                raise xmpp_client.IqError("bad-request") from None
            return b64_encode(encode_values(handler(values)))

        self.session.iq_respond(answer, accept_from=self.peer)


_XMPP_ARITY = {"publish": 4, "subscribe": 5, "client": 5, "server": 5}
_XMPP_CLASSES = {"publish": XmppPublisher, "subscribe": XmppSubscriber,
                 "client": XmppClient, "server": XmppServer}
_IP_CLASSES = {"publish": IpPublisher, "subscribe": IpSubscriber,
               "client": IpClient, "server": IpServer}


def build_stack(commid: CommID | str, pattern: str, observer=None) -> CommEndpoint:
    if isinstance(commid, str):
        try:
            commid = parse_comm_id(commid)
        except CommIDError as exc:
            raise InvalidIdError(str(exc)) from None
    if pattern not in PATTERNS:
        raise InvalidIdError(f"unknown communication pattern {pattern!r}")
    transport = commid.transport
    params = transport.params
    if transport.name == "ip":
        try:
            ip = transports.IpParams.from_params(params)
        except ValueError as exc:
            raise InvalidIdError(str(exc)) from None
        return _IP_CLASSES[pattern](commid, ip, observer)
    if transport.name == "xmpp":
        need = _XMPP_ARITY[pattern]
        if len(params) not in (need, need + 1):
            raise InvalidIdError(
                f"xmpp {pattern} takes {need} parameters (plus optional port), got {len(params)}")
        encryption = params[0]
        if encryption == "1":
            raise TlsUnsupportedError("TLS (encryption=1) is not supported")
        if encryption != "0":
            raise InvalidIdError(f"encryption must be 0 or 1, got {encryption!r}")
        try:
            own = jid_parse(params[1])
            peer = jid_parse(params[4]) if need == 5 else None
        except JidError as exc:
            raise InvalidIdError(str(exc)) from None
        if own.is_bare:
            raise InvalidIdError(f"{own} is not a full JID")
        password, server_ip = params[2], params[3]
        port = default_xmpp_port()
        if len(params) == need + 1:
            try:
                port = int(params[need])
            except ValueError:
                raise InvalidIdError(f"bad port {params[need]!r}") from None
        return _XMPP_CLASSES[pattern](commid, pattern, own, password, server_ip, port, peer, observer)
    raise InvalidIdError(f"unsupported transport {transport.name!r}")
