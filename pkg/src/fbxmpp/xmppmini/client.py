"""Client sessions: login, presence pub/sub and iq request/response."""

from __future__ import annotations

import base64
import itertools
import logging
import queue
import socket
import threading
from typing import Callable

from .. import metrics
from .broker import DEFAULT_PORT
from .jid import Jid
from .stanza import AUTH_NS, Stanza, error_condition, error_element, value_element
from .xml import StreamReader, XmlError, XmlNode, open_tag, xml_serialize

log = logging.getLogger(__name__)


class XmppError(Exception):
    pass


class ConnectError(XmppError):
    pass


class AuthFailure(XmppError):
    pass


class IqError(XmppError):
    def __init__(self, condition: str, stanza: Stanza | None = None):
        super().__init__(condition)
        self.condition = condition
        self.stanza = stanza


class _Waiter:
    __slots__ = ("event", "stanza")

    def __init__(self):
        self.event = threading.Event()
        self.stanza: Stanza | None = None


class Session:
    """An authenticated client stream bound to a full JID.

    One reader thread parses inbound stanzas.  iq results are handed to the
    matching :meth:`iq_request` call by id; inbound iq requests are answered
    one at a time on a worker thread by the handler set with
    :meth:`iq_respond`; presence stanzas go to the ``presence_listeners``.
    Incoming subscription requests are accepted automatically unless
    ``auto_accept`` is false.
    """

    def __init__(self, jid: Jid, password: str, server_ip: str = "127.0.0.1",
                 port: int = DEFAULT_PORT, observer=None, auto_accept: bool = True):
        if jid.is_bare:
            raise ValueError("a session needs a full JID")
        self.jid = jid
        self.password = password
        self.server = (server_ip, port)
        self.observer = observer or metrics.observer
        self.auto_accept = auto_accept
        self.presence_listeners: list[Callable[[Stanza], None]] = []
        # called for every inbound stanza before it is dispatched
        self.stanza_listeners: list[Callable[[Stanza], None]] = []
        self.closed = threading.Event()
        self._ids = itertools.count(1)
        self._waiters: dict[str, _Waiter] = {}
        self._wlock = threading.Lock()
        self._state_lock = threading.Lock()
        self._handler = None
        self._accept_from: Jid | None = None
        self._requests: queue.Queue = queue.Queue()
        self._worker: threading.Thread | None = None
        self.sock: socket.socket | None = None
        self.reader = StreamReader()
        self._backlog: list = []

    # -- connection ----------------------------------------------------

    def connect(self, timeout: float = 5.0) -> "Session":
        try:
            self.sock = socket.create_connection(self.server, timeout=timeout)
        except OSError as exc:
            raise ConnectError(f"cannot reach XMPP server {self.server[0]}:{self.server[1]}: {exc}") from exc
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        try:
            self._handshake()
        except (OSError, XmlError) as exc:
            self.sock.close()
            raise ConnectError(f"handshake failed: {exc}") from exc
        except AuthFailure:
            self.sock.close()
            raise
        self.sock.settimeout(None)
        threading.Thread(target=self._read_loop, name=f"xmpp-{self.jid}", daemon=True).start()
        return self

    def _handshake(self):
        self._send_text(open_tag("stream", {"to": self.jid.domain, "from": str(self.jid)}))
        creds = f"{self.jid.bare}\0{self.password}".encode("utf-8")
        self._send_text(xml_serialize(
            XmlNode("auth", {"xmlns": AUTH_NS}, [base64.b64encode(creds).decode("ascii")])))
        opened = False
        while True:
            data = self.sock.recv(65536)
            if not data:
                raise ConnectError("server closed the stream during login")
            self.observer.record("xmpp", "received", len(data), "client")
            events = self.reader.feed(data)
            for i, (kind, node) in enumerate(events):
                if kind == "open":
                    opened = True
                elif kind == "close":
                    raise AuthFailure("stream closed during login")
                elif opened and node.name == "success":
                    self._backlog = events[i + 1:]
                    return
                elif node.name == "failure":
                    raise AuthFailure(f"authentication failed for {self.jid}")

    def close(self) -> None:
        if not self.closed.is_set():
            try:
                self._send_text("</stream>")
            except XmppError:
                pass
        self.closed.set()
        self._requests.put(None)
        if self.sock is not None:
            try:
                self.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self.sock.close()
        self._fail_waiters()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _send_text(self, text: str) -> None:
        data = text.encode("utf-8")
        with self._wlock:
            if self.closed.is_set():
                raise XmppError("session closed")
            try:
                self.sock.sendall(data)
            except OSError as exc:
                raise XmppError(f"send failed: {exc}") from exc
        self.observer.record("xmpp", "sent", len(data), "client")

    def send(self, stanza: Stanza) -> None:
        self._send_text(stanza.serialize())

    def next_id(self) -> str:
        return str(next(self._ids))

    # -- inbound -------------------------------------------------------

    def _read_loop(self):
        try:
            # anything that arrived together with <success/>
            for event in self._backlog:
                self._handle(*event)
            while not self.closed.is_set():
                data = self.sock.recv(65536)
                if not data:
                    break
                self.observer.record("xmpp", "received", len(data), "client")
                for event in self.reader.feed(data):
                    self._handle(*event)
        except (OSError, XmlError) as exc:
            if not self.closed.is_set():
                log.debug("session %s reader stopped: %s", self.jid, exc)
        finally:
            self.closed.set()
            self._requests.put(None)
            self._fail_waiters()

    def _handle(self, kind, node):
        if kind == "close":
            self.closed.set()
            return
        if kind != "stanza":
            return
        try:
            stanza = Stanza.from_node(node)
        except ValueError:
            log.debug("ignoring malformed stanza %r", node)
            return
        for listener in list(self.stanza_listeners):
            try:
                listener(stanza)
            except Exception:
                log.exception("stanza listener failed")
        if stanza.kind == "iq":
            if stanza.type in ("result", "error"):
                with self._state_lock:
                    waiter = self._waiters.get(stanza.id)
                if waiter is not None:
                    waiter.stanza = stanza
                    waiter.event.set()
            else:
                self._requests.put(stanza)
                self._ensure_worker()
        elif stanza.kind == "presence":
            if stanza.type == "subscribe" and self.auto_accept and stanza.frm is not None:
                try:
                    self.send(Stanza("presence", to=stanza.frm.bare, type="subscribed"))
                except XmppError:
                    return
            for listener in list(self.presence_listeners):
                try:
                    listener(stanza)
                except Exception:
                    log.exception("presence listener failed")

    def _fail_waiters(self):
        with self._state_lock:
            waiters = list(self._waiters.values())
        for waiter in waiters:
            waiter.event.set()

    # -- pub/sub -------------------------------------------------------

    def presence_subscribe(self, publisher: Jid) -> None:
        self.send(Stanza("presence", to=publisher.bare, type="subscribe"))

    def presence_publish(self, payload_b64: str | None) -> None:
        self.send(Stanza("presence", payload=[value_element(payload_b64)]))

    # -- iq ------------------------------------------------------------

    def iq_request(self, to: Jid, payload_b64: str | None, timeout_ms: float) -> str:
        """Send an iq get (no payload) or set and wait for the matching result.
        Returns the result's ``Value`` text."""
        stanza_id = self.next_id()
        waiter = _Waiter()
        with self._state_lock:
            self._waiters[stanza_id] = waiter
        try:
            self.send(Stanza("iq", to=to, id=stanza_id,
                             type="get" if payload_b64 is None else "set",
                             payload=[value_element(payload_b64)]))
            if not waiter.event.wait(timeout_ms / 1000.0):
                raise TimeoutError(f"iq {stanza_id} to {to}: no answer within {timeout_ms} ms")
        finally:
            with self._state_lock:
                self._waiters.pop(stanza_id, None)
        reply = waiter.stanza
        if reply is None:
            raise XmppError("session closed while waiting for iq result")
        if reply.type == "error":
            raise IqError(error_condition(reply) or "undefined-condition", reply)
        return reply.value_text or ""

    def iq_respond(self, handler: Callable[[str | None], str | None],
                   accept_from: Jid | None = None) -> None:
        """Answer inbound iq get/set.  The handler receives the request's Value
        text (None for a get without data) and returns the response text.
        With ``accept_from`` set, requests from any other JID are refused."""
        self._handler = handler
        self._accept_from = accept_from
        self._ensure_worker()

    def _ensure_worker(self):
        with self._state_lock:
            if self._worker is None:
                self._worker = threading.Thread(target=self._work, name=f"iq-{self.jid}", daemon=True)
                self._worker.start()

    def _work(self):
        while True:
            request = self._requests.get()
            if request is None:
                return
            handler = self._handler
            try:
                if handler is None:
                    raise IqError("service-unavailable")
                if self._accept_from is not None and not jid_matches(self._accept_from, request.frm):
                    raise IqError("not-authorized")
                text = request.value_text
                answer = handler(text or None)
                reply = request.reply("result", [value_element(answer)])
            except IqError as exc:
                reply = request.reply("error", [error_element(exc.condition)])
            except Exception:
                log.exception("iq handler failed")
                reply = request.reply("error", [error_element("internal-server-error", "wait")])
            reply.frm = None
            try:
                self.send(reply)
            except XmppError:
                return


def jid_matches(expected: Jid, actual: Jid | None) -> bool:
    if actual is None:
        return False
    return actual == expected if expected.resource else actual.bare == expected


def client_connect(server_ip: str, jid: Jid, password: str, port: int = DEFAULT_PORT,
                   **kwargs) -> Session:
    return Session(jid, password, server_ip, port, **kwargs).connect()


def presence_subscribe(sub: Session, publisher: Jid) -> None:
    sub.presence_subscribe(publisher)


def presence_publish(pub: Session, payload_b64: str | None) -> None:
    pub.presence_publish(payload_b64)


def iq_request(cli: Session, server_jid: Jid, payload_b64: str | None, timeout: float) -> str:
    return cli.iq_request(server_jid, payload_b64, timeout)


def iq_respond(srv: Session, handler) -> None:
    srv.iq_respond(handler)
