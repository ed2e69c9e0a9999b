"""Minimal stanza router: accounts, in-memory rosters, full-JID routing."""

from __future__ import annotations

import base64
import binascii
import itertools
import logging
import socket
import threading

from .. import metrics
from .jid import Jid, JidError, jid_parse
from .stanza import AUTH_NS, Stanza, StanzaError, error_element
from .xml import StreamReader, XmlError, XmlNode, open_tag, xml_serialize

log = logging.getLogger(__name__)

DEFAULT_PORT = 5222


class _Conn:
    def __init__(self, broker: "Broker", sock: socket.socket):
        self.broker = broker
        self.sock = sock
        self.jid: Jid | None = None
        self._wlock = threading.Lock()
        self.closed = False

    def send_text(self, text: str) -> bool:
        data = text.encode("utf-8")
        with self._wlock:
            if self.closed:
                return False
            try:
                self.sock.sendall(data)
            except OSError:
                return False
        self.broker.observer.record("xmpp", "sent", len(data), "broker")
        return True

    def send(self, stanza: Stanza) -> bool:
        return self.send_text(stanza.serialize())

    def close(self, farewell: bool = True) -> None:
        if farewell:
            self.send_text("</stream>")
        with self._wlock:
            if self.closed:
                return
            self.closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class Broker:
    def __init__(self, accounts, host: str = "127.0.0.1", port: int = DEFAULT_PORT, observer=None):
        self.accounts = {jid_parse(str(j)).bare: pw for j, pw in dict(accounts).items()}
        self.host = host
        self.port = port
        self.observer = observer or metrics.observer
        self.lock = threading.RLock()
        self.routes: dict[Jid, _Conn] = {}
        self.rosters: dict[Jid, dict[Jid, str]] = {j: {} for j in self.accounts}
        self.roster_version = 0
        self.dropped = 0
        self.delivered = 0
        self._ids = itertools.count(1)
        self._conns: set[_Conn] = set()
        self._closed = threading.Event()
        self.sock: socket.socket | None = None

    # -- lifecycle -----------------------------------------------------

    def start(self) -> "Broker":
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((self.host, self.port))
            sock.listen(64)
        except OSError:
            sock.close()
            raise
        sock.settimeout(0.2)
        self.sock = sock
        self.port = sock.getsockname()[1]
        self._thread = threading.Thread(target=self._accept, name="xmppd-accept", daemon=True)
        self._thread.start()
        return self

    def close(self) -> None:
        self._closed.set()
        if self.sock is not None:
            self.sock.close()
        with self.lock:
            conns = list(self._conns)
        for conn in conns:
            conn.close()
        if self.sock is not None:
            self._thread.join(timeout=2)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()

    def _accept(self):
        while not self._closed.is_set():
            try:
                sock, _ = self.sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            sock.settimeout(None)
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Conn(self, sock)
            with self.lock:
                self._conns.add(conn)
            threading.Thread(target=self._session, args=(conn,), daemon=True).start()

    # -- per-connection protocol ---------------------------------------

    def _session(self, conn: _Conn):
        reader = StreamReader()
        header_jid = None
        try:
            while not conn.closed:
                data = conn.sock.recv(65536)
                if not data:
                    break
                self.observer.record("xmpp", "received", len(data), "broker")
                for kind, node in reader.feed(data):
                    if kind == "close":
                        return
                    if kind == "open":
                        header_jid = self._open(conn, node)
                        if header_jid is None:
                            return
                    elif conn.jid is None:
                        if not self._auth(conn, header_jid, node):
                            return
                    else:
                        self._dispatch(conn, node)
        except (OSError, XmlError) as exc:
            log.debug("session %s ended: %s", conn.jid, exc)
        finally:
            self._unbind(conn)
            conn.close()

    def _open(self, conn, header: XmlNode) -> Jid | None:
        domain = header.get("to", "")
        conn.send_text(open_tag("stream", {"from": domain, "id": str(next(self._ids))}))
        try:
            jid = jid_parse(header.get("from", ""))
        except JidError:
            jid = None
        if jid is None or jid.is_bare or jid.domain != domain:
            conn.send_text(xml_serialize(XmlNode("failure", {"xmlns": AUTH_NS})))
            return None
        return jid

    def _auth(self, conn, header_jid: Jid, node: XmlNode) -> bool:
        ok = False
        if node.name == "auth" and node.get("xmlns") == AUTH_NS:
            try:
                raw = base64.b64decode(node.text, validate=True).decode("utf-8")
                bare, _, password = raw.partition("\0")
                ok = (jid_parse(bare) == header_jid.bare
                      and self.accounts.get(header_jid.bare) == password)
            except (binascii.Error, UnicodeDecodeError, JidError):
                ok = False
        if not ok:
            conn.send_text(xml_serialize(XmlNode("failure", {"xmlns": AUTH_NS})))
            return False
        self._bind(conn, header_jid)
        return True

    def _bind(self, conn, jid: Jid):
        with self.lock:
            old = self.routes.get(jid)
            conn.jid = jid
            self.routes[jid] = conn
            pending = [c for c, state in self.rosters[jid.bare].items() if state == "pending"]
        if old is not None and old is not conn:
            # the newer session wins the resource
            old.jid = None
            old.close()
        conn.send_text(xml_serialize(XmlNode("success", {"xmlns": AUTH_NS})))
        for contact in pending:
            conn.send(Stanza("presence", contact, jid, type="subscribe"))

    def _unbind(self, conn):
        with self.lock:
            self._conns.discard(conn)
            if conn.jid is not None and self.routes.get(conn.jid) is conn:
                del self.routes[conn.jid]

    # -- routing -------------------------------------------------------

    def sessions_of(self, bare: Jid) -> list[_Conn]:
        with self.lock:
            return [c for j, c in self.routes.items() if j.bare == bare]

    def _deliver(self, conn: _Conn, stanza: Stanza) -> None:
        if conn.send(stanza):
            with self.lock:
                self.delivered += 1
        else:
            self._drop()

    def _drop(self):
        with self.lock:
            self.dropped += 1

    def _route(self, stanza: Stanza) -> bool:
        """Deliver to the session bound to a full JID, or count a drop."""
        with self.lock:
            conn = self.routes.get(stanza.to) if stanza.to and not stanza.to.is_bare else None
        if conn is None:
            self._drop()
            return False
        self._deliver(conn, stanza)
        return True

    def _dispatch(self, conn: _Conn, node: XmlNode):
        try:
            stanza = Stanza.from_node(node)
        except StanzaError as exc:
            if node.name == "iq" and node.get("id"):
                conn.send(Stanza("iq", None, conn.jid, node.get("id"), "error",
                                 [error_element("bad-request", "modify")]))
            log.debug("rejected stanza from %s: %s", conn.jid, exc)
            return
        stanza.frm = conn.jid  # never trust a client-supplied from
        if stanza.kind == "presence":
            self._presence(conn, stanza)
        elif stanza.kind == "iq":
            if stanza.to is None or not self._route(stanza):
                if stanza.type in ("get", "set"):
                    conn.send(Stanza("iq", stanza.to, conn.jid, stanza.id, "error",
                                     [error_element("service-unavailable")]))
        else:
            self._route(stanza)

    def _presence(self, conn: _Conn, stanza: Stanza):
        me = conn.jid
        if stanza.type == "subscribe" and stanza.to is not None:
            target = stanza.to.bare
            if target not in self.accounts:
                conn.send(Stanza("presence", target, me.bare, type="unsubscribed"))
                return
            with self.lock:
                roster = self.rosters[target]
                if me.bare not in roster:
                    roster[me.bare] = "pending"
                    self.roster_version += 1
            for peer in self.sessions_of(target):
                self._deliver(peer, Stanza("presence", me.bare, peer.jid, type="subscribe"))
        elif stanza.type in ("subscribed", "unsubscribed") and stanza.to is not None:
            contact = stanza.to.bare
            with self.lock:
                roster = self.rosters[me.bare]
                if stanza.type == "subscribed" and roster.get(contact) != "both":
                    roster[contact] = "both"
                    self.roster_version += 1
                elif stanza.type == "unsubscribed" and contact in roster:
                    del roster[contact]
                    self.roster_version += 1
            for peer in self.sessions_of(contact):
                self._deliver(peer, Stanza("presence", me.bare, peer.jid, type=stanza.type))
        elif stanza.to is None:
            with self.lock:
                contacts = [c for c, s in self.rosters[me.bare].items() if s == "both"]
            for contact in contacts:
                for peer in self.sessions_of(contact):
                    self._deliver(peer, Stanza("presence", me, peer.jid, payload=stanza.payload))
        elif stanza.to.is_bare:
            for peer in self.sessions_of(stanza.to):
                self._deliver(peer, Stanza("presence", me, peer.jid, type=stanza.type,
                                           payload=stanza.payload))
        else:
            self._route(stanza)

    # -- introspection -------------------------------------------------

    def roster(self, account: Jid | str) -> dict[Jid, str]:
        bare = jid_parse(str(account)).bare
        with self.lock:
            return dict(self.rosters.get(bare, {}))

    def routing_table(self) -> list[Jid]:
        with self.lock:
            return list(self.routes)


def broker_start(port: int, accounts, host: str = "127.0.0.1", observer=None) -> Broker:
    return Broker(accounts, host, port, observer).start()


def load_accounts(path) -> dict[Jid, str]:
    """Lines of ``bareJid password``; blank lines and ``#`` comments skipped."""
    accounts = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'bareJid password'")
            accounts[jid_parse(parts[0]).bare] = parts[1]
    return accounts
