"""Two in-process resources joined by one pair of communication blocks.

The rig builds ``PUBLISH_1``/``SUBSCRIBE_1`` (async) or ``CLIENT_1_1``/
``SERVER_1_1`` with an echoing server (sync) over the requested transport,
starting a private broker for xmpp.  Values are DINT sequence numbers so each
delivery can be matched to its send.
"""

from __future__ import annotations

import socket
import threading
import time

from ..fbcore.runtime import Connection, Device, FBNetwork, FBSpec, instantiate_network
from ..fbcore.values import Kind, Value
from ..xmppmini.broker import Broker
from ..xmppmini.jid import jid_parse

TRANSPORTS = ("xmpp", "udp", "tcp")
PATTERNS = ("async", "sync")
BENCH_ACCOUNTS = {"benchpub@localhost": "pub", "benchsub@localhost": "sub"}


class RigError(RuntimeError):
    pass


def check_combination(transport: str, pattern: str) -> None:
    if transport not in TRANSPORTS:
        raise RigError(f"unknown transport {transport!r}")
    if pattern not in PATTERNS:
        raise RigError(f"unknown pattern {pattern!r}")
    if (transport, pattern) in (("udp", "sync"), ("tcp", "async")):
        raise RigError(f"{transport} carries only the {'async' if transport == 'udp' else 'sync'} pattern")


def free_port(kind=socket.SOCK_STREAM) -> int:
    with socket.socket(socket.AF_INET, kind) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class Rig:
    """``sender`` runs on the caller's thread (stepped explicitly), the
    ``receiver`` resource runs its own scheduler thread."""

    def __init__(self, transport: str, pattern: str, kind: Kind = Kind.DINT):
        check_combination(transport, pattern)
        self.transport = transport
        self.pattern = pattern
        self.kind = kind
        self.broker: Broker | None = None
        self._cond = threading.Condition()
        self._arrivals: list[tuple[float, Value | None, str]] = []
        pub_id, sub_id = self._ids()
        k = kind.value
        if pattern == "async":
            fbs = [FBSpec("SND", f"PUBLISH_1:{k}", "sender", {"QI": "1", "ID": pub_id}),
                   FBSpec("RCV", f"SUBSCRIBE_1:{k}", "receiver", {"QI": "1", "ID": sub_id})]
            events, data = [], []
        else:
            fbs = [FBSpec("SND", f"CLIENT_1_1:{k},{k}", "sender", {"QI": "1", "ID": pub_id}),
                   FBSpec("RCV", f"SERVER_1_1:{k},{k}", "receiver", {"QI": "1", "ID": sub_id})]
            events = [Connection("RCV.IND", "RCV.RSP")]
            data = [Connection("RCV.RD_1", "RCV.SD_1")]
        net = FBNetwork([Device("sender"), Device("receiver")], fbs, events, data)
        self.receiver = instantiate_network(net, "receiver")
        self.sender = instantiate_network(net, "sender")
        watched = self.receiver if pattern == "async" else self.sender
        watched.observers.append(self._on_step)
        self._init(self.receiver)
        self._init(self.sender)
        self.receiver.start()
        if pattern == "sync":
            self.sender.start()
        if transport == "xmpp" and pattern == "async":
            self._await_roster()

    def _ids(self) -> tuple[str, str]:
        if self.transport == "udp":
            ident = f"fbdk[].ip[127.0.0.1:{free_port(socket.SOCK_DGRAM)}]"
            return ident, ident
        if self.transport == "tcp":
            ident = f"fbdk[].ip[127.0.0.1:{free_port()}]"
            return ident, ident
        self.broker = Broker(BENCH_ACCOUNTS, port=0).start()
        port = self.broker.port
        snd, rcv = "benchpub@localhost/snd", "benchsub@localhost/rcv"
        if self.pattern == "async":
            return (f"fbdk[].xmpp[0:{snd}:pub:127.0.0.1:{port}]",
                    f"fbdk[].xmpp[0:{rcv}:sub:127.0.0.1:{snd}:{port}]")
        return (f"fbdk[].xmpp[0:{snd}:pub:127.0.0.1:{rcv}:{port}]",
                f"fbdk[].xmpp[0:{rcv}:sub:127.0.0.1:{snd}:{port}]")

    def _init(self, rt):
        fb = rt.fbs["SND" if rt is self.sender else "RCV"]
        rt.post(fb.name, "INIT")
        rt.run_until_idle()
        if not fb.outputs["QO"].payload:
            self.close()
            raise RigError(f"{fb.name} INIT failed: {fb.outputs['STATUS'].payload}")

    def _await_roster(self, timeout: float = 5.0):
        publisher = jid_parse("benchpub@localhost")
        subscriber = jid_parse("benchsub@localhost")
        deadline = time.monotonic() + timeout
        while self.broker.roster(publisher).get(subscriber) != "both":
            if time.monotonic() > deadline:
                raise RigError("subscription handshake did not complete")
            time.sleep(0.01)

    def _on_step(self, report):
        # runs on the scheduler thread of the watched resource
        if report.fb == ("RCV" if self.pattern == "async" else "SND") and report.origin == "external":
            now = time.perf_counter()
            fb = (self.receiver if self.pattern == "async" else self.sender).fbs[report.fb]
            with self._cond:
                self._arrivals.append((now, fb.outputs["RD_1"], fb.outputs["STATUS"].payload))
                self._cond.notify_all()

    def transfer(self, value: Value, timeout: float = 1.0) -> float | None:
        """Send one value; return seconds until it (or its echo) arrived, or
        None when it did not arrive in time or arrived altered."""
        with self._cond:
            self._arrivals.clear()
        snd = self.sender.fbs["SND"]
        start = time.perf_counter()
        if self.pattern == "async":
            snd.set_input("SD_1", value)
            self.sender.post("SND", "REQ")
            self.sender.run_until_idle()
        else:
            # the sender's scheduler is idle between transfers, so writing
            # the input from here does not race with a step
            snd.set_input("SD_1", value)
            self.sender.post("SND", "REQ")
        deadline = start + timeout
        with self._cond:
            while True:
                for at, got, status in self._arrivals:
                    if got == value and status == "OK":
                        return at - start
                remaining = deadline - time.perf_counter()
                if remaining <= 0:
                    return None
                self._cond.wait(remaining)

    def close(self):
        for rt in (self.sender, self.receiver):
            rt.shutdown()
        if self.broker is not None:
            self.broker.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
